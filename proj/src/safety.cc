#include "fieldcosim/safety.h"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "fieldcosim/errors.h"
#include "fieldcosim/numeric_format.h"
#include "json.hpp"

namespace fieldcosim::safety {

using json = nlohmann::ordered_json;

namespace {

std::string slurp(const std::filesystem::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + what + " '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json parse_document(std::string_view text, const std::string& what) {
  try {
    json doc = json::parse(text);
    if (!doc.is_object()) throw ConfigError(what + " must be a JSON object");
    return doc;
  } catch (const json::parse_error& e) {
    throw ConfigError(what + " is not valid JSON: " + e.what());
  }
}

void reject_unknown_keys(const json& node, std::initializer_list<std::string_view> allowed,
                         const std::string& where) {
  for (const auto& [key, value] : node.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

std::string get_string(const json& node, const char* key, const std::string& where,
                       bool required) {
  if (!node.contains(key)) {
    if (required) throw ConfigError(where + ": missing '" + key + "'");
    return {};
  }
  if (!node[key].is_string()) throw ConfigError(where + ": '" + key + "' must be a string");
  return node[key].get<std::string>();
}

std::vector<std::string> get_string_list(const json& node, const char* key,
                                         const std::string& where) {
  std::vector<std::string> out;
  if (!node.contains(key)) return out;
  if (!node[key].is_array()) throw ConfigError(where + ": '" + key + "' must be an array");
  for (const auto& v : node[key]) {
    if (!v.is_string()) throw ConfigError(where + ": '" + key + "' entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

double get_number(const json& node, const char* key, const std::string& where, double fallback) {
  if (!node.contains(key)) return fallback;
  if (!node[key].is_number()) throw ConfigError(where + ": '" + key + "' must be a number");
  const double v = node[key].get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + ": '" + key + "' must be finite");
  return v;
}

bool get_bool(const json& node, const char* key, const std::string& where, bool fallback) {
  if (!node.contains(key)) return fallback;
  if (!node[key].is_boolean()) throw ConfigError(where + ": '" + key + "' must be true or false");
  return node[key].get<bool>();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// fault trees

std::string to_string(Gate gate) {
  switch (gate) {
    case Gate::kBasic: return "basic";
    case Gate::kAnd: return "and";
    case Gate::kOr: return "or";
  }
  return "basic";
}

Gate parse_gate(std::string_view text) {
  if (text == "basic") return Gate::kBasic;
  if (text == "and") return Gate::kAnd;
  if (text == "or") return Gate::kOr;
  throw ConfigError("unknown gate '" + std::string(text) + "' (expected and, or, basic)");
}

const FaultEvent* FaultTree::find(std::string_view id) const {
  for (const auto& e : events) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

void FaultTree::validate() const {
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].id.empty()) throw ConfigError("fault tree: event with an empty id");
    if (!index.emplace(events[i].id, i).second) {
      throw ConfigError("fault tree: duplicate event id '" + events[i].id + "'");
    }
  }
  if (!index.count(top)) throw ConfigError("fault tree: top event '" + top + "' is not declared");
  for (const auto& e : events) {
    if (e.gate == Gate::kBasic && !e.children.empty()) {
      throw ConfigError("fault tree: basic event '" + e.id + "' has children");
    }
    if (e.gate != Gate::kBasic && e.children.empty()) {
      throw ConfigError("fault tree: gate '" + e.id + "' has no children");
    }
    for (const auto& c : e.children) {
      if (!index.count(c)) {
        throw ConfigError("fault tree: '" + e.id + "' refers to unknown event '" + c + "'");
      }
    }
  }
  // 0 unvisited, 1 on the stack, 2 done
  std::vector<int> mark(events.size(), 0);
  std::function<void(std::size_t)> visit = [&](std::size_t i) {
    if (mark[i] == 2) return;
    if (mark[i] == 1) throw ConfigError("fault tree: cycle through event '" + events[i].id + "'");
    mark[i] = 1;
    for (const auto& c : events[i].children) visit(index.find(c)->second);
    mark[i] = 2;
  };
  for (std::size_t i = 0; i < events.size(); ++i) visit(i);
}

std::vector<std::string> FaultTree::basic_events() const {
  std::set<std::string, std::less<>> reachable;
  std::vector<std::string> stack{top};
  while (!stack.empty()) {
    const std::string id = stack.back();
    stack.pop_back();
    if (!reachable.insert(id).second) continue;
    if (const auto* e = find(id)) {
      for (const auto& c : e->children) stack.push_back(c);
    }
  }
  std::vector<std::string> out;
  for (const auto& e : events) {
    if (e.gate == Gate::kBasic && reachable.count(e.id)) out.push_back(e.id);
  }
  return out;
}

bool evaluate_fault_tree(const FaultTree& tree, const std::map<std::string, bool>& basic_states) {
  tree.validate();
  for (const auto& [id, state] : basic_states) {
    const auto* e = tree.find(id);
    if (!e) throw ConfigError("fault tree has no event '" + id + "'");
    if (e->gate != Gate::kBasic) throw ConfigError("'" + id + "' is a gate, not a basic event");
  }
  std::function<bool(const FaultEvent&)> eval = [&](const FaultEvent& e) -> bool {
    switch (e.gate) {
      case Gate::kBasic: {
        const auto it = basic_states.find(e.id);
        if (it == basic_states.end()) {
          throw ConfigError("basic event '" + e.id + "' has no assigned state");
        }
        return it->second;
      }
      case Gate::kAnd: {
        bool all = true;
        // Evaluate every child so a missing assignment is always reported.
        for (const auto& c : e.children) all = eval(*tree.find(c)) && all;
        return all;
      }
      case Gate::kOr: {
        bool any = false;
        for (const auto& c : e.children) any = eval(*tree.find(c)) || any;
        return any;
      }
    }
    return false;
  };
  return eval(*tree.find(tree.top));
}

namespace {

using CutSet = std::uint32_t;

// Drops duplicates and every set that contains another one.
std::vector<CutSet> minimise(std::vector<CutSet> sets) {
  std::sort(sets.begin(), sets.end(), [](CutSet a, CutSet b) {
    const int pa = std::popcount(a), pb = std::popcount(b);
    return pa != pb ? pa < pb : a < b;
  });
  sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
  std::vector<CutSet> kept;
  for (CutSet s : sets) {
    const bool absorbed =
        std::any_of(kept.begin(), kept.end(), [s](CutSet k) { return (k & s) == k; });
    if (!absorbed) kept.push_back(s);
  }
  return kept;
}

}  // namespace

std::vector<std::vector<std::string>> minimal_cut_sets(const FaultTree& tree) {
  tree.validate();
  const auto basics = tree.basic_events();
  if (basics.size() > kMaxCutSetBasics) {
    throw ConfigError("fault tree has " + std::to_string(basics.size()) +
                      " basic events; cut sets are limited to " +
                      std::to_string(kMaxCutSetBasics));
  }
  std::map<std::string, CutSet, std::less<>> bit;
  for (std::size_t i = 0; i < basics.size(); ++i) bit[basics[i]] = CutSet{1} << i;

  std::map<std::string, std::vector<CutSet>, std::less<>> memo;
  std::function<const std::vector<CutSet>&(const FaultEvent&)> cuts =
      [&](const FaultEvent& e) -> const std::vector<CutSet>& {
    if (auto it = memo.find(e.id); it != memo.end()) return it->second;
    std::vector<CutSet> out;
    if (e.gate == Gate::kBasic) {
      out.push_back(bit.at(e.id));
    } else if (e.gate == Gate::kOr) {
      for (const auto& c : e.children) {
        const auto& child = cuts(*tree.find(c));
        out.insert(out.end(), child.begin(), child.end());
      }
      out = minimise(std::move(out));
    } else {
      out.push_back(0);
      for (const auto& c : e.children) {
        const auto& child = cuts(*tree.find(c));
        std::vector<CutSet> product;
        product.reserve(out.size() * child.size());
        for (CutSet a : out) {
          for (CutSet b : child) product.push_back(a | b);
        }
        out = minimise(std::move(product));
      }
    }
    return memo.emplace(e.id, std::move(out)).first->second;
  };

  std::vector<std::vector<std::size_t>> indexed;
  for (CutSet s : cuts(*tree.find(tree.top))) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < basics.size(); ++i) {
      if (s & (CutSet{1} << i)) members.push_back(i);
    }
    indexed.push_back(std::move(members));
  }
  std::sort(indexed.begin(), indexed.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  std::vector<std::vector<std::string>> out;
  for (const auto& members : indexed) {
    std::vector<std::string> names;
    for (std::size_t i : members) names.push_back(basics[i]);
    out.push_back(std::move(names));
  }
  return out;
}

FaultTree parse_fault_tree(std::string_view text) {
  const json doc = parse_document(text, "fault tree");
  reject_unknown_keys(doc, {"top", "events", "description"}, "fault tree");
  FaultTree tree;
  tree.top = get_string(doc, "top", "fault tree", true);
  if (!doc.contains("events") || !doc["events"].is_array()) {
    throw ConfigError("fault tree: 'events' must be an array");
  }
  for (const auto& node : doc["events"]) {
    if (!node.is_object()) throw ConfigError("fault tree: every event must be an object");
    FaultEvent e;
    e.id = get_string(node, "id", "fault tree event", true);
    const std::string where = "fault tree event '" + e.id + "'";
    reject_unknown_keys(node, {"id", "label", "gate", "children", "risk"}, where);
    e.label = get_string(node, "label", where, false);
    e.gate = parse_gate(get_string(node, "gate", where, true));
    e.children = get_string_list(node, "children", where);
    e.risk = get_string(node, "risk", where, false);
    tree.events.push_back(std::move(e));
  }
  tree.validate();
  return tree;
}

FaultTree read_fault_tree(const std::filesystem::path& path) {
  return parse_fault_tree(slurp(path, "fault tree"));
}

std::string fault_tree_to_json(const FaultTree& tree) {
  json doc;
  doc["top"] = tree.top;
  doc["events"] = json::array();
  for (const auto& e : tree.events) {
    json node;
    node["id"] = e.id;
    if (!e.label.empty()) node["label"] = e.label;
    node["gate"] = to_string(e.gate);
    if (!e.children.empty()) node["children"] = e.children;
    if (!e.risk.empty()) node["risk"] = e.risk;
    doc["events"].push_back(std::move(node));
  }
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// evidence

std::string verdict_to_json(const EvidenceVerdict& v) {
  json doc;
  doc["run_id"] = v.run_id;
  doc["passed"] = v.passed;
  doc["criterion"] = v.criterion;
  doc["measured"] = v.measured;
  doc["threshold"] = v.threshold;
  doc["stop_engaged"] = v.stop_engaged;
  doc["final_speed"] = v.final_speed;
  doc["reason"] = v.reason;
  return doc.dump(2) + "\n";
}

EvidenceVerdict parse_verdict_json(std::string_view text) {
  const json doc = parse_document(text, "verdict");
  const std::string where = "verdict";
  reject_unknown_keys(doc,
                      {"run_id", "passed", "criterion", "measured", "threshold", "stop_engaged",
                       "final_speed", "reason"},
                      where);
  EvidenceVerdict v;
  v.run_id = get_string(doc, "run_id", where, true);
  if (!doc.contains("passed")) throw ConfigError("verdict: missing 'passed'");
  v.passed = get_bool(doc, "passed", where, false);
  v.criterion = get_string(doc, "criterion", where, false);
  v.measured = get_number(doc, "measured", where, 0.0);
  v.threshold = get_number(doc, "threshold", where, 0.0);
  v.stop_engaged = get_bool(doc, "stop_engaged", where, false);
  v.final_speed = get_number(doc, "final_speed", where, 0.0);
  v.reason = get_string(doc, "reason", where, false);
  return v;
}

EvidenceVerdict read_verdict(const std::filesystem::path& path) {
  try {
    return parse_verdict_json(slurp(path, "verdict"));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<EvidenceVerdict> read_evidence_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw ConfigError("evidence directory '" + dir.string() + "' does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto file = entry.path() / "verdict.json";
    if (entry.is_directory() && std::filesystem::exists(file)) files.push_back(file);
  }
  std::sort(files.begin(), files.end());
  std::vector<EvidenceVerdict> out;
  for (const auto& f : files) out.push_back(read_verdict(f));
  return out;
}

// ---------------------------------------------------------------------------
// GSN

std::string to_string(GsnKind kind) {
  switch (kind) {
    case GsnKind::kGoal: return "goal";
    case GsnKind::kStrategy: return "strategy";
    case GsnKind::kSolution: return "solution";
    case GsnKind::kContext: return "context";
    case GsnKind::kAwayGoal: return "away_goal";
  }
  return "goal";
}

std::string to_string(GsnStatus status) {
  switch (status) {
    case GsnStatus::kUnsupported: return "unsupported";
    case GsnStatus::kUndeveloped: return "undeveloped";
    case GsnStatus::kSupported: return "supported";
  }
  return "undeveloped";
}

GsnKind parse_gsn_kind(std::string_view text) {
  if (text == "goal") return GsnKind::kGoal;
  if (text == "strategy") return GsnKind::kStrategy;
  if (text == "solution") return GsnKind::kSolution;
  if (text == "context") return GsnKind::kContext;
  if (text == "away_goal") return GsnKind::kAwayGoal;
  throw ConfigError("unknown GSN node kind '" + std::string(text) + "'");
}

const GsnNode* GsnGraph::find(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const GsnNode* GsnGraph::root() const {
  std::set<std::string, std::less<>> children;
  for (const auto& n : nodes) children.insert(n.children.begin(), n.children.end());
  for (const auto& n : nodes) {
    if (!children.count(n.id)) return &n;
  }
  return nullptr;
}

void GsnGraph::validate() const {
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id.empty()) throw ConfigError("GSN: node with an empty id");
    if (!index.emplace(nodes[i].id, i).second) {
      throw ConfigError("GSN: duplicate node id '" + nodes[i].id + "'");
    }
  }
  for (const auto& n : nodes) {
    const bool inner = n.kind == GsnKind::kGoal || n.kind == GsnKind::kStrategy;
    if (!inner && !n.children.empty()) {
      throw ConfigError("GSN: " + to_string(n.kind) + " '" + n.id + "' cannot have children");
    }
    if (n.kind != GsnKind::kSolution && !n.evidence_refs.empty()) {
      throw ConfigError("GSN: only solutions carry evidence ('" + n.id + "')");
    }
    if (n.kind != GsnKind::kAwayGoal && (!n.module_ref.empty() || n.asserted)) {
      throw ConfigError("GSN: only away goals name a module or are asserted ('" + n.id + "')");
    }
    for (const auto& c : n.children) {
      if (!index.count(c)) {
        throw ConfigError("GSN: '" + n.id + "' refers to unknown node '" + c + "'");
      }
    }
  }
  std::vector<int> mark(nodes.size(), 0);
  std::function<void(std::size_t)> visit = [&](std::size_t i) {
    if (mark[i] == 2) return;
    if (mark[i] == 1) throw ConfigError("GSN: cycle through node '" + nodes[i].id + "'");
    mark[i] = 1;
    for (const auto& c : nodes[i].children) visit(index.find(c)->second);
    mark[i] = 2;
  };
  for (std::size_t i = 0; i < nodes.size(); ++i) visit(i);
}

std::string evidence_run_id(const std::string& ref) {
  const std::filesystem::path p(ref);
  const std::string file = p.filename().string();
  if ((file == "results.csv" || file == "verdict.json") && p.has_parent_path()) {
    return p.parent_path().filename().string();
  }
  if (!p.has_parent_path()) return ref;
  return file;
}

GsnGraph link_evidence(const GsnGraph& graph, const std::vector<EvidenceVerdict>& verdicts) {
  graph.validate();
  std::map<std::string, const EvidenceVerdict*, std::less<>> by_id;
  for (const auto& v : verdicts) {
    if (!by_id.emplace(v.run_id, &v).second) {
      throw ConfigError("two verdicts share run id '" + v.run_id + "'");
    }
  }
  GsnGraph out = graph;
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < out.nodes.size(); ++i) index.emplace(out.nodes[i].id, i);

  std::function<GsnStatus(std::size_t)> status_of = [&](std::size_t i) -> GsnStatus {
    GsnNode& n = out.nodes[i];
    if (n.status) return *n.status;
    GsnStatus s = GsnStatus::kUndeveloped;
    switch (n.kind) {
      case GsnKind::kSolution: {
        if (!n.evidence_refs.empty()) s = GsnStatus::kSupported;
        for (const auto& ref : n.evidence_refs) {
          const auto it = by_id.find(evidence_run_id(ref));
          if (it == by_id.end()) {
            throw ConfigError("solution '" + n.id + "': no verdict for evidence '" + ref + "'");
          }
          if (!it->second->passed) s = GsnStatus::kUnsupported;
        }
        break;
      }
      case GsnKind::kAwayGoal:
        s = n.asserted ? GsnStatus::kSupported : GsnStatus::kUndeveloped;
        break;
      case GsnKind::kContext:
        return GsnStatus::kSupported;  // not part of the argument; never stored
      case GsnKind::kGoal:
      case GsnKind::kStrategy: {
        bool any = false;
        GsnStatus weakest = GsnStatus::kSupported;
        for (const auto& c : n.children) {
          const std::size_t ci = index.at(c);
          if (out.nodes[ci].kind == GsnKind::kContext) continue;
          any = true;
          weakest = std::min(weakest, status_of(ci));
        }
        s = any ? weakest : GsnStatus::kUndeveloped;
        break;
      }
    }
    out.nodes[i].status = s;
    return s;
  };
  for (std::size_t i = 0; i < out.nodes.size(); ++i) status_of(i);
  return out;
}

namespace {

std::string dot_quote(const std::string& text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += c;
    } else if (c == '\n') {
      out += "\\n";
    } else if (c != '\r') {
      out += c;
    }
  }
  return out + "\"";
}

constexpr std::string_view kDotPreamble = "// GSN argument rendered by fieldcosim\n";

}  // namespace

std::string render_gsn_dot(const GsnGraph& graph) {
  std::string out(kDotPreamble);
  if (graph.nodes.empty()) return out + "digraph gsn {}\n";
  out += "digraph gsn {\n";
  out += "  rankdir=TB;\n";
  out += "  node [fontname=\"Helvetica\", fontsize=10];\n";
  for (const auto& n : graph.nodes) {
    std::string label = n.id;
    if (!n.text.empty()) label += "\n" + n.text;
    std::string shape;
    std::vector<std::string> style;
    switch (n.kind) {
      case GsnKind::kGoal: shape = "box"; break;
      case GsnKind::kStrategy: shape = "parallelogram"; break;
      case GsnKind::kSolution: shape = "circle"; break;
      case GsnKind::kContext:
        shape = "box";
        style.push_back("rounded");
        break;
      case GsnKind::kAwayGoal:
        shape = "box";
        label += "\n[module: " + (n.module_ref.empty() ? std::string("?") : n.module_ref) + "]";
        break;
    }
    std::string attrs = "shape=" + shape;
    if (n.status == GsnStatus::kUnsupported) style.push_back("dashed");
    if (!style.empty()) {
      std::string joined;
      for (const auto& s : style) joined += (joined.empty() ? "" : ",") + s;
      attrs += ", style=" + dot_quote(joined);
    }
    if (n.status == GsnStatus::kUndeveloped) attrs += ", color=grey50, fontcolor=grey50";
    attrs += ", label=" + dot_quote(label);
    out += "  " + dot_quote(n.id) + " [" + attrs + "];\n";
  }
  for (const auto& n : graph.nodes) {
    for (const auto& c : n.children) {
      const auto* child = graph.find(c);
      out += "  " + dot_quote(n.id) + " -> " + dot_quote(c);
      if (child && child->kind == GsnKind::kContext) out += " [arrowhead=empty]";
      out += ";\n";
    }
  }
  out += "}\n";
  return out;
}

GsnGraph parse_gsn(std::string_view text) {
  const json doc = parse_document(text, "GSN document");
  reject_unknown_keys(doc, {"nodes", "description"}, "GSN document");
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) {
    throw ConfigError("GSN document: 'nodes' must be an array");
  }
  GsnGraph graph;
  for (const auto& node : doc["nodes"]) {
    if (!node.is_object()) throw ConfigError("GSN: every node must be an object");
    GsnNode n;
    n.id = get_string(node, "id", "GSN node", true);
    const std::string where = "GSN node '" + n.id + "'";
    reject_unknown_keys(
        node, {"id", "kind", "text", "children", "evidence_refs", "module", "asserted"}, where);
    n.kind = parse_gsn_kind(get_string(node, "kind", where, true));
    n.text = get_string(node, "text", where, false);
    n.children = get_string_list(node, "children", where);
    n.evidence_refs = get_string_list(node, "evidence_refs", where);
    n.module_ref = get_string(node, "module", where, false);
    n.asserted = get_bool(node, "asserted", where, false);
    graph.nodes.push_back(std::move(n));
  }
  graph.validate();
  return graph;
}

GsnGraph read_gsn(const std::filesystem::path& path) {
  return parse_gsn(slurp(path, "GSN document"));
}

// ---------------------------------------------------------------------------
// suite

namespace {

void validate_run_id(const std::string& id) {
  if (id.empty() || id == "." || id == ".." ||
      id.find_first_of("/\\") != std::string::npos) {
    throw ConfigError("safety scenario id '" + id + "' is not a valid directory name");
  }
}

void apply_scenario_fields(const json& node, SafetyScenario& s, const std::filesystem::path& base,
                           const std::string& where) {
  reject_unknown_keys(node,
                      {"id", "hazard", "speed", "min_range", "max_range", "fov", "ray_count",
                       "decel", "margin", "gap_threshold", "duration", "step_size", "map",
                       "obstacle_ahead", "multiModel", "description"},
                      where);
  if (node.contains("id")) s.run_id = get_string(node, "id", where, true);
  if (node.contains("hazard")) s.hazard = get_string(node, "hazard", where, true);
  s.speed = get_number(node, "speed", where, s.speed);
  s.sensor.min_range = get_number(node, "min_range", where, s.sensor.min_range);
  s.sensor.max_range = get_number(node, "max_range", where, s.sensor.max_range);
  s.sensor.fov = get_number(node, "fov", where, s.sensor.fov);
  const double rays = get_number(node, "ray_count", where, s.sensor.ray_count);
  if (rays != std::floor(rays) || rays < 1 || rays > 1e6) {
    throw ConfigError(where + ": 'ray_count' must be a positive integer");
  }
  s.sensor.ray_count = static_cast<int>(rays);
  s.decel = get_number(node, "decel", where, s.decel);
  s.margin = get_number(node, "margin", where, s.margin);
  s.gap_threshold = get_number(node, "gap_threshold", where, s.gap_threshold);
  s.duration = get_number(node, "duration", where, s.duration);
  s.step_size = get_number(node, "step_size", where, s.step_size);
  s.obstacle_ahead = get_number(node, "obstacle_ahead", where, s.obstacle_ahead);
  if (node.contains("map")) {
    const std::filesystem::path p(get_string(node, "map", where, true));
    s.map_file = p.is_absolute() || base.empty() ? p : base / p;
  }
  if (node.contains("multiModel")) {
    const std::filesystem::path p(get_string(node, "multiModel", where, true));
    s.multimodel = p.is_absolute() || base.empty() ? p : base / p;
  }
}

}  // namespace

SafetySuite parse_safety_suite(std::string_view text, const std::filesystem::path& base_dir) {
  const json doc = parse_document(text, "safety suite");
  reject_unknown_keys(doc, {"defaults", "scenarios", "description"}, "safety suite");
  SafetyScenario defaults;
  if (doc.contains("defaults")) {
    if (!doc["defaults"].is_object()) throw ConfigError("safety suite: 'defaults' must be an object");
    apply_scenario_fields(doc["defaults"], defaults, base_dir, "safety suite defaults");
  }
  if (!doc.contains("scenarios") || !doc["scenarios"].is_array()) {
    throw ConfigError("safety suite: 'scenarios' must be an array");
  }
  SafetySuite suite;
  std::set<std::string> ids;
  for (const auto& node : doc["scenarios"]) {
    if (!node.is_object()) throw ConfigError("safety suite: every scenario must be an object");
    SafetyScenario s = defaults;
    s.run_id.clear();
    const std::string where =
        "safety scenario '" + get_string(node, "id", "safety scenario", true) + "'";
    apply_scenario_fields(node, s, base_dir, where);
    validate_run_id(s.run_id);
    if (!ids.insert(s.run_id).second) {
      throw ConfigError("safety suite: duplicate scenario id '" + s.run_id + "'");
    }
    if (!(s.speed >= 0.0)) throw ConfigError(where + ": speed must be non-negative");
    if (!(s.duration > 0.0)) throw ConfigError(where + ": duration must be positive");
    if (!(s.step_size > 0.0)) throw ConfigError(where + ": step_size must be positive");
    try {
      s.sensor.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + ": " + e.what());
    }
    suite.scenarios.push_back(std::move(s));
  }
  return suite;
}

SafetySuite read_safety_suite(const std::filesystem::path& path) {
  return parse_safety_suite(slurp(path, "safety suite"), path.parent_path());
}

GridMap obstacle_course_map(double ahead) {
  // 24 m x 6 m at 5 cm, origin 2 m behind the start.
  GridMap map(480, 120, 0.05, -2.0, -3.0);
  map.fill_box(ahead, -0.25, ahead + 0.5, 0.25);
  return map;
}

std::vector<Waypoint> obstacle_course_path() { return {{0.0, 0.0}, {20.0, 0.0}}; }

MultiModelConfig harvester_multimodel(const SafetyScenario& s, const GridMap& map) {
  MultiModelConfig c;
  c.step_size = s.step_size;
  c.duration = s.duration;

  InstanceSpec controller{std::string(units::kPurePursuit),
                          {{"lookahead", 1.0}, {"cruise_speed", s.speed}, {"wheelbase", 1.2}},
                          {}};
  controller.resources.path = obstacle_course_path();
  c.instances["controller"] = std::move(controller);
  c.instances["supervisor"] =
      InstanceSpec{std::string(units::kSupervisory), {{"decel", s.decel}, {"margin", s.margin}}, {}};
  c.instances["vehicle"] = InstanceSpec{std::string(units::kVehicle), {}, {}};
  InstanceSpec sensor{std::string(units::kSensor),
                      {{"min_range", s.sensor.min_range},
                       {"max_range", s.sensor.max_range},
                       {"fov", s.sensor.fov},
                       {"ray_count", static_cast<double>(s.sensor.ray_count)}},
                      {}};
  sensor.resources.map = map;
  c.instances["sensor"] = std::move(sensor);
  InstanceSpec environment{std::string(units::kEnvironment), {}, {}};
  environment.resources.map = map;
  c.instances["environment"] = std::move(environment);

  auto link = [&](const char* from, const char* to) {
    c.connections.push_back({PortRef::parse(from), PortRef::parse(to)});
  };
  link("vehicle.x", "controller.x");
  link("vehicle.y", "controller.y");
  link("vehicle.theta", "controller.theta");
  link("vehicle.x", "sensor.x");
  link("vehicle.y", "sensor.y");
  link("vehicle.theta", "sensor.theta");
  link("vehicle.x", "environment.x");
  link("vehicle.y", "environment.y");
  link("controller.velocity", "supervisor.velocity_cmd");
  link("controller.delta_f", "vehicle.delta_f");
  link("sensor.obstacle_detected", "supervisor.obstacle_detected");
  link("sensor.obstacle_distance", "supervisor.obstacle_distance");
  link("supervisor.velocity", "vehicle.velocity");

  for (const char* out : {"vehicle.x", "vehicle.y", "vehicle.theta", "supervisor.velocity",
                          "supervisor.stop_engaged", "sensor.obstacle_distance",
                          "environment.gap"}) {
    c.outputs.push_back(PortRef::parse(out));
  }
  return c;
}

namespace {

constexpr const char* kCriterion = "min_gap > threshold; final_speed == 0 if stop_engaged";

std::string unique_instance(const MultiModelConfig& c, std::string_view type, bool required) {
  std::string found;
  for (const auto& [name, spec] : c.instances) {
    if (spec.unit_type != type) continue;
    if (!found.empty()) {
      throw ConfigError("safety multi-model has several '" + std::string(type) + "' instances");
    }
    found = name;
  }
  if (found.empty() && required) {
    throw ConfigError("safety multi-model has no '" + std::string(type) + "' instance");
  }
  return found;
}

struct PreparedRun {
  MultiModelConfig config;
  GridMap map;
  PortRef x, y, velocity, engaged;
};

PreparedRun prepare(const SafetyScenario& s) {
  PreparedRun run;
  run.map = s.map_file ? read_grid_map(*s.map_file) : obstacle_course_map(s.obstacle_ahead);
  if (!s.multimodel) {
    run.config = harvester_multimodel(s, run.map);
    run.x = {"vehicle", "x"};
    run.y = {"vehicle", "y"};
    run.velocity = {"supervisor", "velocity"};
    run.engaged = {"supervisor", "stop_engaged"};
    return run;
  }
  MultiModelConfig& c = run.config;
  c = read_multimodel_config(*s.multimodel);
  c.step_size = s.step_size;
  c.duration = s.duration;
  const std::string vehicle = unique_instance(c, units::kVehicle, true);
  const std::string controller = unique_instance(c, units::kPurePursuit, true);
  const std::string supervisor = unique_instance(c, units::kSupervisory, true);
  const std::string sensor = unique_instance(c, units::kSensor, true);
  const std::string environment = unique_instance(c, units::kEnvironment, false);

  c.instances[controller].parameters["cruise_speed"] = s.speed;
  c.instances[supervisor].parameters["decel"] = s.decel;
  c.instances[supervisor].parameters["margin"] = s.margin;
  auto& sp = c.instances[sensor].parameters;
  sp["min_range"] = s.sensor.min_range;
  sp["max_range"] = s.sensor.max_range;
  sp["fov"] = s.sensor.fov;
  sp["ray_count"] = s.sensor.ray_count;
  c.instances[sensor].resources.map = run.map;
  if (!environment.empty()) c.instances[environment].resources.map = run.map;
  if (c.instances[controller].resources.path.empty()) {
    c.instances[controller].resources.path = obstacle_course_path();
  }

  run.x = {vehicle, "x"};
  run.y = {vehicle, "y"};
  run.velocity = {supervisor, "velocity"};
  run.engaged = {supervisor, "stop_engaged"};
  for (const auto& p : {run.x, run.y, run.velocity, run.engaged}) {
    if (std::find(c.outputs.begin(), c.outputs.end(), p) == c.outputs.end()) c.outputs.push_back(p);
  }
  return run;
}

}  // namespace

SafetyRun run_safety_scenario(const SafetyScenario& s) {
  PreparedRun prepared = prepare(s);
  SafetyRun run;
  EvidenceVerdict& v = run.verdict;
  v.run_id = s.run_id;
  v.criterion = kCriterion;
  v.threshold = s.gap_threshold;
  try {
    run.trace = run_cosim(prepared.config);
  } catch (const SimulationError& e) {
    v.passed = false;
    v.reason = std::string("simulation failed: ") + e.what();
    return run;
  }

  const TimedTrace& t = run.trace;
  const auto xs = t.column(prepared.x.str());
  const auto ys = t.column(prepared.y.str());
  const auto speeds = t.column(prepared.velocity.str());
  const auto engaged = t.column(prepared.engaged.str());

  // A map without obstacles can never be hit; report the largest gap.
  double min_gap = std::numeric_limits<double>::max();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (const auto gap = prepared.map.distance_to_nearest_obstacle(xs[i], ys[i])) {
      min_gap = std::min(min_gap, *gap);
    }
  }
  v.measured = min_gap;
  v.stop_engaged = std::any_of(engaged.begin(), engaged.end(), [](double e) { return e != 0.0; });
  v.final_speed = speeds.back();

  const bool clear = v.measured > v.threshold;
  const bool stopped = !v.stop_engaged || v.final_speed == 0.0;
  v.passed = clear && stopped;
  if (!clear) {
    v.reason = "minimum gap " + format_short(v.measured) + " m is not above " +
               format_short(v.threshold) + " m";
  } else if (!stopped) {
    v.reason = "stop engaged but final speed is " + format_short(v.final_speed) + " m/s";
  }
  return run;
}

std::vector<EvidenceVerdict> run_safety_suite(const SafetySuite& suite,
                                              const SuiteOptions& options) {
  const std::size_t n = suite.scenarios.size();
  std::vector<EvidenceVerdict> verdicts(n);
  std::vector<std::exception_ptr> failures(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        SafetyRun run = run_safety_scenario(suite.scenarios[i]);
        if (options.evidence_dir) {
          const auto dir = *options.evidence_dir / run.verdict.run_id;
          std::filesystem::create_directories(dir);
          const auto csv = dir / "results.csv";
          if (run.trace.rows.empty()) {
            std::filesystem::remove(csv);
          } else {
            write_results_csv(run.trace, csv);
          }
          write_text(dir / "verdict.json", verdict_to_json(run.verdict));
        }
        verdicts[i] = std::move(run.verdict);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };

  const unsigned count = std::max(1u, options.workers);
  std::vector<std::thread> threads;
  for (unsigned i = 1; i < count; ++i) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  for (std::size_t i = 0; i < n; ++i) {
    if (!failures[i]) continue;
    const std::string context = "safety scenario '" + suite.scenarios[i].run_id + "': ";
    try {
      std::rethrow_exception(failures[i]);
    } catch (const ConfigError& e) {
      throw ConfigError(context + e.what());
    } catch (const std::exception& e) {
      throw SimulationError(context + e.what());
    }
  }
  return verdicts;
}

}  // namespace fieldcosim::safety
