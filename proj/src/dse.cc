#include "fieldcosim/dse.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "fieldcosim/errors.h"
#include "fieldcosim/numeric_format.h"
#include "fieldcosim/units.h"
#include "json.hpp"

namespace fieldcosim::dse {

using json = nlohmann::ordered_json;

std::size_t ParameterSpace::grid_size() const {
  if (axes.empty()) return 0;
  std::size_t size = 1;
  for (const auto& axis : axes) size *= axis.values.size();
  return size;
}

std::vector<std::string> ParameterSpace::names() const {
  std::vector<std::string> out;
  for (const auto& axis : axes) out.push_back(axis.name);
  return out;
}

void ParameterSpace::validate() const {
  if (axes.empty()) throw ConfigError("parameter space has no parameters");
  std::set<std::string> names;
  for (const auto& axis : axes) {
    if (axis.name.empty()) throw ConfigError("parameter with an empty name");
    if (!names.insert(axis.name).second) {
      throw ConfigError("parameter '" + axis.name + "' declared twice");
    }
    if (axis.values.empty()) throw ConfigError("parameter '" + axis.name + "' has no values");
    std::set<double> seen;
    for (double v : axis.values) {
      if (!std::isfinite(v)) throw ConfigError("parameter '" + axis.name + "' has a non-finite value");
      if (!seen.insert(v).second) {
        throw ConfigError("parameter '" + axis.name + "' lists " + format_short(v) + " twice");
      }
    }
  }
}

double ParameterAssignment::at(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values[i];
  }
  throw std::out_of_range("assignment has no parameter '" + name + "'");
}

std::string ParameterAssignment::describe() const {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    out += names[i] + "=" + format_short(values[i]);
  }
  return out;
}

CrossTrackError cross_track_error(const AlignedPair& pair) {
  if (pair.pairs.empty()) throw std::invalid_argument("cross-track error of an empty series");
  CrossTrackError out;
  double sum = 0.0;
  for (const auto& p : pair.pairs) {
    const double d = p.distance();
    sum += d;
    out.max = std::max(out.max, d);
  }
  out.mean = sum / static_cast<double>(pair.pairs.size());
  return out;
}

std::vector<ParameterAssignment> expand_grid(const ParameterSpace& space) {
  space.validate();
  std::vector<ParameterAssignment> out;
  out.reserve(space.grid_size());
  const auto names = space.names();
  std::vector<std::size_t> index(space.axes.size(), 0);
  while (true) {
    ParameterAssignment a;
    a.names = names;
    for (std::size_t i = 0; i < index.size(); ++i) a.values.push_back(space.axes[i].values[index[i]]);
    out.push_back(std::move(a));
    // Odometer increment, last axis fastest.
    std::size_t axis = index.size();
    while (axis > 0) {
      --axis;
      if (++index[axis] < space.axes[axis].values.size()) break;
      index[axis] = 0;
      if (axis == 0) return out;
    }
  }
}

// ---------------------------------------------------------------------------
// configuration document

namespace {

bool is_token_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.' ||
         c == '_';
}

// "24.5k" -> 24500; anything else is returned unchanged.
std::optional<std::string> expand_k_suffix(std::string_view token) {
  if (token.size() < 2) return std::nullopt;
  const char last = token.back();
  if (last != 'k' && last != 'K') return std::nullopt;
  const auto value = parse_real(token.substr(0, token.size() - 1));
  if (!value) return std::nullopt;
  return format_real(*value * 1000.0);
}

std::string relax_json(std::string_view text, std::vector<std::string>& warnings) {
  std::string out;
  out.reserve(text.size() + 8);
  std::vector<char> open;
  bool in_string = false;
  bool escape = false;
  std::size_t trailing_commas = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out += c;
      if (escape) {
        escape = false;
      } else if (c == '\\') {
        escape = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out += c;
    } else if (c == '{' || c == '[') {
      open.push_back(c);
      out += c;
    } else if (c == '}' || c == ']') {
      if (!open.empty()) open.pop_back();
      out += c;
    } else if (c == ',') {
      std::size_t j = i + 1;
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j == text.size() || text[j] == '}' || text[j] == ']') {
        ++trailing_commas;
      } else {
        out += c;
      }
    } else if (is_token_char(c)) {
      std::size_t j = i;
      while (j < text.size() && is_token_char(text[j])) ++j;
      const std::string_view token = text.substr(i, j - i);
      if (auto expanded = expand_k_suffix(token)) {
        out += *expanded;
      } else {
        out += token;
      }
      i = j - 1;
    } else {
      out += c;
    }
  }
  if (trailing_commas) {
    warnings.push_back("ignored " + std::to_string(trailing_commas) + " trailing comma(s)");
  }
  if (!in_string && !open.empty()) {
    warnings.push_back("closed " + std::to_string(open.size()) +
                       " bracket(s) left open at end of document");
    for (auto it = open.rbegin(); it != open.rend(); ++it) out += (*it == '{' ? '}' : ']');
  }
  return out;
}

// Top-level key first, otherwise the first match in a depth-first walk.
const json* find_key(const json& node, const std::string& key, bool* nested = nullptr) {
  if (!node.is_object()) return nullptr;
  if (node.contains(key)) return &node[key];
  for (const auto& [k, child] : node.items()) {
    if (const json* hit = find_key(child, key)) {
      if (nested) *nested = true;
      return hit;
    }
  }
  return nullptr;
}

const json* lookup(const json& doc, const std::string& key, DseConfig& config,
                   bool expect_nested = false) {
  bool nested = false;
  const json* hit = find_key(doc, key, &nested);
  if (hit && nested && !expect_nested) {
    config.warnings.push_back("key '" + key + "' found nested below the top level; using it");
  }
  return hit;
}

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& file) {
  std::filesystem::path p(file);
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::string string_field(const json& value, const std::string& what) {
  if (!value.is_string()) throw ConfigError(what + " must be a string");
  return value.get<std::string>();
}

}  // namespace

DseConfig parse_dse_config(std::string_view text, const std::filesystem::path& base_dir) {
  DseConfig config;
  const std::string relaxed = relax_json(text, config.warnings);
  json doc;
  try {
    doc = json::parse(relaxed);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("DSE configuration is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("DSE configuration must be a JSON object");

  if (const json* algorithm = lookup(doc, "algorithm", config)) {
    if (algorithm->is_string()) {
      config.algorithm = algorithm->get<std::string>();
    } else if (algorithm->is_object() && algorithm->contains("type")) {
      config.algorithm = string_field((*algorithm)["type"], "algorithm type");
    } else {
      throw ConfigError("'algorithm' must be a string or an object with 'type'");
    }
  }
  if (config.algorithm != "exhaustive") {
    throw ConfigError("unsupported algorithm '" + config.algorithm +
                      "' (only 'exhaustive' is implemented)");
  }

  if (const json* scripts = lookup(doc, "externalScripts", config, true)) {
    std::string names;
    if (scripts->is_object()) {
      for (const auto& [k, v] : scripts->items()) {
        if (v.is_object() && v.contains("scriptFile")) names += (names.empty() ? "" : ", ") + k;
      }
    }
    config.ignored_keys.push_back("externalScripts");
    config.warnings.push_back("external objective scripts are not run (" +
                              (names.empty() ? std::string("none named") : names) +
                              "); the built-in cross_track objective is used");
  }
  if (const json* constraints = lookup(doc, "parameterConstraints", config)) {
    config.ignored_keys.push_back("parameterConstraints");
    if (!constraints->is_array() || !constraints->empty()) {
      config.warnings.push_back("parameterConstraints are not applied");
    }
  }

  const json* parameters = lookup(doc, "parameters", config);
  if (!parameters || !parameters->is_object()) {
    throw ConfigError("DSE configuration needs a 'parameters' object");
  }
  for (const auto& [name, values] : parameters->items()) {
    if (!values.is_array()) throw ConfigError("parameter '" + name + "' must list its values");
    ParameterAxis axis{name, {}};
    for (const auto& v : values) {
      if (!v.is_number()) {
        throw ConfigError("parameter '" + name + "' has a malformed value '" + v.dump() + "'");
      }
      axis.values.push_back(v.get<double>());
    }
    config.parameters.axes.push_back(std::move(axis));
  }
  config.parameters.validate();

  if (const json* scenarios = lookup(doc, "scenarios", config)) {
    if (!scenarios->is_array()) throw ConfigError("'scenarios' must be an array of names");
    for (const auto& entry : *scenarios) {
      const std::string joined = string_field(entry, "scenario name");
      std::stringstream parts(joined);
      std::string part;
      while (std::getline(parts, part, ',')) {
        const std::string name(trim(part));
        if (!name.empty()) config.scenarios.push_back(name);
      }
    }
  }
  std::set<std::string> unique(config.scenarios.begin(), config.scenarios.end());
  if (unique.size() != config.scenarios.size()) throw ConfigError("scenario names must be unique");

  if (const json* objective = lookup(doc, "objective", config)) {
    if (!objective->is_object()) throw ConfigError("'objective' must be an object");
    if (objective->contains("type")) config.objective = string_field((*objective)["type"], "objective type");
    if (objective->contains("x")) config.position_x = string_field((*objective)["x"], "objective x");
    if (objective->contains("y")) config.position_y = string_field((*objective)["y"], "objective y");
  }
  if (config.objective != "cross_track") {
    throw ConfigError("unsupported objective '" + config.objective + "'");
  }
  if (const json* mm = lookup(doc, "multiModel", config)) {
    config.multimodel = resolve_path(base_dir, string_field(*mm, "multiModel"));
  }
  if (const json* input = lookup(doc, "inputInstance", config)) {
    config.input_instance = string_field(*input, "inputInstance");
  }

  std::filesystem::path scenario_dir = base_dir;
  if (const json* dir = lookup(doc, "scenarioDir", config)) {
    scenario_dir = resolve_path(base_dir, string_field(*dir, "scenarioDir"));
  }
  const json* files = lookup(doc, "scenarioFiles", config);
  if (files && !files->is_object()) throw ConfigError("'scenarioFiles' must be an object");
  for (const auto& name : config.scenarios) {
    ScenarioFiles entry{scenario_dir / ("steering_inputs_" + name + ".csv"),
                        scenario_dir / ("gps_position_" + name + ".csv")};
    if (files) {
      if (!files->contains(name)) {
        throw ConfigError("scenario '" + name + "' has no entry in 'scenarioFiles'");
      }
      const json& f = (*files)[name];
      if (!f.is_object() || !f.contains("inputs") || !f.contains("reference")) {
        throw ConfigError("scenarioFiles['" + name + "'] needs 'inputs' and 'reference'");
      }
      entry.inputs = resolve_path(base_dir, string_field(f["inputs"], "inputs"));
      entry.reference = resolve_path(base_dir, string_field(f["reference"], "reference"));
    }
    config.scenario_files[name] = entry;
  }
  return config;
}

DseConfig read_dse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open DSE configuration '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_dse_config(buffer.str(), path.parent_path());
}

// ---------------------------------------------------------------------------
// sweep

void SweepPlan::resolve() {
  parameters.validate();
  const auto& registry = units::builtin_registry();

  auto unique_instance_of = [&](std::string_view type) -> std::string {
    std::string found;
    for (const auto& [name, spec] : multimodel.instances) {
      if (spec.unit_type != type) continue;
      if (!found.empty()) {
        throw ConfigError("multi-model has several '" + std::string(type) +
                          "' instances; name one explicitly");
      }
      found = name;
    }
    if (found.empty()) {
      throw ConfigError("multi-model has no '" + std::string(type) + "' instance");
    }
    return found;
  };

  if (input_instance.empty()) input_instance = unique_instance_of(units::kReplay);
  const auto input_it = multimodel.instances.find(input_instance);
  if (input_it == multimodel.instances.end()) {
    throw ConfigError("input instance '" + input_instance + "' is not declared");
  }
  if (input_it->second.unit_type != units::kReplay) {
    throw ConfigError("input instance '" + input_instance + "' is not a replay unit");
  }
  if (position_x.empty() || position_y.empty()) {
    const std::string vehicle = unique_instance_of(units::kVehicle);
    if (position_x.empty()) position_x = vehicle + ".x";
    if (position_y.empty()) position_y = vehicle + ".y";
  }
  for (const auto& channel : {position_x, position_y}) {
    const PortRef ref = PortRef::parse(channel);
    if (std::find(multimodel.outputs.begin(), multimodel.outputs.end(), ref) ==
        multimodel.outputs.end()) {
      multimodel.outputs.push_back(ref);
    }
  }

  for (const auto& axis : parameters.axes) {
    const PortRef ref = PortRef::parse(axis.name);
    const auto it = multimodel.instances.find(ref.instance);
    if (it == multimodel.instances.end()) {
      throw ConfigError("parameter '" + axis.name + "' names undeclared instance '" +
                        ref.instance + "'");
    }
    const auto* entry = registry.find(it->second.unit_type);
    if (!entry) continue;  // reported by validate_config when the run starts
    const auto port = entry->description->find_port(ref.port);
    if (!port || entry->description->ports[*port].direction != PortDirection::kParameter) {
      throw ConfigError("parameter '" + axis.name + "' is not a parameter of unit type '" +
                        it->second.unit_type + "'");
    }
  }

  for (const auto& scenario : scenarios) {
    if (scenario.reference.empty()) {
      throw ConfigError("scenario '" + scenario.name + "' has an empty reference trace");
    }
    try {
      find_position_channel(scenario.reference, "x");
      find_position_channel(scenario.reference, "y");
    } catch (const std::invalid_argument& e) {
      throw ConfigError("scenario '" + scenario.name + "' reference: " + e.what());
    }
  }
}

SweepPlan load_sweep_plan(const DseConfig& config) {
  if (config.multimodel.empty()) {
    throw ConfigError("DSE configuration does not name a multi-model ('multiModel')");
  }
  if (config.scenarios.empty()) throw ConfigError("DSE configuration lists no scenarios");
  SweepPlan plan;
  plan.multimodel = read_multimodel_config(config.multimodel);
  plan.parameters = config.parameters;
  plan.input_instance = config.input_instance;
  plan.position_x = config.position_x;
  plan.position_y = config.position_y;
  for (const auto& name : config.scenarios) {
    const auto& files = config.scenario_files.at(name);
    ScenarioData data;
    data.name = name;
    data.inputs = read_trace_csv(files.inputs, {"velocity", "delta_f"});
    data.reference = read_trace_csv(files.reference);
    plan.scenarios.push_back(std::move(data));
  }
  plan.resolve();
  return plan;
}

TimedTrace simulate_assignment(const SweepPlan& plan, const ScenarioData& scenario,
                               const ParameterAssignment& assignment) {
  MultiModelConfig config = plan.multimodel;
  config.instances.at(plan.input_instance).resources.trace = scenario.inputs;
  for (std::size_t i = 0; i < assignment.names.size(); ++i) {
    const PortRef ref = PortRef::parse(assignment.names[i]);
    config.instances.at(ref.instance).parameters[ref.port] = assignment.values[i];
  }
  config.duration = scenario.reference.rows.back().time;
  return run_cosim(config);
}

namespace {

CrossTrackError score(const SweepPlan& plan, const ScenarioData& scenario,
                      const TimedTrace& simulated) {
  const AlignedPair pair =
      align(scenario.reference, find_position_channel(scenario.reference, "x"),
            find_position_channel(scenario.reference, "y"), simulated, plan.position_x,
            plan.position_y);
  return cross_track_error(pair);
}

}  // namespace

DseResultRow evaluate_assignment(const SweepPlan& plan, const ScenarioData& scenario,
                                 const ParameterAssignment& assignment) {
  const TimedTrace simulated = simulate_assignment(plan, scenario, assignment);
  const CrossTrackError error = score(plan, scenario, simulated);
  return {scenario.name, assignment, error.mean, error.max};
}

std::vector<DseResultRow> run_sweep(const SweepPlan& plan, const SweepOptions& options) {
  const auto grid = expand_grid(plan.parameters);
  const std::size_t jobs = grid.size() * plan.scenarios.size();
  std::vector<DseResultRow> rows(jobs);
  std::vector<std::exception_ptr> failures(jobs);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t job = next.fetch_add(1);
      if (job >= jobs) return;
      const auto& scenario = plan.scenarios[job / grid.size()];
      const std::size_t grid_index = job % grid.size();
      try {
        const TimedTrace simulated = simulate_assignment(plan, scenario, grid[grid_index]);
        const CrossTrackError error = score(plan, scenario, simulated);
        rows[job] = {scenario.name, grid[grid_index], error.mean, error.max};
        if (options.runs_dir) {
          const auto dir = *options.runs_dir / scenario.name / std::to_string(grid_index);
          std::filesystem::create_directories(dir);
          write_results_csv(simulated, dir / "results.csv");
          write_objectives_json(error, dir / "objectives.json");
        }
      } catch (...) {
        failures[job] = std::current_exception();
        abort.store(true);
      }
    }
  };

  const unsigned count = std::max(1u, options.workers);
  std::vector<std::thread> threads;
  for (unsigned i = 1; i < count; ++i) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  for (std::size_t job = 0; job < jobs; ++job) {
    if (!failures[job]) continue;
    const std::string context = "scenario '" + plan.scenarios[job / grid.size()].name +
                                "', assignment {" + grid[job % grid.size()].describe() + "}: ";
    try {
      std::rethrow_exception(failures[job]);
    } catch (const ConfigError& e) {
      throw ConfigError(context + e.what());
    } catch (const std::exception& e) {
      throw SimulationError(context + e.what());
    }
  }
  return rows;
}

std::vector<DseResultRow> run_sweep(const DseConfig& config, unsigned workers) {
  return run_sweep(load_sweep_plan(config), SweepOptions{workers, std::nullopt});
}

// ---------------------------------------------------------------------------
// optimisation and ranking

namespace {

OptimizeResult optimize_over(const std::vector<DseResultRow>& rows,
                             const std::vector<ParameterAssignment>& order) {
  if (rows.empty()) throw ConfigError("no result rows to optimise");
  std::vector<std::string> scenarios;
  std::map<std::string, std::size_t> scenario_index;
  for (const auto& row : rows) {
    if (scenario_index.emplace(row.scenario, scenarios.size()).second) {
      scenarios.push_back(row.scenario);
    }
  }
  std::map<std::vector<double>, std::size_t> assignment_index;
  for (std::size_t i = 0; i < order.size(); ++i) assignment_index.emplace(order[i].values, i);

  const double kMissing = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> table(order.size(),
                                         std::vector<double>(scenarios.size(), kMissing));
  for (const auto& row : rows) {
    const auto it = assignment_index.find(row.assignment.values);
    if (it == assignment_index.end() || row.assignment.names != order[it->second].names) {
      throw ConfigError("row for scenario '" + row.scenario + "' has assignment {" +
                        row.assignment.describe() + "} outside the parameter grid");
    }
    double& cell = table[it->second][scenario_index[row.scenario]];
    if (!std::isnan(cell)) {
      throw ConfigError("duplicate row for scenario '" + row.scenario + "', assignment {" +
                        row.assignment.describe() + "}");
    }
    cell = row.mean_error;
  }

  std::optional<std::size_t> best;
  double best_total = 0.0;
  for (std::size_t a = 0; a < order.size(); ++a) {
    double total = 0.0;
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      if (std::isnan(table[a][s])) {
        throw ConfigError("incomplete grid: scenario '" + scenarios[s] +
                          "' has no row for assignment {" + order[a].describe() + "}");
      }
      total += table[a][s];
    }
    if (!best || total < best_total) {
      best = a;
      best_total = total;
    }
  }

  double check = 0.0;
  for (double v : table[*best]) check += v;
  if (check != best_total) throw std::logic_error("optimize: total does not recompute");
  return {order[*best], best_total};
}

}  // namespace

OptimizeResult optimize(const std::vector<DseResultRow>& rows) {
  std::vector<ParameterAssignment> order;
  std::set<std::vector<double>> seen;
  for (const auto& row : rows) {
    if (seen.insert(row.assignment.values).second) order.push_back(row.assignment);
  }
  return optimize_over(rows, order);
}

OptimizeResult optimize(const std::vector<DseResultRow>& rows, const ParameterSpace& space) {
  return optimize_over(rows, expand_grid(space));
}

std::vector<DseResultRow> pareto_rank(const std::vector<DseResultRow>& rows) {
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a].mean_error != rows[b].mean_error) return rows[a].mean_error < rows[b].mean_error;
    return rows[a].max_error < rows[b].max_error;
  });

  // Within a group of equal mean_error only the group's smallest max_error
  // survives; across groups a row survives only if its max_error beats every
  // row with a strictly smaller mean_error.
  std::vector<DseResultRow> front;
  double best_max_before = std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    const double mean = rows[order[i]].mean_error;
    while (j < order.size() && rows[order[j]].mean_error == mean) ++j;
    const double group_min = rows[order[i]].max_error;
    for (std::size_t k = i; k < j; ++k) {
      const auto& row = rows[order[k]];
      if (row.max_error == group_min && best_max_before > row.max_error) front.push_back(row);
    }
    best_max_before = std::min(best_max_before, group_min);
    i = j;
  }
  return front;
}

std::vector<DseResultRow> aggregate_by_assignment(const std::vector<DseResultRow>& rows) {
  std::vector<DseResultRow> out;
  std::map<std::vector<double>, std::size_t> index;
  for (const auto& row : rows) {
    const auto [it, inserted] = index.emplace(row.assignment.values, out.size());
    if (inserted) {
      out.push_back({"total", row.assignment, row.mean_error, row.max_error});
    } else {
      auto& agg = out[it->second];
      agg.mean_error += row.mean_error;
      agg.max_error = std::max(agg.max_error, row.max_error);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// files

void write_dse_results(const std::vector<DseResultRow>& rows, std::ostream& out) {
  std::vector<std::string> names;
  if (!rows.empty()) names = rows.front().assignment.names;
  std::string text = "scenario";
  for (const auto& n : names) text += "," + n;
  text += ",mean_cross_track_error,max_cross_track_error\n";
  for (const auto& row : rows) {
    if (row.assignment.names != names) {
      throw std::invalid_argument("result rows disagree on parameter names");
    }
    text += row.scenario;
    for (double v : row.assignment.values) text += "," + format_real(v);
    text += "," + format_real(row.mean_error) + "," + format_real(row.max_error) + "\n";
  }
  out << text;
}

void write_dse_results(const std::vector<DseResultRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  write_dse_results(rows, out);
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

std::vector<DseResultRow> parse_dse_results(std::istream& in, const std::string& source_name) {
  auto fail = [&](std::size_t line, const std::string& what) {
    return ConfigError(source_name + ":" + std::to_string(line) + ": " + what);
  };
  std::string line;
  if (!std::getline(in, line)) throw fail(1, "missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) header.emplace_back(trim(field));
  }
  if (header.size() < 3 || header.front() != "scenario" ||
      header[header.size() - 2] != "mean_cross_track_error" ||
      header.back() != "max_cross_track_error") {
    throw fail(1,
               "header must be 'scenario,<parameters...>,mean_cross_track_error,"
               "max_cross_track_error'");
  }
  const std::vector<std::string> names(header.begin() + 1, header.end() - 2);

  std::vector<DseResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != header.size()) {
      throw fail(line_no, "expected " + std::to_string(header.size()) + " fields");
    }
    DseResultRow row;
    row.scenario = std::string(trim(fields[0]));
    if (row.scenario.empty()) throw fail(line_no, "empty scenario name");
    row.assignment.names = names;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto v = parse_real(fields[i]);
      if (!v || !std::isfinite(*v)) throw fail(line_no, "cannot parse number '" + fields[i] + "'");
      if (i <= names.size()) {
        row.assignment.values.push_back(*v);
      } else if (i == names.size() + 1) {
        row.mean_error = *v;
      } else {
        row.max_error = *v;
      }
    }
    if (row.mean_error < 0.0 || row.max_error < 0.0) throw fail(line_no, "negative error value");
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<DseResultRow> read_dse_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open results '" + path.string() + "'");
  return parse_dse_results(in, path.string());
}

void write_objectives_json(const CrossTrackError& error, const std::filesystem::path& path) {
  json doc;
  doc["cross_track_mean"] = error.mean;
  doc["cross_track_max"] = error.max;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

}  // namespace fieldcosim::dse
