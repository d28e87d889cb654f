#include "fieldcosim/cli.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "fieldcosim/dse.h"
#include "fieldcosim/errors.h"
#include "fieldcosim/numeric_format.h"
#include "fieldcosim/orchestrator.h"
#include "fieldcosim/safety.h"
#include "fieldcosim/traces.h"
#include "fieldcosim/units.h"
#include "json.hpp"

namespace fieldcosim {
namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------

struct CosimArgs {
  std::string config, inputs, out, input_instance;
  double step = 0.0, duration = 0.0;
};

int cmd_cosim(const CosimArgs& a, std::ostream& out) {
  MultiModelConfig config = read_multimodel_config(a.config);
  if (a.step > 0.0) config.step_size = a.step;
  if (a.duration > 0.0) config.duration = a.duration;
  if (!a.inputs.empty()) {
    std::string target = a.input_instance;
    if (target.empty()) {
      for (const auto& [name, spec] : config.instances) {
        if (spec.unit_type != units::kReplay) continue;
        if (!target.empty()) {
          throw ConfigError("several replay instances; choose one with --input-instance");
        }
        target = name;
      }
      if (target.empty()) throw ConfigError("--scenario-inputs given but no replay instance");
    }
    const auto it = config.instances.find(target);
    if (it == config.instances.end()) throw ConfigError("no instance named '" + target + "'");
    TimedTrace inputs = read_trace_csv(a.inputs, {"velocity", "delta_f"});
    if (config.duration <= 0.0 && !inputs.rows.empty()) config.duration = inputs.rows.back().time;
    it->second.resources.trace = std::move(inputs);
  }
  const auto start = Clock::now();
  const TimedTrace trace = run_cosim(config);
  write_results_csv(trace, a.out);
  out << "rows: " << trace.rows.size() << "\n";
  out << "wall time: " << fixed(seconds_since(start), 3) << " s\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct DseArgs {
  std::string config, results, out, format = "text", scenario, runs_dir;
  unsigned jobs = 1;
  bool aggregate = false;
};

int cmd_dse_sweep(const DseArgs& a, std::ostream& out, std::ostream& err) {
  const dse::DseConfig config = dse::read_dse_config(a.config);
  for (const auto& w : config.warnings) err << "warning: " << w << "\n";
  const auto plan = dse::load_sweep_plan(config);
  dse::SweepOptions options;
  options.workers = a.jobs;
  if (!a.runs_dir.empty()) options.runs_dir = a.runs_dir;
  const auto start = Clock::now();
  const auto rows = dse::run_sweep(plan, options);
  dse::write_dse_results(rows, std::filesystem::path(a.out));
  out << "rows: " << rows.size() << " (" << plan.scenarios.size() << " scenarios x "
      << plan.parameters.grid_size() << " assignments)\n";
  out << "wall time: " << fixed(seconds_since(start), 3) << " s\n";
  return kExitOk;
}

json assignment_json(const dse::ParameterAssignment& a) {
  json p = json::object();
  for (std::size_t i = 0; i < a.names.size(); ++i) p[a.names[i]] = a.values[i];
  return p;
}

int cmd_dse_optimize(const DseArgs& a, std::ostream& out) {
  const auto rows = dse::read_dse_results(a.results);
  const auto best = dse::optimize(rows);
  json doc;
  doc["parameters"] = assignment_json(best.assignment);
  doc["total_mean_cross_track_error"] = best.total;
  const std::string text = doc.dump(2) + "\n";
  if (!a.out.empty()) write_file(a.out, text);
  if (a.format == "json") {
    out << text;
  } else {
    out << "best: " << best.assignment.describe() << "\n";
    out << "total mean cross-track error: " << format_short(best.total) << "\n";
  }
  return kExitOk;
}

int cmd_dse_rank(const DseArgs& a, std::ostream& out) {
  auto rows = dse::read_dse_results(a.results);
  if (!a.scenario.empty()) {
    std::erase_if(rows, [&](const auto& r) { return r.scenario != a.scenario; });
    if (rows.empty()) throw ConfigError("no rows for scenario '" + a.scenario + "'");
  }
  if (a.aggregate) rows = dse::aggregate_by_assignment(rows);
  if (rows.empty()) throw ConfigError("results file has no rows");
  const auto front = dse::pareto_rank(rows);
  if (!a.out.empty()) dse::write_dse_results(front, std::filesystem::path(a.out));
  if (a.format == "json") {
    json doc = json::array();
    for (const auto& r : front) {
      json row;
      row["scenario"] = r.scenario;
      row["parameters"] = assignment_json(r.assignment);
      row["mean_cross_track_error"] = r.mean_error;
      row["max_cross_track_error"] = r.max_error;
      doc.push_back(std::move(row));
    }
    out << doc.dump(2) << "\n";
  } else {
    out << "front: " << front.size() << " of " << rows.size() << " rows\n";
    for (const auto& r : front) {
      out << "  " << r.scenario << "  " << r.assignment.describe()
          << "  mean=" << format_short(r.mean_error) << " max=" << format_short(r.max_error) << "\n";
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ScenarioArgs {
  std::string kind, name, out;
  double duration = 20.0, base_speed = 1.0, amplitude = 0.0, sample_period = 0.1;
};

int cmd_scenario_gen(const ScenarioArgs& a, std::ostream& out) {
  ScenarioSpec spec;
  spec.kind = parse_scenario_kind(a.kind);
  spec.name = a.name.empty() ? a.kind : a.name;
  spec.duration = a.duration;
  spec.base_speed = a.base_speed;
  spec.amplitude = a.amplitude;
  spec.sample_period = a.sample_period;
  const TimedTrace trace = generate_scenario(spec);
  write_results_csv(trace, a.out);
  out << spec.name << ": " << trace.rows.size() << " rows\n";
  return kExitOk;
}

struct SafetyArgs {
  std::string suite, evidence_dir;
  unsigned jobs = 1;
};

int cmd_safety_run(const SafetyArgs& a, std::ostream& out) {
  const auto suite = safety::read_safety_suite(a.suite);
  safety::SuiteOptions options;
  options.workers = a.jobs;
  options.evidence_dir = a.evidence_dir;
  const auto verdicts = safety::run_safety_suite(suite, options);
  std::size_t passed = 0;
  for (const auto& v : verdicts) {
    passed += v.passed;
    out << (v.passed ? "PASS " : "FAIL ") << v.run_id << "  min_gap=" << fixed(v.measured, 3)
        << " stop_engaged=" << (v.stop_engaged ? "true" : "false");
    if (!v.reason.empty()) out << "  (" << v.reason << ")";
    out << "\n";
  }
  out << passed << "/" << verdicts.size() << " runs passed\n";
  return kExitOk;
}

struct GsnArgs {
  std::string gsn, evidence_dir, out;
};

int cmd_gsn(const GsnArgs& a, std::ostream& out) {
  const auto graph = safety::read_gsn(a.gsn);
  std::vector<safety::EvidenceVerdict> verdicts;
  if (!a.evidence_dir.empty()) verdicts = safety::read_evidence_dir(a.evidence_dir);
  const auto linked = safety::link_evidence(graph, verdicts);
  const std::string dot = safety::render_gsn_dot(linked);
  if (!a.out.empty()) write_file(a.out, dot);
  const auto* root = linked.root();
  out << (root && root->status ? safety::to_string(*root->status) : std::string("undeveloped"))
      << "\n";
  return kExitOk;
}

struct FtArgs {
  std::string tree, events;
  bool cut_sets = false;
};

std::map<std::string, bool> parse_event_states(const std::string& spec) {
  std::map<std::string, bool> states;
  std::error_code ec;
  if (std::filesystem::is_regular_file(spec, ec)) {
    std::ifstream in(spec, std::ios::binary);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("event states '" + spec + "' are not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("event states must be a JSON object of booleans");
    for (const auto& [k, v] : doc.items()) {
      if (!v.is_boolean()) throw ConfigError("event '" + k + "' must be true or false");
      states[k] = v.get<bool>();
    }
    return states;
  }
  std::stringstream parts(spec);
  std::string item;
  while (std::getline(parts, item, ',')) {
    if (trim(item).empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("expected id=true|false, got '" + item + "'");
    const std::string id(trim(std::string_view(item).substr(0, eq)));
    const std::string value(trim(std::string_view(item).substr(eq + 1)));
    if (value == "true" || value == "1") {
      states[id] = true;
    } else if (value == "false" || value == "0") {
      states[id] = false;
    } else {
      throw ConfigError("event '" + id + "': '" + value + "' is not true or false");
    }
  }
  return states;
}

int cmd_ft(const FtArgs& a, std::ostream& out) {
  const auto tree = safety::read_fault_tree(a.tree);
  if (!a.events.empty()) {
    const bool top = safety::evaluate_fault_tree(tree, parse_event_states(a.events));
    out << "TOP: " << (top ? "true" : "false") << "\n";
  }
  if (a.cut_sets) {
    for (const auto& set : safety::minimal_cut_sets(tree)) {
      out << "{";
      for (std::size_t i = 0; i < set.size(); ++i) out << (i ? ", " : "") << set[i];
      out << "}\n";
    }
  }
  if (a.events.empty() && !a.cut_sets) throw ConfigError("ft: give --events and/or --cut-sets");
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Co-simulation, parameter sweeps and safety evidence for field vehicles",
               "fieldcosim"};
  app.require_subcommand(1);

  CosimArgs cosim;
  auto* c = app.add_subcommand("cosim", "Run one co-simulation and write its results CSV");
  c->add_option("--config", cosim.config, "Multi-model JSON")->required();
  c->add_option("--scenario-inputs", cosim.inputs, "Steering inputs CSV (time,velocity,delta_f)");
  c->add_option("--input-instance", cosim.input_instance, "Replay instance fed by the inputs");
  c->add_option("--out", cosim.out, "Results CSV")->required();
  c->add_option("--step", cosim.step, "Step size override (s)")->check(CLI::PositiveNumber);
  c->add_option("--duration", cosim.duration, "Duration override (s)")->check(CLI::PositiveNumber);

  DseArgs dse_args;
  auto* d = app.add_subcommand("dse", "Design-space exploration");
  d->require_subcommand(1);
  auto* sweep = d->add_subcommand("sweep", "Exhaustive sweep over the parameter grid");
  sweep->add_option("--config", dse_args.config, "DSE configuration")->required();
  sweep->add_option("--out", dse_args.out, "dse_results.csv")->required();
  sweep->add_option("--jobs", dse_args.jobs, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--runs-dir", dse_args.runs_dir, "Write per-run results and objectives here");
  auto* opt = d->add_subcommand("optimize", "Minimise the summed mean cross-track error");
  opt->add_option("--results", dse_args.results, "dse_results.csv")->required();
  opt->add_option("--out", dse_args.out, "Best-assignment JSON");
  opt->add_option("--format", dse_args.format, "Summary format")
      ->check(CLI::IsMember({"text", "json"}));
  auto* rank = d->add_subcommand("rank", "Pareto front over (mean, max) cross-track error");
  rank->add_option("--results", dse_args.results, "dse_results.csv")->required();
  rank->add_option("--out", dse_args.out, "Front CSV");
  rank->add_option("--scenario", dse_args.scenario, "Rank one scenario's rows only");
  rank->add_flag("--aggregate", dse_args.aggregate, "Sum over scenarios per assignment first");
  rank->add_option("--format", dse_args.format, "Summary format")
      ->check(CLI::IsMember({"text", "json"}));

  ScenarioArgs scen;
  auto* g = app.add_subcommand("scenario-gen", "Generate a synthetic steering-input scenario");
  g->add_option("--kind", scen.kind, "sin, turn_ramp, speed_ramp or speed_step")->required();
  g->add_option("--name", scen.name, "Scenario name");
  g->add_option("--duration", scen.duration, "Seconds");
  g->add_option("--base-speed", scen.base_speed, "m/s");
  g->add_option("--amplitude", scen.amplitude, "Steering amplitude (rad)");
  g->add_option("--sample-period", scen.sample_period, "Seconds between rows");
  g->add_option("--out", scen.out, "Output CSV")->required();

  SafetyArgs saf;
  auto* s = app.add_subcommand("safety-run", "Run the closed-loop obstacle suite");
  s->add_option("--suite", saf.suite, "Suite JSON")->required();
  s->add_option("--evidence-dir", saf.evidence_dir, "Evidence output directory")->required();
  s->add_option("--jobs", saf.jobs, "Worker threads")->check(CLI::PositiveNumber);

  GsnArgs gsn;
  auto* n = app.add_subcommand("gsn", "Link evidence into a GSN graph and render DOT");
  n->add_option("--gsn", gsn.gsn, "GSN JSON")->required();
  n->add_option("--evidence-dir", gsn.evidence_dir, "Directory of <run_id>/verdict.json");
  n->add_option("--out", gsn.out, "DOT output");

  FtArgs ft;
  auto* f = app.add_subcommand("ft", "Evaluate a fault tree");
  f->add_option("--tree", ft.tree, "Fault tree JSON")->required();
  f->add_option("--events", ft.events, "Basic event states: JSON file or a=true,b=false");
  f->add_flag("--cut-sets", ft.cut_sets, "Print minimal cut sets");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (c->parsed()) return cmd_cosim(cosim, out);
    if (sweep->parsed()) return cmd_dse_sweep(dse_args, out, err);
    if (opt->parsed()) return cmd_dse_optimize(dse_args, out);
    if (rank->parsed()) return cmd_dse_rank(dse_args, out);
    if (g->parsed()) return cmd_scenario_gen(scen, out);
    if (s->parsed()) return cmd_safety_run(saf, out);
    if (n->parsed()) return cmd_gsn(gsn, out);
    if (f->parsed()) return cmd_ft(ft, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SimulationError& e) {
    err << "simulation failed: " << e.what() << "\n";
    return kExitSimulation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSimulation;
  }
  return kExitConfig;
}

}  // namespace fieldcosim
