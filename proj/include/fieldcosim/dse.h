#pragma once

// Design-space exploration: exhaustive sweep of a parameter grid over a set of
// recorded scenarios, scored by the mean cross-track distance between the
// recorded and simulated positions, then minimised over the summed score.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fieldcosim/orchestrator.h"
#include "fieldcosim/trace.h"
#include "fieldcosim/traces.h"

namespace fieldcosim::dse {

struct ParameterAxis {
  std::string name;  // port reference, e.g. "vehicle.cAlphaF"
  std::vector<double> values;
};

// Ordered: the axis order fixes the grid's lexicographic order.
struct ParameterSpace {
  std::vector<ParameterAxis> axes;

  std::size_t grid_size() const;
  std::vector<std::string> names() const;
  void validate() const;  // throws ConfigError
};

struct ParameterAssignment {
  std::vector<std::string> names;
  std::vector<double> values;

  double at(const std::string& name) const;
  std::string describe() const;  // "a=1, b=2"
  bool operator==(const ParameterAssignment&) const = default;
};

struct DseResultRow {
  std::string scenario;
  ParameterAssignment assignment;
  double mean_error = 0.0;
  double max_error = 0.0;

  bool operator==(const DseResultRow&) const = default;
};

struct CrossTrackError {
  double mean = 0.0;
  double max = 0.0;
};

// mean = sum_i |p_sim,i - p_ref,i| / n, max = max_i of the same distances.
// Throws std::invalid_argument when there are no pairs.
CrossTrackError cross_track_error(const AlignedPair& pair);

// Cartesian product, last axis varying fastest.
std::vector<ParameterAssignment> expand_grid(const ParameterSpace& space);

struct ScenarioFiles {
  std::filesystem::path inputs;     // steering inputs: time,velocity,delta_f
  std::filesystem::path reference;  // recorded positions: time,x,y
};

struct DseConfig {
  std::string algorithm = "exhaustive";
  std::string objective = "cross_track";
  ParameterSpace parameters;
  std::vector<std::string> scenarios;
  std::filesystem::path multimodel;
  std::map<std::string, ScenarioFiles> scenario_files;
  // Instance whose replayed trace is swapped per scenario; empty selects the
  // only replay instance of the multi-model.
  std::string input_instance;
  // Simulated position channels; empty selects "<vehicle>.x" / "<vehicle>.y"
  // of the only vehicle instance.
  std::string position_x;
  std::string position_y;

  // Keys that were accepted but have no effect (externalScripts,
  // parameterConstraints), and other non-fatal notes from parsing.
  std::vector<std::string> ignored_keys;
  std::vector<std::string> warnings;
};

// Accepts the INTO-CPS DSE document shape: numbers with a "k" suffix
// (x1000), trailing commas, brackets left open at end of input, and a
// "scenarios" list given as one comma-separated string.
DseConfig parse_dse_config(std::string_view text, const std::filesystem::path& base_dir = {});
DseConfig read_dse_config(const std::filesystem::path& path);

struct ScenarioData {
  std::string name;
  TimedTrace inputs;
  TimedTrace reference;
};

// Everything a sweep needs, resolved and loaded.
struct SweepPlan {
  MultiModelConfig multimodel;
  ParameterSpace parameters;
  std::vector<ScenarioData> scenarios;
  std::string input_instance;
  std::string position_x;
  std::string position_y;

  // Fills defaults for input_instance / position channels and checks that
  // every parameter names a declared instance. Throws ConfigError.
  void resolve();
};

SweepPlan load_sweep_plan(const DseConfig& config);

// Co-simulates one scenario under one assignment. The run lasts until the
// reference trace's final timestamp.
TimedTrace simulate_assignment(const SweepPlan& plan, const ScenarioData& scenario,
                               const ParameterAssignment& assignment);

DseResultRow evaluate_assignment(const SweepPlan& plan, const ScenarioData& scenario,
                                 const ParameterAssignment& assignment);

struct SweepOptions {
  unsigned workers = 1;
  // When set, each run writes <runs_dir>/<scenario>/<grid index>/results.csv
  // and objectives.json.
  std::optional<std::filesystem::path> runs_dir;
};

// Rows in scenario-major, grid order whatever the worker count. A failing run
// aborts the sweep with its scenario and assignment in the message.
std::vector<DseResultRow> run_sweep(const SweepPlan& plan, const SweepOptions& options);
std::vector<DseResultRow> run_sweep(const DseConfig& config, unsigned workers);

struct OptimizeResult {
  ParameterAssignment assignment;
  double total = 0.0;
};

// Minimises the per-assignment sum of mean_error over scenarios (summed in
// order of first appearance). Ties go to the earliest assignment in grid
// order: first appearance in `rows`, or expand_grid(space) when a space is
// given. Throws ConfigError if any scenario/assignment cell is missing or
// duplicated.
OptimizeResult optimize(const std::vector<DseResultRow>& rows);
OptimizeResult optimize(const std::vector<DseResultRow>& rows, const ParameterSpace& space);

// Rows not strictly dominated in (mean_error, max_error), sorted by
// mean_error, then max_error, then input order.
std::vector<DseResultRow> pareto_rank(const std::vector<DseResultRow>& rows);

// One row per assignment: summed mean_error and the largest max_error, under
// scenario name "total".
std::vector<DseResultRow> aggregate_by_assignment(const std::vector<DseResultRow>& rows);

void write_dse_results(const std::vector<DseResultRow>& rows, std::ostream& out);
void write_dse_results(const std::vector<DseResultRow>& rows, const std::filesystem::path& path);
std::vector<DseResultRow> read_dse_results(const std::filesystem::path& path);
std::vector<DseResultRow> parse_dse_results(std::istream& in,
                                            const std::string& source_name = "<stream>");

// {"cross_track_mean": ..., "cross_track_max": ...}
void write_objectives_json(const CrossTrackError& error, const std::filesystem::path& path);

}  // namespace fieldcosim::dse
