#pragma once

// Safety-case side of the toolkit: fault trees over basic events, GSN argument
// graphs whose solutions point at co-simulation evidence, and the suite runner
// that produces that evidence from closed-loop obstacle runs.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fieldcosim/grid_map.h"
#include "fieldcosim/orchestrator.h"
#include "fieldcosim/units.h"

namespace fieldcosim::safety {

// ---------------------------------------------------------------------------
// fault trees

enum class Gate { kBasic, kAnd, kOr };

std::string to_string(Gate gate);
Gate parse_gate(std::string_view text);  // throws ConfigError

struct FaultEvent {
  std::string id;
  std::string label;
  Gate gate = Gate::kBasic;
  std::vector<std::string> children;
  // Free-text hazard risk note (severity/likelihood); carried, never computed.
  std::string risk;
};

struct FaultTree {
  std::string top;
  std::vector<FaultEvent> events;

  const FaultEvent* find(std::string_view id) const;
  // Unique ids, known children, gates with children and basics without,
  // acyclic. Throws ConfigError.
  void validate() const;
  // Basic events reachable from the top, in declaration order.
  std::vector<std::string> basic_events() const;
};

inline constexpr std::size_t kMaxCutSetBasics = 20;

// Throws ConfigError when a reachable basic event has no state, a state names
// an unknown event, or the tree is invalid.
bool evaluate_fault_tree(const FaultTree& tree, const std::map<std::string, bool>& basic_states);

// Minimal cut sets ordered by size, then by declaration order of their
// events. Throws ConfigError beyond kMaxCutSetBasics reachable basic events.
std::vector<std::vector<std::string>> minimal_cut_sets(const FaultTree& tree);

// {"top": id, "events": [{"id", "label", "gate": "and"|"or"|"basic",
//  "children": [...], "risk": "..."}]}
FaultTree parse_fault_tree(std::string_view text);
FaultTree read_fault_tree(const std::filesystem::path& path);
std::string fault_tree_to_json(const FaultTree& tree);

// ---------------------------------------------------------------------------
// evidence

struct EvidenceVerdict {
  std::string run_id;
  bool passed = false;
  std::string criterion;
  double measured = 0.0;  // minimum vehicle-obstacle gap over the run, metres
  double threshold = 0.0;
  bool stop_engaged = false;
  double final_speed = 0.0;
  std::string reason;  // why a run failed; empty when it passed

  bool operator==(const EvidenceVerdict&) const = default;
};

std::string verdict_to_json(const EvidenceVerdict& verdict);
EvidenceVerdict parse_verdict_json(std::string_view text);
EvidenceVerdict read_verdict(const std::filesystem::path& path);
// Every <dir>/<run_id>/verdict.json, sorted by run id.
std::vector<EvidenceVerdict> read_evidence_dir(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// GSN

enum class GsnKind { kGoal, kStrategy, kSolution, kContext, kAwayGoal };
// Ordered weakest first so that a parent's status is the minimum of its
// children's.
enum class GsnStatus { kUnsupported, kUndeveloped, kSupported };

std::string to_string(GsnKind kind);
std::string to_string(GsnStatus status);
GsnKind parse_gsn_kind(std::string_view text);  // throws ConfigError

struct GsnNode {
  std::string id;
  GsnKind kind = GsnKind::kGoal;
  std::string text;
  std::vector<std::string> children;       // goals and strategies only
  std::vector<std::string> evidence_refs;  // solutions only
  std::string module_ref;                  // away goals only
  bool asserted = false;                   // away goals only
  std::optional<GsnStatus> status;         // filled by link_evidence
};

struct GsnGraph {
  std::vector<GsnNode> nodes;

  const GsnNode* find(std::string_view id) const;
  // First node that is nobody's child; nullptr for an empty graph.
  const GsnNode* root() const;
  // Unique ids, known children, leaves where required, acyclic. Throws
  // ConfigError.
  void validate() const;
};

// Resolves an evidence reference to a run id: the id itself, or a path such
// as "evidence/fog_v1/results.csv" naming the run's directory.
std::string evidence_run_id(const std::string& ref);

// Solutions are supported iff every linked verdict passed (undeveloped with no
// evidence); away goals are undeveloped unless asserted; goals and strategies
// take the weakest status among their non-context children. Throws
// ConfigError for a dangling evidence reference.
GsnGraph link_evidence(const GsnGraph& graph, const std::vector<EvidenceVerdict>& verdicts);

std::string render_gsn_dot(const GsnGraph& graph);

// {"nodes": [{"id", "kind", "text", "children", "evidence_refs", "module",
//  "asserted"}]}
GsnGraph parse_gsn(std::string_view text);
GsnGraph read_gsn(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// closed-loop obstacle runs

struct SafetyScenario {
  std::string run_id;
  std::string hazard;  // descriptive, e.g. "fog"
  double speed = 1.0;
  units::SensorParams sensor;
  double decel = 3.0;
  double margin = 0.2;
  double gap_threshold = 0.0;
  double duration = 20.0;
  double step_size = 0.01;
  // Either a map file or an obstacle block placed this far ahead of the
  // vehicle on the default straight course.
  std::optional<std::filesystem::path> map_file;
  double obstacle_ahead = 10.0;
  // Optional multi-model replacing the default closed loop. It must contain
  // exactly one vehicle, pure_pursuit, sensor and supervisory instance.
  std::optional<std::filesystem::path> multimodel;
};

struct SafetySuite {
  std::vector<SafetyScenario> scenarios;
};

// {"defaults": {...}, "scenarios": [{"id", "hazard", "speed", "min_range",
//  "max_range", "fov", "ray_count", "decel", "margin", "gap_threshold",
//  "duration", "step_size", "map", "obstacle_ahead", "multiModel"}]}
SafetySuite parse_safety_suite(std::string_view text, const std::filesystem::path& base_dir = {});
SafetySuite read_safety_suite(const std::filesystem::path& path);

// Straight 20 m course along +x from the origin with a 0.5 m x 0.5 m block
// whose near face is `ahead` metres in front of the vehicle.
GridMap obstacle_course_map(double ahead);
std::vector<Waypoint> obstacle_course_path();

// pure_pursuit -> supervisory -> vehicle, with sensor and environment reading
// the vehicle pose. Instances: controller, supervisor, vehicle, sensor,
// environment.
MultiModelConfig harvester_multimodel(const SafetyScenario& scenario, const GridMap& map);

struct SafetyRun {
  EvidenceVerdict verdict;
  TimedTrace trace;  // empty when the run failed
};

SafetyRun run_safety_scenario(const SafetyScenario& scenario);

struct SuiteOptions {
  unsigned workers = 1;
  // When set, writes <evidence_dir>/<run_id>/results.csv and verdict.json.
  std::optional<std::filesystem::path> evidence_dir;
};

// Verdicts in suite order regardless of the worker count. A run that fails to
// simulate yields a failed verdict carrying the error as its reason.
std::vector<EvidenceVerdict> run_safety_suite(const SafetySuite& suite, const SuiteOptions& options);

}  // namespace fieldcosim::safety
