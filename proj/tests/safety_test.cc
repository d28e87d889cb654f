#include <gtest/gtest.h>

#include "fieldcosim/errors.h"
#include "fieldcosim/safety.h"
#include "test_support.h"

namespace fieldcosim::safety {
namespace {

FaultEvent basic(std::string id) { return {std::move(id), "", Gate::kBasic, {}, ""}; }
FaultEvent gate(std::string id, Gate g, std::vector<std::string> children) {
  return {std::move(id), "", g, std::move(children), ""};
}

FaultTree fog_or_rain() {
  return {"H1", {gate("H1", Gate::kOr, {"fog", "rain"}), basic("fog"), basic("rain")}};
}

TEST(FaultTree, OrGate) {
  const auto t = fog_or_rain();
  EXPECT_FALSE(evaluate_fault_tree(t, {{"fog", false}, {"rain", false}}));
  EXPECT_TRUE(evaluate_fault_tree(t, {{"fog", true}, {"rain", false}}));
  EXPECT_TRUE(evaluate_fault_tree(t, {{"fog", false}, {"rain", true}}));
  EXPECT_TRUE(evaluate_fault_tree(t, {{"fog", true}, {"rain", true}}));
}

TEST(FaultTree, AndGate) {
  const FaultTree t{"top", {gate("top", Gate::kAnd, {"a", "b"}), basic("a"), basic("b")}};
  EXPECT_FALSE(evaluate_fault_tree(t, {{"a", true}, {"b", false}}));
  EXPECT_TRUE(evaluate_fault_tree(t, {{"a", true}, {"b", true}}));
}

TEST(FaultTree, EvaluationErrors) {
  const auto t = fog_or_rain();
  EXPECT_THROW(evaluate_fault_tree(t, {{"fog", true}}), ConfigError);
  EXPECT_THROW(evaluate_fault_tree(t, {{"fog", true}, {"rain", true}, {"snow", true}}), ConfigError);
  EXPECT_THROW(evaluate_fault_tree(t, {{"fog", true}, {"rain", true}, {"H1", true}}), ConfigError);
}

TEST(FaultTree, Validation) {
  EXPECT_THROW((FaultTree{"x", {basic("a")}}.validate()), ConfigError);
  EXPECT_THROW((FaultTree{"a", {basic("a"), basic("a")}}.validate()), ConfigError);
  EXPECT_THROW((FaultTree{"g", {gate("g", Gate::kOr, {"zz"})}}.validate()), ConfigError);
  EXPECT_THROW((FaultTree{"g", {gate("g", Gate::kOr, {})}}.validate()), ConfigError);
  EXPECT_THROW((FaultTree{"g", {gate("g", Gate::kOr, {"h"}), gate("h", Gate::kAnd, {"g"})}}.validate()),
               ConfigError);
}

TEST(FaultTree, SharedSubtreeIsNotACycle) {
  const FaultTree t{"top",
                    {gate("top", Gate::kAnd, {"l", "r"}), gate("l", Gate::kOr, {"x"}),
                     gate("r", Gate::kOr, {"x"}), basic("x")}};
  EXPECT_NO_THROW(t.validate());
  EXPECT_TRUE(evaluate_fault_tree(t, {{"x", true}}));
}

TEST(CutSets, OrOfAnd) {
  const FaultTree t{"top",
                    {gate("top", Gate::kOr, {"a", "bc"}), gate("bc", Gate::kAnd, {"b", "c"}),
                     basic("a"), basic("b"), basic("c")}};
  EXPECT_EQ(minimal_cut_sets(t),
            (std::vector<std::vector<std::string>>{{"a"}, {"b", "c"}}));
}

TEST(CutSets, AbsorptionRemovesSupersets) {
  // top = a AND (a OR b): the only minimal cut set is {a}
  const FaultTree t{"top",
                    {gate("top", Gate::kAnd, {"a", "ab"}), gate("ab", Gate::kOr, {"a", "b"}),
                     basic("a"), basic("b")}};
  EXPECT_EQ(minimal_cut_sets(t), (std::vector<std::vector<std::string>>{{"a"}}));
}

TEST(CutSets, ShippedTree) {
  const auto t = read_fault_tree(testing::source_dir() / "data/harvester/fault_tree.json");
  const auto sets = minimal_cut_sets(t);
  ASSERT_EQ(sets.size(), 2u);
  EXPECT_EQ(sets[0].size(), 1u);
  EXPECT_EQ(sets[1].size(), 1u);
}

TEST(CutSets, TooManyBasics) {
  FaultTree t{"top", {gate("top", Gate::kOr, {})}};
  for (std::size_t i = 0; i <= kMaxCutSetBasics; ++i) {
    t.events[0].children.push_back("e" + std::to_string(i));
    t.events.push_back(basic("e" + std::to_string(i)));
  }
  EXPECT_THROW(minimal_cut_sets(t), ConfigError);
}

TEST(FaultTreeJson, RoundTrip) {
  auto t = fog_or_rain();
  t.events[0].label = "harvester misses obstacle";
  t.events[0].risk = "severity high";
  const auto back = parse_fault_tree(fault_tree_to_json(t));
  EXPECT_EQ(back.top, "H1");
  ASSERT_EQ(back.events.size(), 3u);
  EXPECT_EQ(back.events[0].label, t.events[0].label);
  EXPECT_EQ(back.events[0].risk, t.events[0].risk);
  EXPECT_EQ(back.events[0].children, t.events[0].children);
  EXPECT_THROW(parse_fault_tree(R"({"top": "a", "events": [{"id": "a", "gate": "xor"}]})"),
               ConfigError);
  EXPECT_THROW(parse_fault_tree(R"({"top": "a", "events": [], "extra": 1})"), ConfigError);
}

GsnNode node(std::string id, GsnKind kind, std::vector<std::string> children = {},
             std::vector<std::string> refs = {}) {
  GsnNode n;
  n.id = std::move(id);
  n.kind = kind;
  n.children = std::move(children);
  n.evidence_refs = std::move(refs);
  return n;
}

EvidenceVerdict verdict(std::string id, bool passed) {
  EvidenceVerdict v;
  v.run_id = std::move(id);
  v.passed = passed;
  return v;
}

GsnGraph argument() {
  return {{node("G1", GsnKind::kGoal, {"C1", "S1"}), node("C1", GsnKind::kContext),
           node("S1", GsnKind::kStrategy, {"G2", "G3"}), node("G2", GsnKind::kGoal, {"Sn1"}),
           node("G3", GsnKind::kGoal, {"Sn2"}),
           node("Sn1", GsnKind::kSolution, {}, {"fog_v1", "evidence/fog_v2/results.csv"}),
           node("Sn2", GsnKind::kSolution, {}, {"rain_v1/verdict.json"})}};
}

GsnStatus status_of(const GsnGraph& g, const std::string& id) { return *g.find(id)->status; }

TEST(Gsn, AllPassingSupportsRoot) {
  const auto linked = link_evidence(
      argument(), {verdict("fog_v1", true), verdict("fog_v2", true), verdict("rain_v1", true)});
  EXPECT_EQ(status_of(linked, "G1"), GsnStatus::kSupported);
  EXPECT_EQ(status_of(linked, "Sn1"), GsnStatus::kSupported);
  EXPECT_FALSE(linked.find("C1")->status.has_value());
}

TEST(Gsn, OneFailedRunUndermines) {
  const auto linked = link_evidence(
      argument(), {verdict("fog_v1", true), verdict("fog_v2", false), verdict("rain_v1", true)});
  EXPECT_EQ(status_of(linked, "Sn1"), GsnStatus::kUnsupported);
  EXPECT_EQ(status_of(linked, "G2"), GsnStatus::kUnsupported);
  EXPECT_EQ(status_of(linked, "G3"), GsnStatus::kSupported);
  EXPECT_EQ(status_of(linked, "G1"), GsnStatus::kUnsupported);
}

TEST(Gsn, AwayGoalNeedsAssertion) {
  auto g = argument();
  g.nodes[2].children.push_back("AG");
  GsnNode away = node("AG", GsnKind::kAwayGoal);
  away.module_ref = "model_validation";
  g.nodes.push_back(away);
  const std::vector<EvidenceVerdict> ok{verdict("fog_v1", true), verdict("fog_v2", true),
                                        verdict("rain_v1", true)};
  auto linked = link_evidence(g, ok);
  EXPECT_EQ(status_of(linked, "AG"), GsnStatus::kUndeveloped);
  EXPECT_EQ(status_of(linked, "G1"), GsnStatus::kUndeveloped);
  g.nodes.back().asserted = true;
  linked = link_evidence(g, ok);
  EXPECT_EQ(status_of(linked, "G1"), GsnStatus::kSupported);
}

TEST(Gsn, SolutionWithoutEvidenceIsUndeveloped) {
  const GsnGraph g{{node("G", GsnKind::kGoal, {"Sn"}), node("Sn", GsnKind::kSolution)}};
  EXPECT_EQ(status_of(link_evidence(g, {}), "G"), GsnStatus::kUndeveloped);
}

TEST(Gsn, LinkErrors) {
  EXPECT_THROW(link_evidence(argument(), {verdict("fog_v1", true)}), ConfigError);
  EXPECT_THROW(link_evidence(argument(), {verdict("fog_v1", true), verdict("fog_v1", true),
                                          verdict("fog_v2", true), verdict("rain_v1", true)}),
               ConfigError);
}

TEST(Gsn, EvidenceRunIds) {
  EXPECT_EQ(evidence_run_id("fog_v1"), "fog_v1");
  EXPECT_EQ(evidence_run_id("evidence/fog_v1/results.csv"), "fog_v1");
  EXPECT_EQ(evidence_run_id("fog_v1/verdict.json"), "fog_v1");
}

TEST(Gsn, Validation) {
  EXPECT_THROW((GsnGraph{{node("G", GsnKind::kGoal, {"X"})}}.validate()), ConfigError);
  EXPECT_THROW((GsnGraph{{node("G", GsnKind::kGoal), node("G", GsnKind::kGoal)}}.validate()),
               ConfigError);
  EXPECT_THROW((GsnGraph{{node("Sn", GsnKind::kSolution, {"G"}), node("G", GsnKind::kGoal)}}.validate()),
               ConfigError);
  EXPECT_THROW(parse_gsn(R"({"nodes": [{"id": "G", "kind": "theorem"}]})"), ConfigError);
  EXPECT_EQ(GsnGraph{}.root(), nullptr);
  EXPECT_EQ(argument().root()->id, "G1");
}

TEST(GsnDot, ChainMatchesGolden) {
  GsnGraph g{{node("G1", GsnKind::kGoal, {"S1"}), node("S1", GsnKind::kStrategy, {"Sn1"}),
              node("Sn1", GsnKind::kSolution, {}, {"fog_v1"})}};
  g.nodes[0].text = "Harvester stops before obstacles";
  g.nodes[1].text = "Argue over hazards";
  g.nodes[2].text = "Fog run";
  const auto dot = render_gsn_dot(link_evidence(g, {verdict("fog_v1", true)}));
  EXPECT_EQ(dot, testing::read_file(testing::source_dir() / "tests/data/gsn_chain.dot"));
}

TEST(GsnDot, EmptyGraph) {
  EXPECT_EQ(render_gsn_dot({}), "// GSN argument rendered by fieldcosim\ndigraph gsn {}\n");
}

TEST(GsnDot, StatusStyling) {
  auto g = argument();
  g.nodes.push_back(node("AG", GsnKind::kAwayGoal));
  g.nodes.back().module_ref = "m";
  g.nodes[2].children.push_back("AG");
  const auto dot = render_gsn_dot(link_evidence(
      g, {verdict("fog_v1", true), verdict("fog_v2", false), verdict("rain_v1", true)}));
  EXPECT_NE(dot.find("\"Sn1\" [shape=circle, style=\"dashed\""), std::string::npos) << dot;
  EXPECT_NE(dot.find("\"C1\" [shape=box, style=\"rounded\""), std::string::npos) << dot;
  EXPECT_NE(dot.find("\"G1\" -> \"C1\" [arrowhead=empty];"), std::string::npos) << dot;
  EXPECT_NE(dot.find("color=grey50, fontcolor=grey50, label=\"AG\\n[module: m]\""),
            std::string::npos)
      << dot;
}

TEST(Verdict, JsonRoundTrip) {
  EvidenceVerdict v;
  v.run_id = "fog_v2";
  v.passed = false;
  v.criterion = "min_gap > threshold";
  v.measured = 0.1234567890123;
  v.threshold = 0.2;
  v.stop_engaged = true;
  v.final_speed = 0.0;
  v.reason = "gap below threshold";
  EXPECT_EQ(parse_verdict_json(verdict_to_json(v)), v);
  EXPECT_THROW(parse_verdict_json("{}"), ConfigError);
}

SafetyScenario scenario(const std::string& id, double speed, double min_range, double ahead) {
  SafetyScenario s;
  s.run_id = id;
  s.hazard = "fog";
  s.speed = speed;
  s.sensor.min_range = min_range;
  s.sensor.max_range = 2.0;
  s.obstacle_ahead = ahead;
  return s;
}

TEST(SafetyRun, StandingStillPasses) {
  const auto run = run_safety_scenario(scenario("still", 0.0, 0.5, 10.0));
  EXPECT_TRUE(run.verdict.passed) << run.verdict.reason;
  EXPECT_NEAR(run.verdict.measured, 10.0, 0.05);
  EXPECT_EQ(run.verdict.final_speed, 0.0);
}

TEST(SafetyRun, StopsBeforeObstacle) {
  const auto run = run_safety_scenario(scenario("fog_v2", 2.0, 0.5, 10.0));
  EXPECT_TRUE(run.verdict.passed) << run.verdict.reason;
  EXPECT_TRUE(run.verdict.stop_engaged);
  EXPECT_EQ(run.verdict.final_speed, 0.0);
  EXPECT_GT(run.verdict.measured, 0.0);
  EXPECT_FALSE(run.trace.empty());
}

TEST(SafetyRun, ObstacleInsideBlindZoneIsHit) {
  const auto run = run_safety_scenario(scenario("blind", 1.0, 1.0, 0.3));
  EXPECT_FALSE(run.verdict.passed);
  EXPECT_EQ(run.verdict.measured, 0.0);
  EXPECT_FALSE(run.verdict.reason.empty());
}

TEST(SafetyRun, Reproducible) {
  const auto a = run_safety_scenario(scenario("r", 3.0, 0.5, 8.0));
  const auto b = run_safety_scenario(scenario("r", 3.0, 0.5, 8.0));
  EXPECT_EQ(a.verdict, b.verdict);
  EXPECT_EQ(a.trace, b.trace);
}

TEST(SafetySuite, ParsesDefaultsAndRuns) {
  const auto suite = parse_safety_suite(R"({
    "defaults": {"max_range": 2.0, "duration": 12},
    "scenarios": [
      {"id": "a", "hazard": "fog", "speed": 1.0},
      {"id": "b", "hazard": "rain", "speed": 2.0, "min_range": 1.0},
      {"id": "c", "hazard": "inaccurate", "speed": 1.0, "min_range": 1.0, "obstacle_ahead": 0.3}
    ]})");
  ASSERT_EQ(suite.scenarios.size(), 3u);
  EXPECT_EQ(suite.scenarios[1].sensor.max_range, 2.0);
  EXPECT_EQ(suite.scenarios[1].sensor.min_range, 1.0);
  EXPECT_EQ(suite.scenarios[0].duration, 12.0);

  testing::TempDir dir;
  const auto serial = run_safety_suite(suite, {.workers = 1});
  const auto parallel = run_safety_suite(suite, {.workers = 3, .evidence_dir = dir.path()});
  EXPECT_EQ(serial, parallel);
  EXPECT_TRUE(serial[0].passed);
  EXPECT_TRUE(serial[1].passed);
  EXPECT_FALSE(serial[2].passed);
  EXPECT_EQ(read_evidence_dir(dir.path()), parallel);
  EXPECT_TRUE(std::filesystem::exists(dir / "b/results.csv"));
}

TEST(SafetySuite, Rejections) {
  EXPECT_THROW(parse_safety_suite(R"({"scenarios": [{"id": "a", "spede": 1}]})"), ConfigError);
  EXPECT_THROW(parse_safety_suite(R"({"scenarios": [{"id": "a"}, {"id": "a"}]})"), ConfigError);
  EXPECT_THROW(parse_safety_suite(R"({"scenarios": [{"id": "a", "min_range": 3, "max_range": 2}]})"),
               ConfigError);
  EXPECT_THROW(read_safety_suite("/nonexistent/suite.json"), ConfigError);
}

TEST(SafetySuite, ShippedSuiteParses) {
  const auto suite = read_safety_suite(testing::source_dir() / "data/harvester/suite.json");
  EXPECT_EQ(suite.scenarios.size(), 10u);
  const auto g = read_gsn(testing::source_dir() / "data/harvester/gsn.json");
  EXPECT_EQ(g.root()->id, "G1");
}

}  // namespace
}  // namespace fieldcosim::safety
