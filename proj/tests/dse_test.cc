#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "fieldcosim/dse.h"
#include "fieldcosim/errors.h"
#include "sweep_fixture.h"
#include "test_support.h"

namespace fieldcosim::dse {
namespace {

using testing::kRobotti;

DseResultRow row(const std::string& scenario, std::vector<double> values, double mean,
                 double max) {
  return {scenario, {{"a", "b"}, std::move(values)}, mean, max};
}

TEST(CrossTrack, ThreeFourFive) {
  AlignedPair p;
  p.pairs = {{0.0, 0.0, 3.0, 4.0}};
  const auto e = cross_track_error(p);
  EXPECT_EQ(e.mean, 5.0);
  EXPECT_EQ(e.max, 5.0);
  p.pairs.push_back({1.0, 1.0, 1.0, 1.0});
  const auto e2 = cross_track_error(p);
  EXPECT_EQ(e2.mean, 2.5);
  EXPECT_EQ(e2.max, 5.0);
  EXPECT_THROW(cross_track_error(AlignedPair{}), std::invalid_argument);
}

TEST(CrossTrack, MatchesDirectSum) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int trial = 0; trial < 50; ++trial) {
    AlignedPair p;
    const int n = 1 + trial * 3;
    long double sum = 0.0L;
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      PositionPair q{u(rng), u(rng), u(rng), u(rng)};
      const long double dx = static_cast<long double>(q.x_ref) - q.x_sim;
      const long double dy = static_cast<long double>(q.y_ref) - q.y_sim;
      const double d = static_cast<double>(std::sqrt(dx * dx + dy * dy));
      sum += d;
      worst = std::max(worst, d);
      p.pairs.push_back(q);
    }
    const auto e = cross_track_error(p);
    EXPECT_NEAR(e.mean, static_cast<double>(sum / n), 1e-12 * 100.0);
    EXPECT_NEAR(e.max, worst, 1e-12 * 100.0);
  }
}

TEST(Grid, LastAxisFastest) {
  ParameterSpace s{{{"p", {1, 2}}, {"q", {10, 20, 30}}}};
  EXPECT_EQ(s.grid_size(), 6u);
  const auto g = expand_grid(s);
  ASSERT_EQ(g.size(), 6u);
  const std::vector<std::vector<double>> expected{{1, 10}, {1, 20}, {1, 30},
                                                  {2, 10}, {2, 20}, {2, 30}};
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(g[i].values, expected[i]);
    EXPECT_EQ(g[i].names, (std::vector<std::string>{"p", "q"}));
  }
  EXPECT_EQ(g[4].at("q"), 20.0);
  EXPECT_EQ(g[4].describe(), "p=2, q=20");
  EXPECT_THROW(g[4].at("r"), std::out_of_range);
  EXPECT_EQ(expand_grid(testing::robotti_space()).size(), 125u);
}

TEST(Grid, Validation) {
  EXPECT_THROW((ParameterSpace{{{"p", {}}}}.validate()), ConfigError);
  EXPECT_THROW((ParameterSpace{{{"p", {1}}, {"p", {2}}}}.validate()), ConfigError);
  EXPECT_THROW((ParameterSpace{{{"p", {NAN}}}}.validate()), ConfigError);
  EXPECT_THROW((ParameterSpace{{}}.validate()), ConfigError);
}

TEST(Config, AcceptsOriginalPublishedDocument) {
  const auto text = testing::read_file(testing::source_dir() / "tests/data/robotti_dse_original.json");
  ASSERT_FALSE(text.empty());
  const auto c = parse_dse_config(text);
  EXPECT_EQ(c.algorithm, "exhaustive");
  ASSERT_EQ(c.parameters.axes.size(), 3u);
  EXPECT_EQ(c.parameters.axes[0].name, kRobotti + ".cAlphaF");
  EXPECT_EQ(c.parameters.axes[0].values,
            (std::vector<double>{20000, 24500, 29000, 33500, 38000}));
  EXPECT_EQ(c.parameters.axes[1].values, (std::vector<double>{0.3, 0.4, 0.5, 0.6, 0.7}));
  EXPECT_EQ(c.parameters.axes[2].values, (std::vector<double>{1000, 1500, 2000, 2500, 3000}));
  EXPECT_EQ(c.scenarios,
            (std::vector<std::string>{"sin1", "sin2", "sin3", "turn_ramp1", "turn_ramp2",
                                      "turn_ramp3", "speed_ramp1", "speed_ramp2", "speed_step1",
                                      "speed_step2", "speed_step3"}));
  EXPECT_NE(std::find(c.ignored_keys.begin(), c.ignored_keys.end(), "externalScripts"),
            c.ignored_keys.end());
  EXPECT_NE(std::find(c.ignored_keys.begin(), c.ignored_keys.end(), "parameterConstraints"),
            c.ignored_keys.end());
  EXPECT_FALSE(c.warnings.empty());
}

TEST(Config, ShippedConfigurationParses) {
  const auto c = read_dse_config(testing::source_dir() / "data/robotti/dse_configuration.json");
  EXPECT_EQ(c.scenarios.size(), 12u);
  EXPECT_EQ(c.parameters.grid_size(), 125u);
  EXPECT_EQ(c.input_instance, "steering");
  EXPECT_EQ(c.multimodel.filename(), "multimodel.json");
  EXPECT_EQ(c.scenario_files.at("sin2").inputs.filename(), "steering_inputs_sin2.csv");
  EXPECT_EQ(c.scenario_files.at("sin2").reference.filename(), "gps_position_sin2.csv");
}

TEST(Config, Rejections) {
  const std::string params = R"("parameters": {"v.mu": [0.3, 0.4]})";
  EXPECT_THROW(parse_dse_config(R"({"algorithm": {"type": "genetic"}, )" + params + "}"),
               ConfigError);
  EXPECT_THROW(parse_dse_config(R"({"algorithm": "exhaustive"})"), ConfigError);
  EXPECT_THROW(parse_dse_config(R"({"parameters": {"v.mu": [0.3, "x"]}})"), ConfigError);
  EXPECT_THROW(parse_dse_config(R"({"parameters": {"v.mu": 0.3}})"), ConfigError);
  EXPECT_THROW(parse_dse_config("{" + params + R"(, "scenarios": ["a, a"]})"), ConfigError);
  EXPECT_THROW(parse_dse_config("{" + params + R"(, "objective": {"type": "rmse"}})"),
               ConfigError);
  EXPECT_THROW(parse_dse_config("not json at all"), ConfigError);
  EXPECT_THROW(read_dse_config("/nonexistent/dse.json"), ConfigError);
  try {
    parse_dse_config(R"({"algorithm": {"type": "genetic"}, )" + params + "}");
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("genetic"), std::string::npos);
  }
}

TEST(Config, SuffixesAndTrailingCommas) {
  const auto c = parse_dse_config(R"({"parameters": {"v.m": [1k, 2.5k, 3,],}, "scenarios": ["a", "b, c"],})");
  EXPECT_EQ(c.parameters.axes[0].values, (std::vector<double>{1000, 2500, 3}));
  EXPECT_EQ(c.scenarios, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_FALSE(c.warnings.empty());
}

TEST(Optimize, LowestSummedMean) {
  // A scores 1 on each scenario, B is better on one but worse in total.
  const std::vector<DseResultRow> rows{row("s1", {1, 1}, 1.0, 1.0), row("s1", {0.4, 2}, 0.4, 0.4),
                                       row("s2", {1, 1}, 1.0, 1.0), row("s2", {0.4, 2}, 2.0, 2.0)};
  const auto best = optimize(rows);
  EXPECT_EQ(best.assignment.values, (std::vector<double>{1, 1}));
  EXPECT_DOUBLE_EQ(best.total, 2.0);
}

TEST(Optimize, TiesGoToGridOrder) {
  const std::vector<DseResultRow> rows{row("s", {2, 1}, 1.0, 1.0), row("s", {1, 1}, 1.0, 1.0)};
  EXPECT_EQ(optimize(rows).assignment.values, (std::vector<double>{2, 1}));
  const ParameterSpace space{{{"a", {1, 2}}, {"b", {1}}}};
  EXPECT_EQ(optimize(rows, space).assignment.values, (std::vector<double>{1, 1}));
}

TEST(Optimize, IncompleteTablesRejected) {
  EXPECT_THROW(optimize({}), ConfigError);
  EXPECT_THROW(optimize({row("s1", {1, 1}, 1, 1), row("s2", {2, 2}, 1, 1)}), ConfigError);
  EXPECT_THROW(optimize({row("s1", {1, 1}, 1, 1), row("s1", {1, 1}, 2, 2)}), ConfigError);
  const ParameterSpace space{{{"a", {1, 2}}, {"b", {1}}}};
  EXPECT_THROW(optimize({row("s", {1, 1}, 1, 1)}, space), ConfigError);
}

TEST(Pareto, DropsDominatedRows) {
  const std::vector<DseResultRow> rows{row("s", {0, 0}, 1, 5), row("s", {0, 1}, 2, 2),
                                       row("s", {1, 0}, 3, 1), row("s", {1, 1}, 2, 6)};
  const auto front = pareto_rank(rows);
  ASSERT_EQ(front.size(), 3u);
  EXPECT_EQ(front[0], rows[0]);
  EXPECT_EQ(front[1], rows[1]);
  EXPECT_EQ(front[2], rows[2]);
}

TEST(Pareto, EqualRowsBothKept) {
  const std::vector<DseResultRow> rows{row("s", {0, 0}, 1, 1), row("s", {0, 1}, 1, 1)};
  EXPECT_EQ(pareto_rank(rows), rows);
  EXPECT_TRUE(pareto_rank({}).empty());
}

TEST(Aggregate, SumsMeansTakesWorstMax) {
  const std::vector<DseResultRow> rows{row("s1", {1, 1}, 1.0, 3.0), row("s1", {2, 2}, 0.5, 0.5),
                                       row("s2", {1, 1}, 2.0, 2.0), row("s2", {2, 2}, 0.5, 4.0)};
  const auto agg = aggregate_by_assignment(rows);
  ASSERT_EQ(agg.size(), 2u);
  EXPECT_EQ(agg[0], row("total", {1, 1}, 3.0, 3.0));
  EXPECT_EQ(agg[1], row("total", {2, 2}, 1.0, 4.0));
}

TEST(ResultsFile, RoundTripsExactly) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<DseResultRow> rows;
  const auto grid = expand_grid(testing::robotti_space());
  for (int s = 0; s < 12; ++s) {
    for (const auto& a : grid) rows.push_back({"scn" + std::to_string(s), a, u(rng), u(rng)});
  }
  ASSERT_EQ(rows.size(), 1500u);
  testing::TempDir dir;
  write_dse_results(rows, dir / "dse_results.csv");
  EXPECT_EQ(read_dse_results(dir / "dse_results.csv"), rows);
}

TEST(ResultsFile, Header) {
  std::stringstream out;
  write_dse_results({row("s", {1, 0.5}, 0.25, 2)}, out);
  EXPECT_EQ(out.str(), "scenario,a,b,mean_cross_track_error,max_cross_track_error\ns,1,0.5,0.25,2\n");
  std::istringstream bad("scenario,a,mean_cross_track_error,max_cross_track_error\ns,x,1,1\n");
  EXPECT_THROW(parse_dse_results(bad), ConfigError);
}

class SmallSweep : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const auto truth = testing::robotti_truth();
    plan_ = new SweepPlan(testing::robotti_plan(
        {testing::make_scenario("sin2", ScenarioKind::kSin, 3.0, 0.5, 10.0, truth),
         testing::make_scenario("turn2", ScenarioKind::kTurnRamp, 3.0, 0.5, 10.0, truth)},
        {{{kRobotti + ".cAlphaF", {20000, 24500}},
          {kRobotti + ".mu", {0.3, 0.4}},
          {kRobotti + ".m_robot", {2000, 2500}}}}));
  }
  static void TearDownTestSuite() { delete plan_; }
  static SweepPlan* plan_;
};
SweepPlan* SmallSweep::plan_ = nullptr;

TEST_F(SmallSweep, RecoversTruthAndIsOrdered) {
  const auto rows = run_sweep(*plan_, {});
  ASSERT_EQ(rows.size(), 16u);
  const auto grid = expand_grid(plan_->parameters);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].scenario, i < 8 ? "sin2" : "turn2");
    EXPECT_EQ(rows[i].assignment, grid[i % 8]);
  }
  const auto best = optimize(rows, plan_->parameters);
  EXPECT_EQ(best.assignment.values, (std::vector<double>{24500, 0.4, 2500}));
  EXPECT_LT(best.total, 1e-9);
}

TEST_F(SmallSweep, WorkerCountDoesNotChangeResults) {
  std::stringstream one, four;
  write_dse_results(run_sweep(*plan_, {.workers = 1}), one);
  write_dse_results(run_sweep(*plan_, {.workers = 4}), four);
  EXPECT_EQ(one.str(), four.str());
}

TEST_F(SmallSweep, RunsDirectoryLayout) {
  testing::TempDir dir;
  run_sweep(*plan_, {.workers = 2, .runs_dir = dir.path()});
  EXPECT_TRUE(std::filesystem::exists(dir / "sin2/0/results.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "turn2/7/objectives.json"));
  const auto objectives = testing::read_file(dir / "turn2/7/objectives.json");
  EXPECT_NE(objectives.find("cross_track_mean"), std::string::npos);
}

TEST_F(SmallSweep, FailingRunNamesScenarioAndAssignment) {
  SweepPlan plan = *plan_;
  plan.parameters.axes[1].values = {0.4, 5.0};  // mu beyond the model's range
  try {
    run_sweep(plan, {.workers = 2});
    FAIL() << "expected the sweep to abort";
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("mu=5"), std::string::npos) << what;
    EXPECT_NE(what.find("sin2"), std::string::npos) << what;
  }
}

TEST(SweepPlanResolve, Checks) {
  const auto s = testing::make_scenario("s", ScenarioKind::kSin, 1.0, 0.1, 2.0, {});
  EXPECT_THROW(testing::robotti_plan({s}, {{{"ghost.mu", {0.4}}}}), ConfigError);
  EXPECT_THROW(testing::robotti_plan({s}, {{{kRobotti + ".x", {0.4}}}}), ConfigError);
  auto empty = s;
  empty.reference = TimedTrace{};
  EXPECT_THROW(testing::robotti_plan({empty}), ConfigError);
  const auto plan = testing::robotti_plan({s});
  EXPECT_EQ(plan.input_instance, "steering");
  EXPECT_EQ(plan.position_x, kRobotti + ".x");
}

}  // namespace
}  // namespace fieldcosim::dse
