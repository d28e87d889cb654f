#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "fieldcosim/errors.h"
#include "fieldcosim/grid_map.h"
#include "fieldcosim/numeric_format.h"
#include "fieldcosim/trace.h"
#include "test_support.h"

namespace fieldcosim {
namespace {

TEST(NumericFormat, RoundTripsBitForBit) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double v = dist(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    const auto back = parse_real(format_real(v));
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, v);
    EXPECT_EQ(*parse_real(format_short(v)), v);
  }
}

TEST(NumericFormat, IntegersPrintWithoutDecimals) {
  EXPECT_EQ(format_real(0.0), "0");
  EXPECT_EQ(format_real(2.0), "2");
  EXPECT_EQ(format_short(0.4), "0.4");
}

TEST(NumericFormat, ParseIsStrict) {
  EXPECT_FALSE(parse_real("").has_value());
  EXPECT_FALSE(parse_real("1.0x").has_value());
  EXPECT_FALSE(parse_real("abc").has_value());
  EXPECT_EQ(*parse_real(" +2.5 "), 2.5);
  EXPECT_EQ(*parse_real("-1e-3"), -1e-3);
}

TEST(TimedTrace, ChannelLookup) {
  TimedTrace t;
  t.channels = {"a.x", "a.y"};
  t.append(0.0, {1.0, 2.0});
  t.append(0.5, {3.0, 4.0});
  EXPECT_EQ(t.channel_index("a.y"), 1u);
  EXPECT_TRUE(t.has_channel("a.x"));
  EXPECT_FALSE(t.has_channel("a.z"));
  EXPECT_THROW(t.channel_index("a.z"), std::out_of_range);
  EXPECT_EQ(t.column("a.y"), (std::vector<double>{2.0, 4.0}));
  EXPECT_NO_THROW(t.validate());
}

TEST(TimedTrace, ValidateRejectsBadShapes) {
  TimedTrace t;
  t.channels = {"x"};
  t.rows = {{0.0, {1.0}}, {0.0, {2.0}}};
  EXPECT_THROW(t.validate(), std::invalid_argument);  // time does not increase

  t.rows = {{0.0, {1.0, 2.0}}};
  EXPECT_THROW(t.validate(), std::invalid_argument);  // arity

  t.rows = {{0.0, {std::numeric_limits<double>::quiet_NaN()}}};
  EXPECT_THROW(t.validate(), std::invalid_argument);

  t.channels = {"x", "x"};
  t.rows.clear();
  EXPECT_THROW(t.validate(), std::invalid_argument);

  t.channels = {"time"};
  EXPECT_THROW(t.validate(), std::invalid_argument);
}

TEST(GridMap, CellGeometry) {
  GridMap map(10, 5, 0.5, -1.0, 2.0);
  EXPECT_EQ(map.cells().size(), 50u);
  map.set_occupied(3, 2);
  // cell (3, 2) spans x [0.5, 1.0), y [3.0, 3.5)
  EXPECT_TRUE(map.occupied_at(0.75, 3.25));
  EXPECT_FALSE(map.occupied_at(1.0, 3.25));
  EXPECT_FALSE(map.occupied_at(-5.0, -5.0));  // outside is free
  EXPECT_EQ(map.occupied_count(), 1u);
  const auto cell = map.cell_at(0.5, 3.0);
  ASSERT_TRUE(cell.has_value());
  EXPECT_EQ(cell->first, 3u);
  EXPECT_EQ(cell->second, 2u);
}

TEST(GridMap, DistanceToNearestObstacle) {
  GridMap map(20, 20, 0.1, 0.0, 0.0);
  EXPECT_FALSE(map.distance_to_nearest_obstacle(1.0, 1.0).has_value());
  map.set_occupied(10, 10);  // [1.0, 1.1) x [1.0, 1.1)
  EXPECT_DOUBLE_EQ(*map.distance_to_nearest_obstacle(0.7, 1.05), 0.3);
  EXPECT_NEAR(*map.distance_to_nearest_obstacle(0.7, 0.6), 0.5, 1e-12);  // 3-4-5 to the corner
  EXPECT_EQ(*map.distance_to_nearest_obstacle(1.05, 1.05), 0.0);
}

TEST(GridMap, FillBoxUsesCellCentres) {
  GridMap map(40, 40, 0.05, 0.0, 0.0);
  map.fill_box(0.5, 0.5, 1.0, 0.75);
  EXPECT_EQ(map.occupied_count(), 10u * 5u);
  EXPECT_TRUE(map.occupied_at(0.51, 0.51));
  EXPECT_FALSE(map.occupied_at(0.49, 0.51));
}

TEST(GridMap, FileRoundTrip) {
  GridMap map(7, 3, 0.25, -0.5, 1.5);
  map.set_occupied(0, 0);
  map.set_occupied(6, 2);
  map.set_occupied(3, 1);
  std::stringstream text;
  write_grid_map(map, text);
  EXPECT_EQ(text.str(),
            "GRIDMAP 1\n7 3 0.25 -0.5 1.5\n"
            "1 0 0 0 0 0 0\n0 0 0 1 0 0 0\n0 0 0 0 0 0 1\n");
  EXPECT_EQ(parse_grid_map(text), map);

  testing::TempDir dir;
  write_grid_map(map, dir / "m.grid");
  EXPECT_EQ(read_grid_map(dir / "m.grid"), map);
}

TEST(GridMap, ParseErrorsNameTheLine) {
  std::stringstream bad("GRIDMAP 1\n2 2 0.5 0 0\n0 1\n0 2\n");
  try {
    parse_grid_map(bad, "m.grid");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("m.grid:4"), std::string::npos) << e.what();
  }
  std::stringstream short_rows("GRIDMAP 1\n2 2 0.5 0 0\n0 1\n");
  EXPECT_THROW(parse_grid_map(short_rows), ConfigError);
  std::stringstream bad_magic("GRID 1\n");
  EXPECT_THROW(parse_grid_map(bad_magic), ConfigError);
  EXPECT_THROW(read_grid_map("/nonexistent/m.grid"), ConfigError);
}

}  // namespace
}  // namespace fieldcosim
