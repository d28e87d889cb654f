#pragma once

// Trace ingestion, synthetic field-test scenarios and time alignment of a
// reference position series against a simulated one.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fieldcosim/trace.h"

namespace fieldcosim {

// Parses the CSV dialect written by write_results_csv. When expected_channels
// is non-empty the header must be exactly "time,<expected...>" in that order.
// Throws ConfigError with the source name and line number.
TimedTrace read_trace_csv(const std::filesystem::path& path,
                          const std::vector<std::string>& expected_channels = {});
TimedTrace parse_trace_csv(std::istream& in, const std::vector<std::string>& expected_channels,
                           const std::string& source_name = "<stream>");

enum class ScenarioKind { kSin, kTurnRamp, kSpeedRamp, kSpeedStep };

std::string to_string(ScenarioKind kind);
ScenarioKind parse_scenario_kind(const std::string& text);  // throws ConfigError

struct ScenarioSpec {
  std::string name;
  ScenarioKind kind = ScenarioKind::kSin;
  double duration = 20.0;
  double base_speed = 1.0;
  // Steering amplitude in rad for sin and the final steering angle for
  // turn_ramp; unused by the speed scenarios.
  double amplitude = 0.0;
  double sample_period = 0.1;

  void validate() const;  // throws ConfigError
};

// Channels [velocity, delta_f] sampled at k * sample_period over [0, duration].
TimedTrace generate_scenario(const ScenarioSpec& spec);

struct PositionPair {
  double x_ref = 0.0;
  double y_ref = 0.0;
  double x_sim = 0.0;
  double y_sim = 0.0;

  double distance() const;
};

struct AlignedPair {
  std::vector<PositionPair> pairs;
  // Reference rows that fell outside the simulated time span and were clamped
  // to its nearest endpoint.
  std::size_t clamped = 0;
};

// Channel holding a position coordinate: exactly `axis`, else the unique
// channel ending in ".axis". Throws std::invalid_argument otherwise.
std::string find_position_channel(const TimedTrace& trace, const std::string& axis);

// Pairs every reference row with the simulated position linearly interpolated
// at the same time. Rows at identical timestamps are copied, not interpolated.
AlignedPair align(const TimedTrace& reference, const TimedTrace& simulated);
AlignedPair align(const TimedTrace& reference, const std::string& ref_x, const std::string& ref_y,
                  const TimedTrace& simulated, const std::string& sim_x, const std::string& sim_y);

}  // namespace fieldcosim
