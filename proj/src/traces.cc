#include "fieldcosim/traces.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fieldcosim/errors.h"
#include "fieldcosim/numeric_format.h"

namespace fieldcosim {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string describe_columns(const std::vector<std::string>& channels) {
  std::string out = "time";
  for (const auto& c : channels) out += "," + c;
  return out;
}

}  // namespace

TimedTrace parse_trace_csv(std::istream& in, const std::vector<std::string>& expected_channels,
                           const std::string& source_name) {
  auto fail = [&](std::size_t line, const std::string& what) {
    return ConfigError(source_name + ":" + std::to_string(line) + ": " + what);
  };

  std::string line;
  if (!std::getline(in, line)) throw fail(1, "missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  if (trim(header[0]) != "time") throw fail(1, "first column must be 'time'");

  TimedTrace trace;
  std::set<std::string> seen;
  for (std::size_t i = 1; i < header.size(); ++i) {
    std::string name(trim(header[i]));
    if (name.empty()) throw fail(1, "empty column name in header");
    if (name == "time" || !seen.insert(name).second) {
      throw fail(1, "duplicated column '" + name + "'");
    }
    trace.channels.push_back(std::move(name));
  }
  if (!expected_channels.empty() && trace.channels != expected_channels) {
    throw fail(1, "columns '" + describe_columns(trace.channels) + "' do not match expected '" +
                      describe_columns(expected_channels) + "' (names and order must agree)");
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != trace.channels.size() + 1) {
      throw fail(line_no, "expected " + std::to_string(trace.channels.size() + 1) +
                              " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> values(trace.channels.size());
    double time = 0.0;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const auto value = parse_real(fields[i]);
      if (!value) {
        throw fail(line_no, "cannot parse number '" + std::string(trim(fields[i])) + "'");
      }
      if (!std::isfinite(*value)) throw fail(line_no, "non-finite value");
      if (i == 0) {
        time = *value;
      } else {
        values[i - 1] = *value;
      }
    }
    if (!trace.rows.empty() && !(time > trace.rows.back().time)) {
      throw fail(line_no, "time " + format_real(time) + " does not increase (previous " +
                              format_real(trace.rows.back().time) + ")");
    }
    trace.append(time, std::move(values));
  }
  return trace;
}

TimedTrace read_trace_csv(const std::filesystem::path& path,
                          const std::vector<std::string>& expected_channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open trace '" + path.string() + "'");
  return parse_trace_csv(in, expected_channels, path.string());
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kSin:
      return "sin";
    case ScenarioKind::kTurnRamp:
      return "turn_ramp";
    case ScenarioKind::kSpeedRamp:
      return "speed_ramp";
    case ScenarioKind::kSpeedStep:
      return "speed_step";
  }
  return "?";
}

ScenarioKind parse_scenario_kind(const std::string& text) {
  for (auto kind : {ScenarioKind::kSin, ScenarioKind::kTurnRamp, ScenarioKind::kSpeedRamp,
                    ScenarioKind::kSpeedStep}) {
    if (to_string(kind) == text) return kind;
  }
  throw ConfigError("unknown scenario kind '" + text +
                    "' (expected sin, turn_ramp, speed_ramp or speed_step)");
}

void ScenarioSpec::validate() const {
  if (name.empty()) throw ConfigError("scenario name must not be empty");
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw ConfigError("scenario '" + name + "': duration must be positive");
  }
  if (!(sample_period > 0.0) || !std::isfinite(sample_period)) {
    throw ConfigError("scenario '" + name + "': sample_period must be positive");
  }
  if (!std::isfinite(base_speed) || !std::isfinite(amplitude)) {
    throw ConfigError("scenario '" + name + "': base_speed and amplitude must be finite");
  }
}

TimedTrace generate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  const double ratio = spec.duration / spec.sample_period;
  const double nearest = std::round(ratio);
  const auto samples = static_cast<std::size_t>(
      std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio) ? nearest : std::floor(ratio));

  TimedTrace trace;
  trace.channels = {"velocity", "delta_f"};
  trace.rows.reserve(samples + 1);
  for (std::size_t k = 0; k <= samples; ++k) {
    const double t = static_cast<double>(k) * spec.sample_period;
    const double progress = t / spec.duration;
    double velocity = spec.base_speed;
    double delta_f = 0.0;
    switch (spec.kind) {
      case ScenarioKind::kSin: {
        const double period = spec.duration / 3.0;
        delta_f = spec.amplitude * std::sin(2.0 * std::numbers::pi * t / period);
        break;
      }
      case ScenarioKind::kTurnRamp:
        delta_f = spec.amplitude * progress;
        break;
      case ScenarioKind::kSpeedRamp:
        velocity = spec.base_speed * progress;
        break;
      case ScenarioKind::kSpeedStep: {
        const double plateau = std::min(3.0, std::floor(4.0 * progress + 1e-9));
        velocity = spec.base_speed * (plateau + 1.0) / 4.0;
        break;
      }
    }
    trace.append(t, {velocity, delta_f});
  }
  return trace;
}

double PositionPair::distance() const {
  const double dx = x_sim - x_ref;
  const double dy = y_sim - y_ref;
  return std::sqrt(dx * dx + dy * dy);
}

std::string find_position_channel(const TimedTrace& trace, const std::string& axis) {
  if (trace.has_channel(axis)) return axis;
  const std::string suffix = "." + axis;
  std::string found;
  for (const auto& c : trace.channels) {
    if (c.size() > suffix.size() && c.compare(c.size() - suffix.size(), suffix.size(), suffix) == 0) {
      if (!found.empty()) {
        throw std::invalid_argument("ambiguous position channel for '" + axis + "': '" + found +
                                    "' and '" + c + "'");
      }
      found = c;
    }
  }
  if (found.empty()) throw std::invalid_argument("trace has no '" + axis + "' position channel");
  return found;
}

AlignedPair align(const TimedTrace& reference, const TimedTrace& simulated) {
  return align(reference, find_position_channel(reference, "x"),
               find_position_channel(reference, "y"), simulated,
               find_position_channel(simulated, "x"), find_position_channel(simulated, "y"));
}

AlignedPair align(const TimedTrace& reference, const std::string& ref_x, const std::string& ref_y,
                  const TimedTrace& simulated, const std::string& sim_x,
                  const std::string& sim_y) {
  if (reference.empty() || simulated.empty()) {
    throw std::invalid_argument("cannot align an empty trace");
  }
  const std::size_t rx = reference.channel_index(ref_x);
  const std::size_t ry = reference.channel_index(ref_y);
  const std::size_t sx = simulated.channel_index(sim_x);
  const std::size_t sy = simulated.channel_index(sim_y);
  const auto& rows = simulated.rows;

  AlignedPair out;
  out.pairs.reserve(reference.size());
  for (const auto& row : reference.rows) {
    PositionPair pair{row.values[rx], row.values[ry], 0.0, 0.0};
    const double t = row.time;
    const auto upper = std::upper_bound(rows.begin(), rows.end(), t,
                                        [](double v, const TraceRow& r) { return v < r.time; });
    if (upper == rows.begin()) {
      pair.x_sim = rows.front().values[sx];
      pair.y_sim = rows.front().values[sy];
      ++out.clamped;
    } else {
      const auto& before = *(upper - 1);
      if (before.time == t) {
        pair.x_sim = before.values[sx];
        pair.y_sim = before.values[sy];
      } else if (upper == rows.end()) {
        pair.x_sim = before.values[sx];
        pair.y_sim = before.values[sy];
        ++out.clamped;
      } else {
        const double w = (t - before.time) / (upper->time - before.time);
        pair.x_sim = before.values[sx] + w * (upper->values[sx] - before.values[sx]);
        pair.y_sim = before.values[sy] + w * (upper->values[sy] - before.values[sy]);
      }
    }
    out.pairs.push_back(pair);
  }
  return out;
}

}  // namespace fieldcosim
