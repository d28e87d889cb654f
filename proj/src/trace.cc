#include "fieldcosim/trace.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace fieldcosim {

std::size_t TimedTrace::channel_index(const std::string& name) const {
  const auto it = std::find(channels.begin(), channels.end(), name);
  if (it == channels.end()) {
    throw std::out_of_range("trace has no channel '" + name + "'");
  }
  return static_cast<std::size_t>(it - channels.begin());
}

bool TimedTrace::has_channel(const std::string& name) const {
  return std::find(channels.begin(), channels.end(), name) != channels.end();
}

std::vector<double> TimedTrace::column(const std::string& name) const {
  const std::size_t index = channel_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row.values[index]);
  return out;
}

void TimedTrace::append(double time, std::vector<double> values) {
  rows.push_back(TraceRow{time, std::move(values)});
}

void TimedTrace::validate() const {
  std::set<std::string> seen;
  for (const auto& name : channels) {
    if (name.empty()) throw std::invalid_argument("empty channel name");
    if (name == "time") throw std::invalid_argument("channel name 'time' is reserved");
    if (!seen.insert(name).second) {
      throw std::invalid_argument("duplicate channel '" + name + "'");
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.values.size() != channels.size()) {
      throw std::invalid_argument("row " + std::to_string(i) + " has " +
                                  std::to_string(row.values.size()) + " values, expected " +
                                  std::to_string(channels.size()));
    }
    if (!std::isfinite(row.time)) {
      throw std::invalid_argument("row " + std::to_string(i) + " has a non-finite time");
    }
    if (i > 0 && !(row.time > rows[i - 1].time)) {
      throw std::invalid_argument("time is not strictly increasing at row " + std::to_string(i));
    }
    for (double v : row.values) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("row " + std::to_string(i) + " has a non-finite value");
      }
    }
  }
}

}  // namespace fieldcosim
