#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fieldcosim {

struct TraceRow {
  double time = 0.0;
  std::vector<double> values;

  bool operator==(const TraceRow&) const = default;
};

// Timestamped series of named real channels. The time column is implicit and
// is not listed in `channels`.
struct TimedTrace {
  std::vector<std::string> channels;
  std::vector<TraceRow> rows;

  bool empty() const { return rows.empty(); }
  std::size_t size() const { return rows.size(); }

  // Index of `name` in `channels`; throws std::out_of_range when absent.
  std::size_t channel_index(const std::string& name) const;
  bool has_channel(const std::string& name) const;

  // Copies one channel out as a column.
  std::vector<double> column(const std::string& name) const;

  void append(double time, std::vector<double> values);

  // Throws std::invalid_argument on arity mismatch, non-finite values,
  // duplicate channel names or a non-increasing time column.
  void validate() const;

  bool operator==(const TimedTrace&) const = default;
};

}  // namespace fieldcosim
