#pragma once

// Fixed-step Jacobi co-simulation master. Every macro step reads all connected
// source outputs, latches them onto their sinks, then steps every instance by
// h. Coupled signals therefore arrive one step delayed, independent of the
// order in which instances are stepped.

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fieldcosim/simunit.h"
#include "fieldcosim/trace.h"

namespace fieldcosim {

inline constexpr double kDefaultStepSize = 0.01;
inline constexpr double kMaxStepsPerRun = 1e8;

// "{instance}.{port}". The port is the text after the last dot, so nested
// names such as "{Robotti}.RobottiInstance.cAlphaF" keep "{Robotti}.RobottiInstance"
// as the instance name.
struct PortRef {
  std::string instance;
  std::string port;

  std::string str() const { return instance + "." + port; }
  // Throws ConfigError when there is no dot or either side is empty.
  static PortRef parse(std::string_view text);

  auto operator<=>(const PortRef&) const = default;
};

struct Connection {
  PortRef source;  // output port
  PortRef sink;    // input port
};

struct InstanceSpec {
  std::string unit_type;
  ParameterMap parameters;
  UnitResources resources;
};

struct MultiModelConfig {
  std::map<std::string, InstanceSpec> instances;
  std::vector<Connection> connections;
  // Constant values for inputs, latched before the first step. Inputs with
  // neither a connection nor an entry here start at 0.
  std::map<PortRef, double> initial_inputs;
  std::vector<PortRef> outputs;
  double step_size = kDefaultStepSize;
  double duration = 0.0;
};

// Number of macro steps, ceil(duration / step_size), with a relative
// tolerance so that 1.0 / 0.1 counts as exactly 10.
std::uint64_t macro_step_count(double duration, double step_size);

// One human-readable diagnostic per violated invariant; empty when valid.
std::vector<std::string> validate_config(const MultiModelConfig& config,
                                         const UnitRegistry& registry);
std::vector<std::string> validate_config(const MultiModelConfig& config);

// Throws ConfigError for an invalid configuration and SimulationError (naming
// the instance and time) when a unit fails.
TimedTrace run_cosim(const MultiModelConfig& config, const UnitRegistry& registry);
TimedTrace run_cosim(const MultiModelConfig& config);

// Header "time,<channels...>", LF line endings, reals with 17 significant
// digits. Throws ConfigError on I/O failure.
void write_results_csv(const TimedTrace& trace, const std::filesystem::path& path);
void write_results_csv(const TimedTrace& trace, std::ostream& out);

// JSON document with "instances", "connections", "inputs", "outputs",
// "step_size" and "duration". Relative resource paths ("trace", "map")
// resolve against the document's directory.
MultiModelConfig read_multimodel_config(const std::filesystem::path& path);
MultiModelConfig parse_multimodel_config(std::string_view text,
                                         const std::filesystem::path& base_dir = {});

}  // namespace fieldcosim
