#pragma once

// The simulation-unit contract: a black box with parameter, input and output
// ports that the co-simulation master advances in fixed steps. Units live in
// process and are created through a registry keyed by unit type.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fieldcosim/grid_map.h"
#include "fieldcosim/trace.h"

namespace fieldcosim {

enum class PortDirection { kInput, kOutput, kParameter };
enum class PortKind { kReal, kBoolean };

std::string_view to_string(PortDirection direction);

struct PortDescriptor {
  std::string name;
  PortDirection direction = PortDirection::kInput;
  PortKind kind = PortKind::kReal;
};

using ParameterMap = std::map<std::string, double, std::less<>>;

struct UnitDescription {
  std::string unit_type;
  std::vector<PortDescriptor> ports;
  // Parameters without an entry here are optional; the unit derives them.
  ParameterMap default_parameters;

  std::optional<std::size_t> find_port(std::string_view name) const;
  const PortDescriptor& port(std::size_t index) const { return ports.at(index); }

  // Throws std::invalid_argument on duplicate port names or a default for a
  // non-parameter port.
  void validate() const;
};

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Waypoint&) const = default;
};

// Non-scalar configuration some units need (replayed inputs, a path, a map).
struct UnitResources {
  std::optional<TimedTrace> trace;
  std::vector<Waypoint> path;
  std::optional<GridMap> map;
};

struct UnitRegistry;

class SimUnit {
 public:
  explicit SimUnit(std::shared_ptr<const UnitDescription> description);
  virtual ~SimUnit() = default;

  SimUnit(const SimUnit&) = delete;
  SimUnit& operator=(const SimUnit&) = delete;

  const UnitDescription& description() const { return *description_; }

  // Throws std::invalid_argument for an unknown port name.
  std::size_t port_index(std::string_view name) const;

  // Latches an input for the next do_step. Boolean inputs take any finite
  // value; non-zero means true.
  void set_input(std::string_view port, double value);
  void set_input(std::size_t port, double value);

  // Advances the unit by h with inputs held constant over the step.
  void do_step(double h);

  double get_output(std::string_view port) const;
  double get_output(std::size_t port) const;

  double parameter(std::string_view name) const;

  // Time is kept as start + count * h per run of equal steps so long runs do
  // not accumulate rounding from repeated addition.
  double current_time() const {
    return segment_start_ + static_cast<double>(segment_steps_) * segment_step_;
  }
  std::uint64_t step_count() const { return total_steps_; }

 protected:
  double input(std::size_t port) const { return values_[port]; }
  bool input_flag(std::size_t port) const { return values_[port] != 0.0; }
  void set_output(std::size_t port, double value) { values_[port] = value; }
  double parameter_value(std::size_t port) const { return values_[port]; }
  // Time this unit will report once the step of size h in progress completes.
  double step_end_time(double h) const {
    return h == segment_step_ ? segment_start_ + static_cast<double>(segment_steps_ + 1) * h
                              : current_time() + h;
  }
  // For parameters a unit derives from others when they are not supplied.
  void set_derived_parameter(std::size_t port, double value) { values_[port] = value; }

  virtual void step(double h) = 0;

 private:
  friend std::unique_ptr<SimUnit> instantiate_unit(const UnitRegistry&, std::string_view,
                                                   const ParameterMap&, const UnitResources&);

  void check_direction(std::size_t port, PortDirection expected, std::string_view action) const;

  std::shared_ptr<const UnitDescription> description_;
  // One slot per port: latched input, current output, or parameter value.
  std::vector<double> values_;
  double segment_start_ = 0.0;
  double segment_step_ = 0.0;
  std::uint64_t segment_steps_ = 0;
  std::uint64_t total_steps_ = 0;
};

// Builds a unit from fully resolved parameters (defaults already applied).
using UnitFactory = std::function<std::unique_ptr<SimUnit>(
    std::shared_ptr<const UnitDescription>, const ParameterMap&, const UnitResources&)>;

struct UnitRegistry {
  struct Entry {
    std::shared_ptr<const UnitDescription> description;
    UnitFactory factory;
  };

  void add(UnitDescription description, UnitFactory factory);
  const Entry* find(std::string_view unit_type) const;
  std::vector<std::string> unit_types() const;

  std::map<std::string, Entry, std::less<>> entries;
};

// Resolves parameters against the description (unknown name, wrong direction
// and non-finite values throw std::invalid_argument) and constructs the unit.
std::unique_ptr<SimUnit> instantiate_unit(const UnitRegistry& registry, std::string_view unit_type,
                                          const ParameterMap& parameters,
                                          const UnitResources& resources = {});

}  // namespace fieldcosim
