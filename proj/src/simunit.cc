#include "fieldcosim/simunit.h"

#include <cmath>
#include <set>
#include <stdexcept>

namespace fieldcosim {

std::string_view to_string(PortDirection direction) {
  switch (direction) {
    case PortDirection::kInput:
      return "input";
    case PortDirection::kOutput:
      return "output";
    case PortDirection::kParameter:
      return "parameter";
  }
  return "?";
}

std::optional<std::size_t> UnitDescription::find_port(std::string_view name) const {
  for (std::size_t i = 0; i < ports.size(); ++i) {
    if (ports[i].name == name) return i;
  }
  return std::nullopt;
}

void UnitDescription::validate() const {
  std::set<std::string> names;
  for (const auto& port : ports) {
    if (port.name.empty()) throw std::invalid_argument(unit_type + ": empty port name");
    if (!names.insert(port.name).second) {
      throw std::invalid_argument(unit_type + ": duplicate port '" + port.name + "'");
    }
  }
  for (const auto& [name, value] : default_parameters) {
    const auto index = find_port(name);
    if (!index || ports[*index].direction != PortDirection::kParameter) {
      throw std::invalid_argument(unit_type + ": default for non-parameter '" + name + "'");
    }
    if (!std::isfinite(value)) {
      throw std::invalid_argument(unit_type + ": non-finite default for '" + name + "'");
    }
  }
}

SimUnit::SimUnit(std::shared_ptr<const UnitDescription> description)
    : description_(std::move(description)), values_(description_->ports.size(), 0.0) {}

std::size_t SimUnit::port_index(std::string_view name) const {
  const auto index = description_->find_port(name);
  if (!index) {
    throw std::invalid_argument(description_->unit_type + ": unknown port '" + std::string(name) +
                                "'");
  }
  return *index;
}

void SimUnit::check_direction(std::size_t port, PortDirection expected,
                              std::string_view action) const {
  if (port >= values_.size()) {
    throw std::invalid_argument(description_->unit_type + ": port index out of range");
  }
  const auto& desc = description_->ports[port];
  if (desc.direction != expected) {
    throw std::invalid_argument(description_->unit_type + ": cannot " + std::string(action) +
                                " '" + desc.name + "', it is an " +
                                std::string(to_string(desc.direction)) + " port");
  }
}

void SimUnit::set_input(std::string_view port, double value) { set_input(port_index(port), value); }

void SimUnit::set_input(std::size_t port, double value) {
  check_direction(port, PortDirection::kInput, "set input");
  if (!std::isfinite(value)) {
    throw std::invalid_argument(description_->unit_type + ": non-finite value for input '" +
                                description_->ports[port].name + "'");
  }
  values_[port] = value;
}

void SimUnit::do_step(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw std::invalid_argument(description_->unit_type + ": step size must be positive and finite");
  }
  step(h);
  if (h != segment_step_) {
    segment_start_ = current_time();
    segment_step_ = h;
    segment_steps_ = 0;
  }
  ++segment_steps_;
  ++total_steps_;
}

double SimUnit::get_output(std::string_view port) const { return get_output(port_index(port)); }

double SimUnit::get_output(std::size_t port) const {
  check_direction(port, PortDirection::kOutput, "read output");
  return values_[port];
}

double SimUnit::parameter(std::string_view name) const {
  const std::size_t index = port_index(name);
  check_direction(index, PortDirection::kParameter, "read parameter");
  return values_[index];
}

void UnitRegistry::add(UnitDescription description, UnitFactory factory) {
  description.validate();
  std::string key = description.unit_type;
  entries.insert_or_assign(
      std::move(key),
      Entry{std::make_shared<const UnitDescription>(std::move(description)), std::move(factory)});
}

const UnitRegistry::Entry* UnitRegistry::find(std::string_view unit_type) const {
  const auto it = entries.find(unit_type);
  return it == entries.end() ? nullptr : &it->second;
}

std::vector<std::string> UnitRegistry::unit_types() const {
  std::vector<std::string> out;
  for (const auto& [name, entry] : entries) out.push_back(name);
  return out;
}

std::unique_ptr<SimUnit> instantiate_unit(const UnitRegistry& registry, std::string_view unit_type,
                                          const ParameterMap& parameters,
                                          const UnitResources& resources) {
  const auto* entry = registry.find(unit_type);
  if (!entry) {
    throw std::invalid_argument("unknown unit type '" + std::string(unit_type) + "'");
  }
  const auto& desc = *entry->description;
  ParameterMap resolved = desc.default_parameters;
  for (const auto& [name, value] : parameters) {
    const auto index = desc.find_port(name);
    if (!index || desc.ports[*index].direction != PortDirection::kParameter) {
      throw std::invalid_argument(desc.unit_type + ": unknown parameter '" + name + "'");
    }
    if (!std::isfinite(value)) {
      throw std::invalid_argument(desc.unit_type + ": non-finite value for parameter '" + name +
                                  "'");
    }
    resolved.insert_or_assign(name, value);
  }
  auto unit = entry->factory(entry->description, resolved, resources);
  for (const auto& [name, value] : resolved) {
    unit->values_[*desc.find_port(name)] = value;
  }
  return unit;
}

}  // namespace fieldcosim
