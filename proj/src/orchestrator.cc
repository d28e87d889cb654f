#include "fieldcosim/orchestrator.h"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fieldcosim/errors.h"
#include "fieldcosim/grid_map.h"
#include "fieldcosim/numeric_format.h"
#include "fieldcosim/traces.h"
#include "fieldcosim/units.h"
#include "json.hpp"

namespace fieldcosim {

using json = nlohmann::ordered_json;

PortRef PortRef::parse(std::string_view text) {
  text = trim(text);
  const auto dot = text.rfind('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == text.size()) {
    throw ConfigError("malformed port reference '" + std::string(text) +
                      "', expected '<instance>.<port>'");
  }
  return PortRef{std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
}

std::uint64_t macro_step_count(double duration, double step_size) {
  if (!(duration > 0.0)) return 0;
  const double ratio = duration / step_size;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) {
    return static_cast<std::uint64_t>(nearest);
  }
  return static_cast<std::uint64_t>(std::ceil(ratio));
}

namespace {

struct PortLookup {
  const UnitDescription* unit = nullptr;
  const PortDescriptor* port = nullptr;
};

class ConfigChecker {
 public:
  ConfigChecker(const MultiModelConfig& config, const UnitRegistry& registry)
      : config_(config), registry_(registry) {}

  std::vector<std::string> run() {
    check_timing();
    check_instances();
    check_connections();
    check_inputs();
    check_outputs();
    return std::move(diagnostics_);
  }

 private:
  void report(std::string message) { diagnostics_.push_back(std::move(message)); }

  void check_timing() {
    const double h = config_.step_size;
    const double t = config_.duration;
    if (!(h > 0.0) || !std::isfinite(h)) {
      report("step_size must be positive and finite (got " + format_real(h) + ")");
    }
    if (!(t >= 0.0) || !std::isfinite(t)) {
      report("duration must be non-negative and finite (got " + format_real(t) + ")");
    }
    if (h > 0.0 && std::isfinite(h) && t >= 0.0 && std::isfinite(t) && t / h > kMaxStepsPerRun) {
      report("duration/step_size exceeds the limit of 1e8 steps");
    }
  }

  void check_instances() {
    for (const auto& [name, spec] : config_.instances) {
      if (name.empty()) {
        report("instance with an empty name");
        continue;
      }
      const auto* entry = registry_.find(spec.unit_type);
      if (!entry) {
        report("instance '" + name + "': unknown unit type '" + spec.unit_type + "'");
        continue;
      }
      for (const auto& [param, value] : spec.parameters) {
        const auto index = entry->description->find_port(param);
        if (!index || entry->description->ports[*index].direction != PortDirection::kParameter) {
          report("instance '" + name + "': unknown parameter '" + name + "." + param + "'");
        } else if (!std::isfinite(value)) {
          report("instance '" + name + "': non-finite value for parameter '" + name + "." +
                 param + "'");
        }
      }
    }
  }

  // Resolves a reference, reporting at most one diagnostic on failure.
  std::optional<PortLookup> resolve(const PortRef& ref, const std::string& context) {
    const auto it = config_.instances.find(ref.instance);
    if (it == config_.instances.end()) {
      report(context + ": unknown instance in '" + ref.str() + "'");
      return std::nullopt;
    }
    const auto* entry = registry_.find(it->second.unit_type);
    if (!entry) return std::nullopt;  // already reported by check_instances
    const auto index = entry->description->find_port(ref.port);
    if (!index) {
      report(context + ": unknown port '" + ref.str() + "'");
      return std::nullopt;
    }
    return PortLookup{entry->description.get(), &entry->description->ports[*index]};
  }

  void check_connections() {
    std::map<PortRef, int> fan_in;
    for (const auto& c : config_.connections) {
      const std::string context = "connection " + c.source.str() + " -> " + c.sink.str();
      const auto source = resolve(c.source, context);
      const auto sink = resolve(c.sink, context);
      if (source && source->port->direction != PortDirection::kOutput) {
        report(context + ": source '" + c.source.str() + "' is not an output port");
      }
      if (sink && sink->port->direction != PortDirection::kInput) {
        report(context + ": sink '" + c.sink.str() + "' is not an input port");
      }
      if (c.source.instance == c.sink.instance) {
        report(context + ": source and sink belong to the same instance '" + c.source.instance +
               "'");
      }
      ++fan_in[c.sink];
    }
    for (const auto& [sink, count] : fan_in) {
      if (count > 1) {
        report("input '" + sink.str() + "' has " + std::to_string(count) +
               " incoming connections (fan-in is not allowed)");
      }
    }
  }

  void check_inputs() {
    for (const auto& [ref, value] : config_.initial_inputs) {
      const std::string context = "initial input '" + ref.str() + "'";
      const auto port = resolve(ref, context);
      if (port && port->port->direction != PortDirection::kInput) {
        report(context + ": '" + ref.str() + "' is not an input port");
      }
      if (!std::isfinite(value)) report(context + ": value is not finite");
    }
  }

  void check_outputs() {
    std::set<PortRef> seen;
    for (const auto& ref : config_.outputs) {
      const std::string context = "recorded output '" + ref.str() + "'";
      const auto port = resolve(ref, context);
      if (port && port->port->direction != PortDirection::kOutput) {
        report(context + ": '" + ref.str() + "' is not an output port");
      }
      if (!seen.insert(ref).second) report(context + ": listed more than once");
    }
  }

  const MultiModelConfig& config_;
  const UnitRegistry& registry_;
  std::vector<std::string> diagnostics_;
};

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& line : lines) {
    if (!out.empty()) out += '\n';
    out += line;
  }
  return out;
}

}  // namespace

std::vector<std::string> validate_config(const MultiModelConfig& config,
                                         const UnitRegistry& registry) {
  return ConfigChecker(config, registry).run();
}

std::vector<std::string> validate_config(const MultiModelConfig& config) {
  return validate_config(config, units::builtin_registry());
}

TimedTrace run_cosim(const MultiModelConfig& config) {
  return run_cosim(config, units::builtin_registry());
}

TimedTrace run_cosim(const MultiModelConfig& config, const UnitRegistry& registry) {
  const auto diagnostics = validate_config(config, registry);
  if (!diagnostics.empty()) {
    throw ConfigError("invalid multi-model configuration:\n" + join_lines(diagnostics));
  }

  std::vector<std::string> names;
  std::vector<std::unique_ptr<SimUnit>> units;
  std::map<std::string, std::size_t> slot;
  for (const auto& [name, spec] : config.instances) {
    try {
      units.push_back(instantiate_unit(registry, spec.unit_type, spec.parameters, spec.resources));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("instance '" + name + "': " + e.what());
    }
    slot[name] = names.size();
    names.push_back(name);
  }

  struct Link {
    std::size_t source_unit, source_port, sink_unit, sink_port;
  };
  std::vector<Link> links;
  for (const auto& c : config.connections) {
    const std::size_t su = slot.at(c.source.instance);
    const std::size_t ku = slot.at(c.sink.instance);
    links.push_back(
        {su, units[su]->port_index(c.source.port), ku, units[ku]->port_index(c.sink.port)});
  }
  for (const auto& [ref, value] : config.initial_inputs) {
    units[slot.at(ref.instance)]->set_input(ref.port, value);
  }

  std::vector<std::pair<std::size_t, std::size_t>> recorded;
  TimedTrace trace;
  for (const auto& ref : config.outputs) {
    const std::size_t u = slot.at(ref.instance);
    recorded.emplace_back(u, units[u]->port_index(ref.port));
    trace.channels.push_back(ref.str());
  }

  const double h = config.step_size;
  auto record = [&](double t) {
    std::vector<double> values;
    values.reserve(recorded.size());
    for (const auto& [u, p] : recorded) {
      const double v = units[u]->get_output(p);
      if (!std::isfinite(v)) {
        throw SimulationError("instance '" + names[u] + "' produced a non-finite value on '" +
                              units[u]->description().ports[p].name + "' at t=" + format_real(t));
      }
      values.push_back(v);
    }
    trace.append(t, std::move(values));
  };

  const std::uint64_t steps = macro_step_count(config.duration, h);
  trace.rows.reserve(static_cast<std::size_t>(steps) + 1);
  record(0.0);

  std::vector<double> exchange(links.size());
  for (std::uint64_t k = 1; k <= steps; ++k) {
    const double t_start = static_cast<double>(k - 1) * h;
    for (std::size_t i = 0; i < links.size(); ++i) {
      exchange[i] = units[links[i].source_unit]->get_output(links[i].source_port);
    }
    for (std::size_t i = 0; i < links.size(); ++i) {
      try {
        units[links[i].sink_unit]->set_input(links[i].sink_port, exchange[i]);
      } catch (const std::exception& e) {
        throw SimulationError("instance '" + names[links[i].sink_unit] + "' at t=" +
                              format_real(t_start) + ": " + e.what());
      }
    }
    for (std::size_t u = 0; u < units.size(); ++u) {
      try {
        units[u]->do_step(h);
      } catch (const std::exception& e) {
        throw SimulationError("instance '" + names[u] + "' failed stepping from t=" +
                              format_real(t_start) + ": " + e.what());
      }
    }
    record(static_cast<double>(k) * h);
  }
  return trace;
}

void write_results_csv(const TimedTrace& trace, std::ostream& out) {
  std::string text = "time";
  for (const auto& channel : trace.channels) {
    text += ',';
    text += channel;
  }
  text += '\n';
  for (const auto& row : trace.rows) {
    text += format_real(row.time);
    for (double v : row.values) {
      text += ',';
      text += format_real(v);
    }
    text += '\n';
  }
  out << text;
}

void write_results_csv(const TimedTrace& trace, const std::filesystem::path& path) {
  trace.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  write_results_csv(trace, out);
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

namespace {

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& file) {
  std::filesystem::path p(file);
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

double number_at(const json& value, const std::string& where) {
  if (!value.is_number()) throw ConfigError(where + ": expected a number");
  return value.get<double>();
}

void reject_unknown_keys(const json& object, std::initializer_list<std::string_view> allowed,
                         const std::string& where) {
  for (const auto& [key, value] : object.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

InstanceSpec parse_instance(const std::string& name, const json& node,
                            const std::filesystem::path& base_dir) {
  const std::string where = "instance '" + name + "'";
  if (!node.is_object()) throw ConfigError(where + ": expected an object");
  reject_unknown_keys(node, {"type", "parameters", "trace", "path", "map", "description"}, where);
  InstanceSpec spec;
  if (!node.contains("type") || !node["type"].is_string()) {
    throw ConfigError(where + ": missing string field 'type'");
  }
  spec.unit_type = node["type"].get<std::string>();
  if (node.contains("parameters")) {
    const auto& params = node["parameters"];
    if (!params.is_object()) throw ConfigError(where + ": 'parameters' must be an object");
    for (const auto& [key, value] : params.items()) {
      spec.parameters[key] = number_at(value, where + " parameter '" + key + "'");
    }
  }
  if (node.contains("trace")) {
    if (!node["trace"].is_string()) throw ConfigError(where + ": 'trace' must be a path");
    spec.resources.trace = read_trace_csv(resolve_path(base_dir, node["trace"].get<std::string>()));
  }
  if (node.contains("map")) {
    if (!node["map"].is_string()) throw ConfigError(where + ": 'map' must be a path");
    spec.resources.map = read_grid_map(resolve_path(base_dir, node["map"].get<std::string>()));
  }
  if (node.contains("path")) {
    const auto& path = node["path"];
    if (!path.is_array()) throw ConfigError(where + ": 'path' must be an array of [x, y]");
    for (const auto& point : path) {
      if (!point.is_array() || point.size() != 2) {
        throw ConfigError(where + ": every waypoint must be [x, y]");
      }
      spec.resources.path.push_back(
          {number_at(point[0], where + " waypoint"), number_at(point[1], where + " waypoint")});
    }
  }
  return spec;
}

PortRef parse_ref(const json& value, const std::string& where) {
  if (!value.is_string()) throw ConfigError(where + ": expected a port reference string");
  return PortRef::parse(value.get<std::string>());
}

}  // namespace

MultiModelConfig parse_multimodel_config(std::string_view text,
                                         const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("multi-model config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("multi-model config must be a JSON object");
  reject_unknown_keys(
      doc, {"instances", "connections", "inputs", "outputs", "step_size", "duration", "description"},
      "multi-model config");

  MultiModelConfig config;
  if (!doc.contains("instances") || !doc["instances"].is_object()) {
    throw ConfigError("multi-model config: 'instances' must be an object");
  }
  for (const auto& [name, node] : doc["instances"].items()) {
    config.instances[name] = parse_instance(name, node, base_dir);
  }

  if (doc.contains("connections")) {
    const auto& conns = doc["connections"];
    if (conns.is_array()) {
      for (const auto& c : conns) {
        if (!c.is_object() || !c.contains("from") || !c.contains("to")) {
          throw ConfigError("connections: each entry needs 'from' and 'to'");
        }
        config.connections.push_back(
            {parse_ref(c["from"], "connection"), parse_ref(c["to"], "connection")});
      }
    } else if (conns.is_object()) {
      // INTO-CPS style: { "src.port": ["sink.port", ...] }
      for (const auto& [from, sinks] : conns.items()) {
        const PortRef source = PortRef::parse(from);
        if (!sinks.is_array()) throw ConfigError("connections['" + from + "'] must be an array");
        for (const auto& sink : sinks) {
          config.connections.push_back({source, parse_ref(sink, "connection sink")});
        }
      }
    } else {
      throw ConfigError("'connections' must be an array or an object");
    }
  }

  if (doc.contains("inputs")) {
    if (!doc["inputs"].is_object()) throw ConfigError("'inputs' must be an object");
    for (const auto& [ref, value] : doc["inputs"].items()) {
      config.initial_inputs[PortRef::parse(ref)] = number_at(value, "input '" + ref + "'");
    }
  }
  if (doc.contains("outputs")) {
    if (!doc["outputs"].is_array()) throw ConfigError("'outputs' must be an array");
    for (const auto& ref : doc["outputs"]) config.outputs.push_back(parse_ref(ref, "outputs"));
  }
  if (doc.contains("step_size")) config.step_size = number_at(doc["step_size"], "step_size");
  if (doc.contains("duration")) config.duration = number_at(doc["duration"], "duration");
  return config;
}

MultiModelConfig read_multimodel_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open multi-model config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_multimodel_config(buffer.str(), path.parent_path());
}

}  // namespace fieldcosim
