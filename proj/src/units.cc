#include "fieldcosim/units.h"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace fieldcosim::units {
namespace {

PortDescriptor in(std::string name, PortKind kind = PortKind::kReal) {
  return {std::move(name), PortDirection::kInput, kind};
}
PortDescriptor out(std::string name, PortKind kind = PortKind::kReal) {
  return {std::move(name), PortDirection::kOutput, kind};
}
PortDescriptor param(std::string name) {
  return {std::move(name), PortDirection::kParameter, PortKind::kReal};
}

double get_or(const ParameterMap& map, std::string_view key, double fallback) {
  const auto it = map.find(key);
  return it == map.end() ? fallback : it->second;
}

// ---------------------------------------------------------------------------
// vehicle

class VehicleUnit final : public SimUnit {
 public:
  VehicleUnit(std::shared_ptr<const UnitDescription> desc, const ParameterMap& resolved)
      : SimUnit(std::move(desc)), params_(vehicle_params_from(resolved)) {
    const auto& d = description();
    velocity_ = *d.find_port("velocity");
    delta_f_ = *d.find_port("delta_f");
    x_ = *d.find_port("x");
    y_ = *d.find_port("y");
    theta_ = *d.find_port("theta");
    v_y_ = *d.find_port("v_y");
    r_ = *d.find_port("r");
    force_f_ = *d.find_port("Fy_f");
    force_r_ = *d.find_port("Fy_r");
    set_derived_parameter(*d.find_port("cAlphaR"), params_.cAlphaR);
    set_derived_parameter(*d.find_port("I_z"), params_.I_z);

    state_.x = get_or(resolved, "x0", 0.0);
    state_.y = get_or(resolved, "y0", 0.0);
    state_.theta = wrap_angle(get_or(resolved, "theta0", 0.0));
    publish({});
  }

 protected:
  void step(double h) override {
    AxleForces forces;
    state_ = vehicle_euler_step(params_, state_, input(velocity_), input(delta_f_), h, &forces);
    publish(forces);
  }

 private:
  void publish(const AxleForces& forces) {
    set_output(x_, state_.x);
    set_output(y_, state_.y);
    set_output(theta_, state_.theta);
    set_output(v_y_, state_.v_y);
    set_output(r_, state_.r);
    set_output(force_f_, forces.front);
    set_output(force_r_, forces.rear);
  }

  VehicleParams params_;
  VehicleState state_;
  std::size_t velocity_, delta_f_, x_, y_, theta_, v_y_, r_, force_f_, force_r_;
};

UnitDescription vehicle_description() {
  UnitDescription d;
  d.unit_type = std::string(kVehicle);
  d.ports = {in("velocity"), in("delta_f"), out("x"),         out("y"),      out("theta"),
             out("v_y"),     out("r"),       out("Fy_f"),      out("Fy_r"),   param("m_robot"),
             param("cAlphaF"), param("cAlphaR"), param("mu"), param("l_f"),  param("l_r"),
             param("I_z"),   param("g"),     param("x0"),      param("y0"),   param("theta0")};
  const VehicleParams defaults;
  d.default_parameters = {{"m_robot", defaults.m_robot}, {"cAlphaF", defaults.cAlphaF},
                          {"mu", defaults.mu},           {"l_f", defaults.l_f},
                          {"l_r", defaults.l_r},         {"g", defaults.g},
                          {"x0", 0.0},                   {"y0", 0.0},
                          {"theta0", 0.0}};
  return d;
}

// ---------------------------------------------------------------------------
// pure_pursuit

class PurePursuitUnit final : public SimUnit {
 public:
  PurePursuitUnit(std::shared_ptr<const UnitDescription> desc, const ParameterMap& resolved,
                  const UnitResources& resources)
      : SimUnit(std::move(desc)),
        law_(resources.path, get_or(resolved, "lookahead", 1.0),
             get_or(resolved, "cruise_speed", 1.0), get_or(resolved, "wheelbase", 1.2)) {
    const auto& d = description();
    x_ = *d.find_port("x");
    y_ = *d.find_port("y");
    theta_ = *d.find_port("theta");
    velocity_ = *d.find_port("velocity");
    delta_f_ = *d.find_port("delta_f");
    publish(law_.command(0.0, 0.0, 0.0));
  }

 protected:
  void step(double) override { publish(law_.command(input(x_), input(y_), input(theta_))); }

 private:
  void publish(const SteeringCommand& cmd) {
    set_output(velocity_, cmd.velocity);
    set_output(delta_f_, cmd.delta_f);
  }

  PurePursuit law_;
  std::size_t x_, y_, theta_, velocity_, delta_f_;
};

UnitDescription pure_pursuit_description() {
  UnitDescription d;
  d.unit_type = std::string(kPurePursuit);
  d.ports = {in("x"),           in("y"),          in("theta"),         out("velocity"),
             out("delta_f"),    param("lookahead"), param("cruise_speed"), param("wheelbase")};
  d.default_parameters = {{"lookahead", 1.0}, {"cruise_speed", 1.0}, {"wheelbase", 1.2}};
  return d;
}

// ---------------------------------------------------------------------------
// replay

class ReplayUnit final : public SimUnit {
 public:
  ReplayUnit(std::shared_ptr<const UnitDescription> desc, const UnitResources& resources)
      : SimUnit(std::move(desc)) {
    if (!resources.trace) throw std::invalid_argument("replay: no input trace supplied");
    const TimedTrace& trace = *resources.trace;
    if (trace.empty()) throw std::invalid_argument("replay: input trace is empty");
    if (!trace.has_channel("velocity") || !trace.has_channel("delta_f")) {
      throw std::invalid_argument("replay: trace channels must include velocity and delta_f");
    }
    trace.validate();
    const std::size_t vi = trace.channel_index("velocity");
    const std::size_t di = trace.channel_index("delta_f");
    for (const auto& row : trace.rows) {
      times_.push_back(row.time);
      velocity_values_.push_back(row.values[vi]);
      delta_values_.push_back(row.values[di]);
    }
    velocity_ = *description().find_port("velocity");
    delta_f_ = *description().find_port("delta_f");
    publish(0.0);
  }

 protected:
  void step(double h) override { publish(step_end_time(h)); }

 private:
  void publish(double t) {
    // Zero-order hold: last row with time <= t; the first row before the trace
    // starts. Tolerance absorbs k*h versus k*sample_period rounding.
    const double probe = t + 1e-9 * std::max(1.0, std::abs(t));
    const auto it = std::upper_bound(times_.begin(), times_.end(), probe);
    const std::size_t i = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
    set_output(velocity_, velocity_values_[i]);
    set_output(delta_f_, delta_values_[i]);
  }

  std::vector<double> times_, velocity_values_, delta_values_;
  std::size_t velocity_, delta_f_;
};

UnitDescription replay_description() {
  UnitDescription d;
  d.unit_type = std::string(kReplay);
  d.ports = {out("velocity"), out("delta_f")};
  return d;
}

// ---------------------------------------------------------------------------
// sensor

class SensorUnit final : public SimUnit {
 public:
  SensorUnit(std::shared_ptr<const UnitDescription> desc, const ParameterMap& resolved,
             const UnitResources& resources)
      : SimUnit(std::move(desc)), params_(sensor_params_from(resolved)) {
    if (!resources.map) throw std::invalid_argument("sensor: no grid map supplied");
    map_ = *resources.map;
    const auto& d = description();
    x_ = *d.find_port("x");
    y_ = *d.find_port("y");
    theta_ = *d.find_port("theta");
    detected_ = *d.find_port("obstacle_detected");
    distance_ = *d.find_port("obstacle_distance");
    publish(cast_rays(params_, map_, 0.0, 0.0, 0.0));
  }

 protected:
  void step(double) override {
    publish(cast_rays(params_, map_, input(x_), input(y_), input(theta_)));
  }

 private:
  void publish(const SensorReading& reading) {
    set_output(detected_, reading.detected ? 1.0 : 0.0);
    set_output(distance_, reading.distance);
  }

  SensorParams params_;
  GridMap map_;
  std::size_t x_, y_, theta_, detected_, distance_;
};

UnitDescription sensor_description() {
  UnitDescription d;
  d.unit_type = std::string(kSensor);
  d.ports = {in("x"),
             in("y"),
             in("theta"),
             out("obstacle_detected", PortKind::kBoolean),
             out("obstacle_distance"),
             param("min_range"),
             param("max_range"),
             param("fov"),
             param("ray_count")};
  const SensorParams defaults;
  d.default_parameters = {{"min_range", defaults.min_range},
                          {"max_range", defaults.max_range},
                          {"fov", defaults.fov},
                          {"ray_count", static_cast<double>(defaults.ray_count)}};
  return d;
}

// ---------------------------------------------------------------------------
// environment: reports the clearance between the latched pose and the map.

class EnvironmentUnit final : public SimUnit {
 public:
  EnvironmentUnit(std::shared_ptr<const UnitDescription> desc, const UnitResources& resources)
      : SimUnit(std::move(desc)) {
    if (!resources.map) throw std::invalid_argument("environment: no grid map supplied");
    map_ = *resources.map;
    x_ = *description().find_port("x");
    y_ = *description().find_port("y");
    gap_ = *description().find_port("gap");
    collision_ = *description().find_port("collision");
    publish(0.0, 0.0);
  }

 protected:
  void step(double) override { publish(input(x_), input(y_)); }

 private:
  void publish(double x, double y) {
    const auto gap = map_.distance_to_nearest_obstacle(x, y);
    set_output(gap_, gap ? *gap : -1.0);
    set_output(collision_, gap && *gap <= 0.0 ? 1.0 : 0.0);
  }

  GridMap map_;
  std::size_t x_, y_, gap_, collision_;
};

UnitDescription environment_description() {
  UnitDescription d;
  d.unit_type = std::string(kEnvironment);
  d.ports = {in("x"), in("y"), out("gap"), out("collision", PortKind::kBoolean)};
  return d;
}

// ---------------------------------------------------------------------------
// supervisory

class SupervisoryUnit final : public SimUnit {
 public:
  SupervisoryUnit(std::shared_ptr<const UnitDescription> desc, const ParameterMap& resolved)
      : SimUnit(std::move(desc)),
        decel_(get_or(resolved, "decel", 3.0)),
        margin_(get_or(resolved, "margin", 0.2)) {
    if (!(decel_ > 0.0)) throw std::invalid_argument("supervisory: decel must be positive");
    if (!(margin_ >= 0.0)) throw std::invalid_argument("supervisory: margin must be non-negative");
    const auto& d = description();
    cmd_ = *d.find_port("velocity_cmd");
    detected_ = *d.find_port("obstacle_detected");
    distance_ = *d.find_port("obstacle_distance");
    velocity_ = *d.find_port("velocity");
    engaged_ = *d.find_port("stop_engaged");
    publish();
  }

 protected:
  void step(double h) override {
    const double cmd = std::max(0.0, input(cmd_));

    // The last detection is dead-reckoned with the output speed so an
    // obstacle that slips inside the sensor's blind zone is not forgotten.
    if (tracking_) track_distance_ -= speed_ * h;
    // Obstacles are static, so a later reading never moves one away. Near the
    // blind zone oblique rays first hit at about min_range, which would
    // otherwise overwrite a closer dead-reckoned estimate.
    if (input_flag(detected_) && input(distance_) >= 0.0) {
      track_distance_ = tracking_ ? std::min(track_distance_, input(distance_)) : input(distance_);
      tracking_ = true;
    }
    if (tracking_ && track_distance_ < -margin_) tracking_ = false;
    const double nearest =
        tracking_ ? track_distance_ : std::numeric_limits<double>::infinity();

    if (!engaged_flag_ && nearest <= braking_distance(cmd, decel_) + margin_) {
      engaged_flag_ = true;
    }
    if (engaged_flag_) {
      speed_ = std::max(0.0, speed_ - decel_ * h);
      if (speed_ == 0.0 && nearest > braking_distance(cmd, decel_) + margin_) {
        engaged_flag_ = false;
      }
    } else {
      speed_ = cmd;
    }
    publish();
  }

 private:
  void publish() {
    set_output(velocity_, speed_);
    set_output(engaged_, engaged_flag_ ? 1.0 : 0.0);
  }

  double decel_;
  double margin_;
  double speed_ = 0.0;
  bool engaged_flag_ = false;
  bool tracking_ = false;
  double track_distance_ = 0.0;
  std::size_t cmd_, detected_, distance_, velocity_, engaged_;
};

UnitDescription supervisory_description() {
  UnitDescription d;
  d.unit_type = std::string(kSupervisory);
  d.ports = {in("velocity_cmd"),
             in("obstacle_detected", PortKind::kBoolean),
             in("obstacle_distance"),
             out("velocity"),
             out("stop_engaged", PortKind::kBoolean),
             param("decel"),
             param("margin")};
  d.default_parameters = {{"decel", 3.0}, {"margin", 0.2}};
  return d;
}

UnitRegistry make_builtin_registry() {
  UnitRegistry registry;
  registry.add(vehicle_description(),
               [](auto desc, const ParameterMap& p, const UnitResources&) {
                 return std::make_unique<VehicleUnit>(std::move(desc), p);
               });
  registry.add(pure_pursuit_description(),
               [](auto desc, const ParameterMap& p, const UnitResources& r) {
                 return std::make_unique<PurePursuitUnit>(std::move(desc), p, r);
               });
  registry.add(replay_description(), [](auto desc, const ParameterMap&, const UnitResources& r) {
    return std::make_unique<ReplayUnit>(std::move(desc), r);
  });
  registry.add(sensor_description(), [](auto desc, const ParameterMap& p, const UnitResources& r) {
    return std::make_unique<SensorUnit>(std::move(desc), p, r);
  });
  registry.add(environment_description(),
               [](auto desc, const ParameterMap&, const UnitResources& r) {
                 return std::make_unique<EnvironmentUnit>(std::move(desc), r);
               });
  registry.add(supervisory_description(),
               [](auto desc, const ParameterMap& p, const UnitResources&) {
                 return std::make_unique<SupervisoryUnit>(std::move(desc), p);
               });
  return registry;
}

}  // namespace

double wrap_angle(double angle) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double wrapped = std::remainder(angle, kTwoPi);
  if (wrapped <= -std::numbers::pi) wrapped += kTwoPi;
  return wrapped;
}

void VehicleParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("vehicle: ") + name + " must be positive");
    }
  };
  positive(m_robot, "m_robot");
  positive(cAlphaF, "cAlphaF");
  positive(cAlphaR, "cAlphaR");
  positive(mu, "mu");
  positive(l_f, "l_f");
  positive(l_r, "l_r");
  positive(I_z, "I_z");
  positive(g, "g");
  if (mu > 2.0) throw std::invalid_argument("vehicle: mu must lie in (0, 2]");
}

VehicleParams vehicle_params_from(const ParameterMap& resolved) {
  VehicleParams p;
  p.m_robot = get_or(resolved, "m_robot", p.m_robot);
  p.cAlphaF = get_or(resolved, "cAlphaF", p.cAlphaF);
  p.cAlphaR = get_or(resolved, "cAlphaR", p.cAlphaF);
  p.mu = get_or(resolved, "mu", p.mu);
  p.l_f = get_or(resolved, "l_f", p.l_f);
  p.l_r = get_or(resolved, "l_r", p.l_r);
  p.I_z = get_or(resolved, "I_z", p.m_robot * p.l_f * p.l_r);
  p.g = get_or(resolved, "g", p.g);
  p.validate();
  return p;
}

VehicleState vehicle_euler_step(const VehicleParams& p, const VehicleState& s, double velocity,
                                double delta_f, double h, AxleForces* forces) {
  double dv_y = 0.0;
  double dr = 0.0;
  AxleForces f;
  if (velocity < kMinSlipSpeed) {
    dv_y = -s.v_y / kLowSpeedTimeConstant;
    dr = -s.r / kLowSpeedTimeConstant;
  } else {
    const double vx = std::max(velocity, kMinSlipSpeed);
    const double alpha_f = std::atan((s.v_y + p.l_f * s.r) / vx) - delta_f;
    const double alpha_r = std::atan((s.v_y - p.l_r * s.r) / vx);
    const double limit = p.max_axle_force();
    f.front = std::clamp(-p.cAlphaF * alpha_f, -limit, limit);
    f.rear = std::clamp(-p.cAlphaR * alpha_r, -limit, limit);
    assert(std::abs(f.front) <= limit && std::abs(f.rear) <= limit);
    dv_y = (f.front + f.rear) / p.m_robot - velocity * s.r;
    dr = (p.l_f * f.front - p.l_r * f.rear) / p.I_z;
  }
  const double c = std::cos(s.theta);
  const double sn = std::sin(s.theta);
  VehicleState next;
  next.x = s.x + h * (velocity * c - s.v_y * sn);
  next.y = s.y + h * (velocity * sn + s.v_y * c);
  next.theta = wrap_angle(s.theta + h * s.r);
  next.v_y = s.v_y + h * dv_y;
  next.r = s.r + h * dr;
  if (forces) *forces = f;
  return next;
}

void SensorParams::validate() const {
  if (!(min_range >= 0.0) || !(max_range > min_range) || !std::isfinite(max_range)) {
    throw std::invalid_argument("sensor: require 0 <= min_range < max_range");
  }
  if (!(fov >= 0.0) || fov > 2.0 * std::numbers::pi) {
    throw std::invalid_argument("sensor: fov must lie in [0, 2*pi]");
  }
  if (ray_count < 1) throw std::invalid_argument("sensor: ray_count must be positive");
}

SensorParams sensor_params_from(const ParameterMap& resolved) {
  SensorParams p;
  p.min_range = get_or(resolved, "min_range", p.min_range);
  p.max_range = get_or(resolved, "max_range", p.max_range);
  p.fov = get_or(resolved, "fov", p.fov);
  const double rays = get_or(resolved, "ray_count", p.ray_count);
  if (!(rays >= 1.0) || rays != std::floor(rays) || rays > 1e6) {
    throw std::invalid_argument("sensor: ray_count must be a positive integer");
  }
  p.ray_count = static_cast<int>(rays);
  p.validate();
  return p;
}

SensorReading cast_rays(const SensorParams& params, const GridMap& map, double x, double y,
                        double theta) {
  const double march = map.resolution() / 2.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < params.ray_count; ++i) {
    const double angle =
        params.ray_count == 1
            ? theta
            : theta - params.fov / 2.0 + params.fov * i / static_cast<double>(params.ray_count - 1);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t k = 0;; ++k) {
      double d = params.min_range + static_cast<double>(k) * march;
      if (d > params.max_range) {
        // Final sample exactly at the outer edge of the annulus.
        if (d - march >= params.max_range) break;
        d = params.max_range;
      }
      if (d >= best) break;
      if (map.occupied_at(x + d * c, y + d * s)) {
        best = d;
        break;
      }
      if (d == params.max_range) break;
    }
  }
  if (std::isinf(best)) return {};
  return {true, best};
}

PurePursuit::PurePursuit(std::vector<Waypoint> path, double lookahead, double cruise_speed,
                         double wheelbase)
    : path_(std::move(path)), lookahead_(lookahead), cruise_speed_(cruise_speed),
      wheelbase_(wheelbase) {
  if (path_.size() < 2) throw std::invalid_argument("pure_pursuit: path needs >= 2 waypoints");
  if (!(lookahead > 0.0)) throw std::invalid_argument("pure_pursuit: lookahead must be positive");
  if (!(wheelbase > 0.0)) throw std::invalid_argument("pure_pursuit: wheelbase must be positive");
  if (!std::isfinite(cruise_speed)) throw std::invalid_argument("pure_pursuit: bad cruise speed");
  cumulative_.push_back(0.0);
  for (std::size_t i = 1; i < path_.size(); ++i) {
    cumulative_.push_back(cumulative_.back() + std::hypot(path_[i].x - path_[i - 1].x,
                                                          path_[i].y - path_[i - 1].y));
  }
  if (!(cumulative_.back() > 0.0)) {
    throw std::invalid_argument("pure_pursuit: degenerate path (all waypoints coincide)");
  }
}

double PurePursuit::nearest_arc_position(double x, double y) const {
  double best_distance = std::numeric_limits<double>::infinity();
  double best_arc = 0.0;
  for (std::size_t i = 1; i < path_.size(); ++i) {
    const double seg = cumulative_[i] - cumulative_[i - 1];
    if (seg == 0.0) continue;
    const Waypoint& a = path_[i - 1];
    const Waypoint& b = path_[i];
    const double ux = (b.x - a.x) / seg;
    const double uy = (b.y - a.y) / seg;
    const double along = std::clamp((x - a.x) * ux + (y - a.y) * uy, 0.0, seg);
    const double d = std::hypot(a.x + along * ux - x, a.y + along * uy - y);
    if (d < best_distance) {
      best_distance = d;
      best_arc = cumulative_[i - 1] + along;
    }
  }
  return best_arc;
}

Waypoint PurePursuit::point_at(double arc) const {
  arc = std::clamp(arc, 0.0, length());
  const auto it = std::lower_bound(cumulative_.begin() + 1, cumulative_.end(), arc);
  const std::size_t i = it == cumulative_.end() ? path_.size() - 1
                                                : static_cast<std::size_t>(it - cumulative_.begin());
  const double seg = cumulative_[i] - cumulative_[i - 1];
  if (seg == 0.0) return path_[i];
  const double t = (arc - cumulative_[i - 1]) / seg;
  return {path_[i - 1].x + t * (path_[i].x - path_[i - 1].x),
          path_[i - 1].y + t * (path_[i].y - path_[i - 1].y)};
}

SteeringCommand PurePursuit::command(double x, double y, double theta) const {
  const double arc = nearest_arc_position(x, y);
  const Waypoint goal = point_at(arc + lookahead_);
  const double dx = goal.x - x;
  const double dy = goal.y - y;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double x_b = c * dx + s * dy;
  const double y_b = -s * dx + c * dy;
  const double d2 = x_b * x_b + y_b * y_b;
  const double curvature = d2 > 0.0 ? 2.0 * y_b / d2 : 0.0;

  SteeringCommand cmd;
  cmd.delta_f = std::atan(curvature * wheelbase_);
  // Stop once the end of the path is within one lookahead.
  cmd.velocity = length() - arc <= lookahead_ ? 0.0 : cruise_speed_;
  return cmd;
}

const UnitRegistry& builtin_registry() {
  static const UnitRegistry registry = make_builtin_registry();
  return registry;
}

}  // namespace fieldcosim::units
