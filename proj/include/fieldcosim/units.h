#pragma once

// Built-in simulation units: dynamic bicycle vehicle, pure-pursuit path
// follower, input replay, combined range sensor, obstacle environment and the
// supervisory braking controller.

#include <optional>
#include <span>
#include <string_view>

#include "fieldcosim/grid_map.h"
#include "fieldcosim/simunit.h"

namespace fieldcosim::units {

inline constexpr std::string_view kVehicle = "vehicle";
inline constexpr std::string_view kPurePursuit = "pure_pursuit";
inline constexpr std::string_view kReplay = "replay";
inline constexpr std::string_view kSensor = "sensor";
inline constexpr std::string_view kEnvironment = "environment";
inline constexpr std::string_view kSupervisory = "supervisory";

// Below this forward speed the slip-angle model is not used and the lateral
// states relax to zero with kLowSpeedTimeConstant.
inline constexpr double kMinSlipSpeed = 0.1;
inline constexpr double kLowSpeedTimeConstant = 0.2;

double wrap_angle(double angle);  // into (-pi, pi]

struct VehicleParams {
  double m_robot = 2000.0;   // kg
  double cAlphaF = 29000.0;  // N/rad
  double cAlphaR = 29000.0;  // N/rad
  double mu = 0.5;
  double l_f = 0.6;  // m, CoG to front axle
  double l_r = 0.6;  // m, CoG to rear axle
  double I_z = 2000.0 * 0.6 * 0.6;
  double g = 9.81;

  double wheelbase() const { return l_f + l_r; }
  double max_axle_force() const { return mu * m_robot * g / 2.0; }
  // Throws std::invalid_argument.
  void validate() const;
};

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v_y = 0.0;  // lateral body velocity
  double r = 0.0;    // yaw rate

  bool operator==(const VehicleState&) const = default;
};

struct AxleForces {
  double front = 0.0;
  double rear = 0.0;
};

// One explicit-Euler step of the single-track model with inputs held over h.
VehicleState vehicle_euler_step(const VehicleParams& params, const VehicleState& state,
                                double velocity, double delta_f, double h,
                                AxleForces* forces = nullptr);

struct SensorParams {
  double min_range = 0.5;
  double max_range = 10.0;
  double fov = 3.14159265358979323846;
  int ray_count = 64;

  void validate() const;
};

struct SensorReading {
  bool detected = false;
  double distance = -1.0;  // -1 when nothing is detected
};

SensorReading cast_rays(const SensorParams& params, const GridMap& map, double x, double y,
                        double theta);

struct SteeringCommand {
  double velocity = 0.0;
  double delta_f = 0.0;
};

// Stateless pure-pursuit law over a polyline path.
class PurePursuit {
 public:
  PurePursuit(std::vector<Waypoint> path, double lookahead, double cruise_speed,
              double wheelbase);

  SteeringCommand command(double x, double y, double theta) const;

  // Arc-length position of the closest point on the path.
  double nearest_arc_position(double x, double y) const;
  Waypoint point_at(double arc) const;
  double length() const { return cumulative_.back(); }

 private:
  std::vector<Waypoint> path_;
  std::vector<double> cumulative_;
  double lookahead_;
  double cruise_speed_;
  double wheelbase_;
};

inline double braking_distance(double speed, double decel) { return speed * speed / (2.0 * decel); }

// Unit descriptions and factories for every built-in unit type.
const UnitRegistry& builtin_registry();

VehicleParams vehicle_params_from(const ParameterMap& resolved);
SensorParams sensor_params_from(const ParameterMap& resolved);

}  // namespace fieldcosim::units
