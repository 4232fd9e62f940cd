#pragma once

#include <stdexcept>

#include "cerebloop/cerebellum.hpp"

namespace cerebloop {

/// One pull-only tendon actuator: a PWM-driven winch in series with a
/// stiffening spring.
struct ActuatorParams {
  /// No-load winding speed at full duty (m/s).
  double k_m = 0.3;
  /// Tendon force at which the winch stalls at full duty (N). The winch
  /// back-drives when the tendon pulls harder than duty * f_stall.
  double f_stall = 20.0;
  double tau_mot_ms = 20.0;
  /// Spring law F = k1 x + k2 x^2 (N/m, N/m^2).
  double k1 = 500.0;
  double k2 = 20000.0;
  /// Added to the spring extension; negative values model slack (m).
  double slack_offset = 0.0;

  void validate() const;
};

struct PlantParams {
  double inertia = 0.02;     // kg m^2
  double damping = 0.15;     // N m s / rad
  double moment_arm = 0.02;  // m
  ActuatorParams left;
  ActuatorParams right;
  double phi_lim_deg = 60.0;
  double stop_stiffness = 20.0;  // N m / rad beyond the limit
  double stop_damping = 1.0;     // N m s / rad beyond the limit

  const ActuatorParams& actuator(Side s) const { return s == Side::left ? left : right; }
  void validate() const;
};

struct TendonState {
  double duty = 0.0;    // motor drive after the first-order lag
  double wound = 0.0;   // m of tendon taken up by the winch
  double spring_x = 0.0;
  double force = 0.0;
};

struct PlantState {
  double phi_deg = 0.0;
  double phi_dot_deg = 0.0;
  TendonState left;
  TendonState right;

  TendonState& tendon(Side s) { return s == Side::left ? left : right; }
  const TendonState& tendon(Side s) const { return s == Side::left ? left : right; }
};

class PlantFault : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Tendon force for spring extension `x` (zero for a slack tendon).
double spring_force(double x, const ActuatorParams& p);
double spring_energy(double x, const ActuatorParams& p);

/// Spring extension for a tendon at joint angle `phi_deg`; s_L = +1, s_R = -1.
double spring_extension(Side side, double wound, double phi_deg, const PlantParams& p);

/// Torque from tendons, viscous damping and joint stops (N m).
double joint_torque(const PlantState& s, const PlantParams& p);

/// One semi-implicit Euler step. Duties are clamped to [0, 1].
PlantState plant_step(const PlantState& state, double duty_left, double duty_right, const PlantParams& params,
                      double dt_ms);

/// Kinetic energy plus the energy stored in both springs (J).
double mechanical_energy(const PlantState& s, const PlantParams& p);

/// |d torque / d phi| with the wound lengths held fixed, by central
/// difference (N m / rad).
double joint_stiffness(const PlantState& s, const PlantParams& p);

/// Rest state with both winches wound to the same tendon force.
PlantState pretensioned_state(double force, const PlantParams& p);

struct PidConfig {
  double k_p = 1.0;
  double k_i = 0.0;
  double k_d = 0.0;
  double integral_limit = 50.0;  // deg s
  /// Controller output that maps to a full-scale teaching signal.
  double u_max = 10.0;
  double period_ms = 50.0;

  void validate() const;
};

struct PidState {
  double integral = 0.0;
  double prev_error = 0.0;
  bool has_prev = false;
};

struct TeachingSignal {
  double eps_left = 0.0;
  double eps_right = 0.0;
  double u = 0.0;
};

/// One 20 Hz teacher update on e = phi_set - phi_act (deg). Positive output
/// asks the right actuator to pull harder.
TeachingSignal pid_teacher(double phi_set, double phi_act, PidState& state, const PidConfig& cfg);

}  // namespace cerebloop
