#include "cerebloop/plant.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cerebloop {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double side_sign(Side s) { return s == Side::left ? 1.0 : -1.0; }

void refresh_tendons(PlantState& s, const PlantParams& p) {
  for (Side side : kSides) {
    auto& t = s.tendon(side);
    t.spring_x = spring_extension(side, t.wound, s.phi_deg, p);
    t.force = spring_force(t.spring_x, p.actuator(side));
  }
}

double tendon_torque(double phi_deg, double wound_l, double wound_r, const PlantParams& p) {
  const double f_l = spring_force(spring_extension(Side::left, wound_l, phi_deg, p), p.left);
  const double f_r = spring_force(spring_extension(Side::right, wound_r, phi_deg, p), p.right);
  return p.moment_arm * (f_r - f_l);
}

double stop_torque(double phi_deg, double phi_dot_deg, const PlantParams& p) {
  const double over = std::abs(phi_deg) - p.phi_lim_deg;
  if (over <= 0.0) return 0.0;
  const double dir = phi_deg > 0.0 ? 1.0 : -1.0;
  return -dir * p.stop_stiffness * over * kDegToRad - p.stop_damping * phi_dot_deg * kDegToRad;
}

}  // namespace

void ActuatorParams::validate() const {
  if (!(k_m > 0.0 && k1 > 0.0 && k2 >= 0.0 && f_stall > 0.0 && tau_mot_ms > 0.0)) {
    throw std::invalid_argument("actuator needs k_m, k1, f_stall, tau_mot > 0 and k2 >= 0");
  }
  if (!std::isfinite(slack_offset)) throw std::invalid_argument("actuator slack offset must be finite");
}

void PlantParams::validate() const {
  if (!(inertia > 0.0 && moment_arm > 0.0 && damping >= 0.0 && phi_lim_deg > 0.0)) {
    throw std::invalid_argument("plant needs inertia, moment arm, joint limit > 0 and damping >= 0");
  }
  if (!(stop_stiffness >= 0.0 && stop_damping >= 0.0)) throw std::invalid_argument("joint stop gains must be >= 0");
  left.validate();
  right.validate();
}

double spring_force(double x, const ActuatorParams& p) {
  if (x <= 0.0) return 0.0;
  return p.k1 * x + p.k2 * x * x;
}

double spring_energy(double x, const ActuatorParams& p) {
  if (x <= 0.0) return 0.0;
  return 0.5 * p.k1 * x * x + p.k2 * x * x * x / 3.0;
}

double spring_extension(Side side, double wound, double phi_deg, const PlantParams& p) {
  const double x = wound + side_sign(side) * p.moment_arm * phi_deg * kDegToRad + p.actuator(side).slack_offset;
  return std::max(0.0, x);
}

double joint_torque(const PlantState& s, const PlantParams& p) {
  return p.moment_arm * (s.right.force - s.left.force) - p.damping * s.phi_dot_deg * kDegToRad +
         stop_torque(s.phi_deg, s.phi_dot_deg, p);
}

PlantState plant_step(const PlantState& state, double duty_left, double duty_right, const PlantParams& params,
                      double dt_ms) {
  if (!(dt_ms > 0.0)) throw std::invalid_argument("plant step needs dt > 0");
  const double dt = dt_ms * 1e-3;
  PlantState s = state;

  for (Side side : kSides) {
    const auto& a = params.actuator(side);
    auto& t = s.tendon(side);
    const double cmd = std::clamp(side == Side::left ? duty_left : duty_right, 0.0, 1.0);
    t.duty += (cmd - t.duty) * (1.0 - std::exp(-dt_ms / a.tau_mot_ms));
    t.wound += a.k_m * (t.duty - t.force / a.f_stall) * dt;
  }
  refresh_tendons(s, params);

  const double accel = joint_torque(s, params) / params.inertia;  // rad/s^2
  const double omega = s.phi_dot_deg * kDegToRad + accel * dt;
  s.phi_dot_deg = omega / kDegToRad;
  s.phi_deg += s.phi_dot_deg * dt;
  refresh_tendons(s, params);

  if (!std::isfinite(s.phi_deg) || !std::isfinite(s.phi_dot_deg) || !std::isfinite(s.left.wound) ||
      !std::isfinite(s.right.wound)) {
    throw PlantFault("plant state became non-finite; check plant parameters");
  }
  return s;
}

double mechanical_energy(const PlantState& s, const PlantParams& p) {
  const double w = s.phi_dot_deg * kDegToRad;
  return 0.5 * p.inertia * w * w + spring_energy(s.left.spring_x, p.left) + spring_energy(s.right.spring_x, p.right);
}

double joint_stiffness(const PlantState& s, const PlantParams& p) {
  constexpr double h = 1e-3;  // deg
  const double up = tendon_torque(s.phi_deg + h, s.left.wound, s.right.wound, p) +
                    stop_torque(s.phi_deg + h, 0.0, p);
  const double down = tendon_torque(s.phi_deg - h, s.left.wound, s.right.wound, p) +
                      stop_torque(s.phi_deg - h, 0.0, p);
  return std::abs(up - down) / (2.0 * h * kDegToRad);
}

PlantState pretensioned_state(double force, const PlantParams& p) {
  PlantState s;
  for (Side side : kSides) {
    const auto& a = p.actuator(side);
    double x = 0.0;
    if (force > 0.0) {
      x = a.k2 > 0.0 ? (-a.k1 + std::sqrt(a.k1 * a.k1 + 4.0 * a.k2 * force)) / (2.0 * a.k2) : force / a.k1;
    }
    auto& t = s.tendon(side);
    t.wound = x - a.slack_offset;
    t.duty = std::clamp(force / a.f_stall, 0.0, 1.0);
  }
  refresh_tendons(s, p);
  return s;
}

void PidConfig::validate() const {
  for (double g : {k_p, k_i, k_d}) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw std::invalid_argument("PID gains must be finite and non-negative");
  }
  if (!(u_max > 0.0)) throw std::invalid_argument("PID u_max must be positive");
  if (!(integral_limit >= 0.0)) throw std::invalid_argument("PID integral limit must be >= 0");
  if (!(period_ms > 0.0)) throw std::invalid_argument("PID period must be positive");
}

TeachingSignal pid_teacher(double phi_set, double phi_act, PidState& state, const PidConfig& cfg) {
  const double period_s = cfg.period_ms * 1e-3;
  const double e = phi_set - phi_act;
  state.integral = std::clamp(state.integral + e * period_s, -cfg.integral_limit, cfg.integral_limit);
  const double derivative = state.has_prev ? (e - state.prev_error) / period_s : 0.0;
  state.prev_error = e;
  state.has_prev = true;

  TeachingSignal out;
  out.u = cfg.k_p * e + cfg.k_i * state.integral + cfg.k_d * derivative;
  if (out.u > 0.0) {
    out.eps_right = std::clamp(out.u / cfg.u_max, 0.0, 1.0);
  } else if (out.u < 0.0) {
    out.eps_left = std::clamp(-out.u / cfg.u_max, 0.0, 1.0);
  }
  return out;
}

}  // namespace cerebloop
