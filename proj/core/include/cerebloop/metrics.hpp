#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace cerebloop {

/// One line of telemetry.csv.
struct TelemetryRow {
  double t = 0.0;  // s
  double phi_set = 0.0;
  double phi_act = 0.0;
  double eps_l = 0.0;
  double eps_r = 0.0;
  double omega_l = 0.0;
  double omega_r = 0.0;
};

struct WindowRmse {
  double t_start = 0.0;
  double t_end = 0.0;
  double rmse = 0.0;
  std::size_t samples = 0;
};

struct TrackingMetrics {
  /// Consecutive windows (t_start, t_end] from t = 0; a trailing partial
  /// window is kept.
  std::vector<WindowRmse> windows;
  double rmse = 0.0;
  double setpoint_rms = 0.0;
  double first_window_rmse = 0.0;
  double final_window_rmse = 0.0;
  /// first_window_rmse / final_window_rmse.
  double improvement_ratio = 0.0;
  /// Mean firing rate per population over the whole run (Hz per neuron).
  std::map<std::string, double> mean_rate_hz;
};

/// RMSE of phi_set - phi_act over rows with t in (t_from, t_to]. Throws
/// std::invalid_argument when no row falls in the interval.
double tracking_rmse(std::span<const TelemetryRow> rows, double t_from, double t_to);

/// Throws std::invalid_argument for an empty log or a non-positive window.
TrackingMetrics compute_metrics(std::span<const TelemetryRow> rows, double window_s);

/// naive / trained, the factor by which training reduced the error.
double improvement_ratio(double naive_rmse, double trained_rmse);

}  // namespace cerebloop
