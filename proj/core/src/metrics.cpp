#include "cerebloop/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cerebloop {

double tracking_rmse(std::span<const TelemetryRow> rows, double t_from, double t_to) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.t > t_from && r.t <= t_to) {
      const double e = r.phi_set - r.phi_act;
      sum += e * e;
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("no telemetry rows in the requested interval");
  return std::sqrt(sum / static_cast<double>(n));
}

TrackingMetrics compute_metrics(std::span<const TelemetryRow> rows, double window_s) {
  if (rows.empty()) throw std::invalid_argument("cannot compute metrics of an empty telemetry log");
  if (!(window_s > 0.0)) throw std::invalid_argument("metrics window must be positive");

  TrackingMetrics m;
  double err2 = 0.0;
  double set2 = 0.0;
  for (const auto& r : rows) {
    const double e = r.phi_set - r.phi_act;
    err2 += e * e;
    set2 += r.phi_set * r.phi_set;
  }
  const auto n = static_cast<double>(rows.size());
  m.rmse = std::sqrt(err2 / n);
  m.setpoint_rms = std::sqrt(set2 / n);

  const double t_end = rows.back().t;
  for (double start = 0.0; start < t_end - 1e-9; start += window_s) {
    WindowRmse w;
    w.t_start = start;
    w.t_end = std::min(start + window_s, t_end);
    double s = 0.0;
    for (const auto& r : rows) {
      if (r.t > w.t_start && r.t <= w.t_end + 1e-9) {
        const double e = r.phi_set - r.phi_act;
        s += e * e;
        ++w.samples;
      }
    }
    if (w.samples == 0) continue;
    w.rmse = std::sqrt(s / static_cast<double>(w.samples));
    m.windows.push_back(w);
  }
  if (m.windows.empty()) {
    m.windows.push_back({0.0, t_end, m.rmse, rows.size()});
  }
  m.first_window_rmse = m.windows.front().rmse;
  m.final_window_rmse = m.windows.back().rmse;
  m.improvement_ratio = improvement_ratio(m.first_window_rmse, m.final_window_rmse);
  return m;
}

double improvement_ratio(double naive_rmse, double trained_rmse) {
  if (trained_rmse <= 0.0) return naive_rmse > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  return naive_rmse / trained_rmse;
}

}  // namespace cerebloop
