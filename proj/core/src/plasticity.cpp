#include "cerebloop/plasticity.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cerebloop {

namespace {

[[noreturn]] void config_fault(const std::string& what) { throw std::invalid_argument("plasticity kernel: " + what); }

}  // namespace

KernelParams KernelParams::with_default_amplitudes(double w_max) {
  KernelParams p;
  p.w_max = w_max;
  p.a_ltd = 0.005 * w_max;
  // 2^-11 rather than 0.0005: exact in a 15-bit fraction, where 0.0005
  // rounds 2.3% low and fixed-point LTP drifts from the float model.
  p.a_ltp = 0.00048828125 * w_max;
  return p;
}

void KernelParams::validate() const {
  if (!(window_ms > 0.0)) config_fault("window must be positive");
  if (!(t_peak_ms > 0.0 && t_peak_ms < window_ms)) config_fault("t_peak must lie in (0, window)");
  if (!(sigma_ms > 0.0)) config_fault("sigma must be positive");
  if (!(a_ltd > 0.0) || !(a_ltp > 0.0)) config_fault("a_ltd and a_ltp must be positive");
  if (!(bin_ms > 0.0)) config_fault("bin width must be positive");
  const double bins = window_ms / bin_ms;
  if (std::abs(bins - std::round(bins)) > 1e-9) config_fault("bin width must divide the window");
  if (!(w_min >= 0.0 && w_min < w_max)) config_fault("need 0 <= w_min < w_max");
}

double kernel_closed_form(const KernelParams& p, double dt_ms) {
  if (dt_ms > 0.0 || dt_ms < -p.window_ms) return 0.0;
  const double d = dt_ms + p.t_peak_ms;
  return -p.a_ltd * std::exp(-(d * d) / (2.0 * p.sigma_ms * p.sigma_ms));
}

KernelLut build_kernel_lut(const KernelParams& params) {
  params.validate();
  KernelLut lut;
  lut.bin_ms = params.bin_ms;
  lut.window_ms = params.window_ms;
  lut.a_ltp = params.a_ltp;
  lut.w_min = params.w_min;
  lut.w_max = params.w_max;
  const auto bins = static_cast<std::size_t>(std::llround(params.window_ms / params.bin_ms));
  lut.table.resize(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k) {
    lut.table[k] = kernel_closed_form(params, lut.bin_center(k));
  }
  return lut;
}

double KernelLut::at(double dt_ms) const {
  if (dt_ms > 0.0 || dt_ms < -window_ms || table.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(std::llround(-dt_ms / bin_ms));
  return k < table.size() ? table[k] : 0.0;
}

void SynapseSpikeBuffer::push(Tick t) {
  if (size_ < capacity) {
    ticks_[(head_ + size_) % capacity] = t;
    ++size_;
  } else {
    ticks_[head_] = t;
    head_ = (head_ + 1) % capacity;
  }
}

void on_presynaptic_spike(PlasticSynapse& synapse, Tick t, const KernelLut& lut, double /*tick_ms*/) {
  synapse.weight = std::clamp(synapse.weight + lut.a_ltp, lut.w_min, lut.w_max);
  synapse.buffer.push(t);
}

void on_teaching_spike(PlasticSynapse& synapse, Tick t_ino, const KernelLut& lut, double tick_ms) {
  double sum = 0.0;
  for (std::size_t i = 0; i < synapse.buffer.size(); ++i) {
    const Tick t_grc = synapse.buffer[i];
    if (t_grc > t_ino) break;
    sum += lut.at(static_cast<double>(t_grc - t_ino) * tick_ms);
  }
  synapse.weight = std::clamp(synapse.weight + sum, lut.w_min, lut.w_max);
}

}  // namespace cerebloop
