#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "cerebloop/fixed_point.hpp"

namespace cerebloop {

using Tick = std::int64_t;

/// Shape of the supervised PF->PuC learning rule.
///
/// LTD follows a Gaussian bump centred on `-t_peak_ms` in
/// dt = t_GrC - t_InO; LTP is a constant increment per presynaptic spike.
/// All amplitudes are in weight units (nA).
struct KernelParams {
  double t_peak_ms = 100.0;
  double sigma_ms = 25.0;
  double a_ltd = 0.0;
  double a_ltp = 0.0;
  double bin_ms = 1.0;
  double window_ms = 250.0;
  double w_min = 0.0;
  double w_max = 1.0;

  /// Defaults relative to `w_max`: a_ltd = 0.005 w_max, a_ltp = 2^-11 w_max (about 0.0005 w_max).
  static KernelParams with_default_amplitudes(double w_max);

  void validate() const;
  friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

/// Discretized LTD kernel. Entry k holds the value at the bin centre
/// dt = -k * bin_ms, for k = 0 .. window_ms / bin_ms.
struct KernelLut {
  double bin_ms = 1.0;
  double window_ms = 0.0;
  double a_ltp = 0.0;
  double w_min = 0.0;
  double w_max = 1.0;
  std::vector<double> table;

  /// Kernel value for dt = t_GrC - t_InO in ms; exactly zero outside
  /// [-window_ms, 0].
  double at(double dt_ms) const;
  double bin_center(std::size_t k) const { return -static_cast<double>(k) * bin_ms; }
};

KernelLut build_kernel_lut(const KernelParams& params);

/// The closed form the LUT is compiled from.
double kernel_closed_form(const KernelParams& params, double dt_ms);

/// Ring buffer of the most recent presynaptic arrival ticks at one plastic
/// synapse. Oldest entries are evicted first once full.
class SynapseSpikeBuffer {
public:
  static constexpr std::size_t capacity = 160;

  void push(Tick t);
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  /// i = 0 is the oldest retained entry.
  Tick operator[](std::size_t i) const { return ticks_[(head_ + i) % capacity]; }
  void clear() { head_ = size_ = 0; }

private:
  std::array<Tick, capacity> ticks_{};
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

/// Kernel tables in the arithmetic of the simulation (double or fixed point),
/// indexed by tick distance.
template <class Arith>
struct TickKernel {
  using value_type = typename Arith::value_type;
  std::vector<value_type> ltd;  // ltd[k] at dt = -k ticks
  value_type a_ltp{};
  value_type w_min{};
  value_type w_max{};

  static TickKernel compile(const KernelLut& lut, double tick_ms, Arith& arith) {
    TickKernel k;
    const auto ticks = static_cast<std::size_t>(lut.window_ms / tick_ms + 1e-9);
    k.ltd.reserve(ticks + 1);
    for (std::size_t i = 0; i <= ticks; ++i) {
      k.ltd.push_back(arith.from_double(lut.at(-static_cast<double>(i) * tick_ms)));
    }
    k.a_ltp = arith.from_double(lut.a_ltp);
    k.w_min = arith.from_double(lut.w_min);
    k.w_max = arith.from_double(lut.w_max);
    return k;
  }

  value_type clamp(value_type w) const { return std::clamp(w, w_min, w_max); }
};

/// LTP: weight += a_ltp (clamped) and the arrival tick enters the buffer.
template <class Arith>
void potentiate(Arith& arith, typename Arith::value_type& weight, SynapseSpikeBuffer& buffer, Tick t,
                const TickKernel<Arith>& kernel) {
  weight = kernel.clamp(arith.add(weight, kernel.a_ltp));
  buffer.push(t);
}

/// LTD: the kernel is summed over buffered presynaptic ticks, oldest first,
/// and the sum is added to the weight once (clamped).
template <class Arith>
void depress(Arith& arith, typename Arith::value_type& weight, const SynapseSpikeBuffer& buffer, Tick t_ino,
             const TickKernel<Arith>& kernel) {
  const auto window = static_cast<Tick>(kernel.ltd.size()) - 1;
  std::size_t first = buffer.size();
  while (first > 0 && t_ino - buffer[first - 1] <= window) {
    --first;
  }
  auto sum = Arith::zero();
  for (std::size_t i = first; i < buffer.size(); ++i) {
    const Tick lag = t_ino - buffer[i];
    if (lag < 0) break;  // never read presynaptic spikes later than the teacher
    sum = arith.add(sum, kernel.ltd[static_cast<std::size_t>(lag)]);
  }
  weight = kernel.clamp(arith.add(weight, sum));
}

/// A plastic synapse outside of an engine, in double precision.
struct PlasticSynapse {
  double weight = 0.0;
  SynapseSpikeBuffer buffer;
};

void on_presynaptic_spike(PlasticSynapse& synapse, Tick t, const KernelLut& lut, double tick_ms = 1.0);
void on_teaching_spike(PlasticSynapse& synapse, Tick t_ino, const KernelLut& lut, double tick_ms = 1.0);

}  // namespace cerebloop
