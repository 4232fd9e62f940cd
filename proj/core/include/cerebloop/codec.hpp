#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cerebloop/network.hpp"

namespace cerebloop {

/// Gaussian receptive fields with preferred values spread linearly over
/// [lo, hi] (endpoints included).
struct PopulationEncoderConfig {
  std::uint32_t n_cells = 16;
  double lo = -60.0;
  double hi = 60.0;
  double sigma_rf = 8.0;
  double r_max_hz = 80.0;
  double update_period_ms = 20.0;
  bool stochastic = false;

  void validate() const;
  double preferred(std::uint32_t cell) const;
  double spacing() const { return (hi - lo) / static_cast<double>(n_cells - 1); }
};

/// Firing rate of every cell for `value` (clamped to [lo, hi]).
std::vector<double> population_rates(double value, const PopulationEncoderConfig& cfg);

/// Turns rates into spikes one tick at a time.
///
/// Deterministic mode is a phase accumulator per cell, which yields evenly
/// spaced spikes at the commanded rate. Stochastic mode draws one Bernoulli
/// per cell and tick from a seeded generator.
class SpikeGenerator {
public:
  SpikeGenerator(std::uint32_t n_cells, bool stochastic, std::uint64_t seed);

  void set_rates(std::vector<double> rates_hz);
  const std::vector<double>& rates() const { return rates_; }
  /// Local indices of the cells that fire during this tick.
  void step(double tick_ms, std::vector<std::uint32_t>& fired);

private:
  std::vector<double> rates_;
  std::vector<double> phase_;
  bool stochastic_;
  std::mt19937_64 rng_;
};

class PopulationEncoder {
public:
  PopulationEncoder(PopulationEncoderConfig cfg, std::uint64_t seed = 0);

  const PopulationEncoderConfig& config() const { return cfg_; }
  /// Latches a new value; the rate vector changes immediately.
  void set_value(double value);
  double value() const { return value_; }
  const std::vector<double>& rates() const { return gen_.rates(); }
  void step(double tick_ms, std::vector<std::uint32_t>& fired) { gen_.step(tick_ms, fired); }

private:
  PopulationEncoderConfig cfg_;
  SpikeGenerator gen_;
  double value_ = 0.0;
};

/// Single-cell rate code: value in [0, 1] maps to value * r_max.
class RateEncoder {
public:
  explicit RateEncoder(double r_max_hz, bool stochastic = false, std::uint64_t seed = 0);

  void set_value(double value);
  double value() const { return value_; }
  double rate_hz() const { return gen_.rates().front(); }
  bool step(double tick_ms);

private:
  double r_max_hz_;
  SpikeGenerator gen_;
  double value_ = 0.0;
  std::vector<std::uint32_t> scratch_;
};

/// Spikes for one tick of a population code, as global SpikeEvents of the
/// population starting at `first`.
std::vector<SpikeEvent> population_encode(PopulationEncoder& encoder, double value, Tick t, NeuronId first,
                                          double tick_ms = 1.0);

/// Spikes for one tick of a rate code.
std::vector<SpikeEvent> rate_encode(RateEncoder& encoder, double value, Tick t, NeuronId neuron, double tick_ms = 1.0);

struct MotorDecoderConfig {
  /// Duty per unit of decayed spike activity.
  double gain = 0.02;
  double bias = 0.0;
  double tau_out_ms = 100.0;
  double update_period_ms = 20.0;
  double omega_lo = 0.0;
  double omega_hi = 1.0;

  void validate() const;
};

struct MotorCommand {
  double omega = 0.0;
};

/// Leaky spike counter read out once per update period:
///   a <- a * exp(-period / tau_out) + spikes_in_period
///   omega = clamp(gain * a + bias, omega_lo, omega_hi)
class MotorDecoder {
public:
  explicit MotorDecoder(MotorDecoderConfig cfg);

  const MotorDecoderConfig& config() const { return cfg_; }
  void add_spikes(std::uint32_t n) { pending_ += n; }
  /// Closes the current period.
  MotorCommand update();
  MotorCommand command() const { return command_; }
  double activity() const { return activity_; }

private:
  MotorDecoderConfig cfg_;
  double decay_;
  double activity_ = 0.0;
  std::uint64_t pending_ = 0;
  MotorCommand command_;
};

/// Steady-state command for a sustained pooled rate, from the geometric sum
/// of the decayed per-period counts.
double motor_steady_state(double rate_hz, const MotorDecoderConfig& cfg);

}  // namespace cerebloop
