#include "cerebloop/codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cerebloop {

namespace {

// Threshold slack for the phase accumulator: repeated addition of r * dt
// must fire on the tick where the exact sum reaches 1.
constexpr double kPhaseSlack = 1e-9;

}  // namespace

void PopulationEncoderConfig::validate() const {
  if (n_cells < 2) throw std::invalid_argument("population encoder needs at least 2 cells");
  if (!(lo < hi)) throw std::invalid_argument("population encoder needs lo < hi");
  if (!(sigma_rf > 0.0)) throw std::invalid_argument("population encoder needs sigma_rf > 0");
  if (!(r_max_hz > 0.0)) throw std::invalid_argument("population encoder needs r_max > 0");
  if (!(update_period_ms > 0.0)) throw std::invalid_argument("population encoder needs a positive update period");
}

double PopulationEncoderConfig::preferred(std::uint32_t cell) const {
  return lo + spacing() * static_cast<double>(cell);
}

std::vector<double> population_rates(double value, const PopulationEncoderConfig& cfg) {
  const double x = std::clamp(value, cfg.lo, cfg.hi);
  std::vector<double> rates(cfg.n_cells);
  for (std::uint32_t i = 0; i < cfg.n_cells; ++i) {
    const double d = x - cfg.preferred(i);
    rates[i] = cfg.r_max_hz * std::exp(-(d * d) / (2.0 * cfg.sigma_rf * cfg.sigma_rf));
  }
  return rates;
}

SpikeGenerator::SpikeGenerator(std::uint32_t n_cells, bool stochastic, std::uint64_t seed)
    : rates_(n_cells, 0.0), phase_(n_cells, 0.0), stochastic_(stochastic), rng_(seed) {
  // Golden-ratio stagger keeps equal-rate cells out of lockstep.
  constexpr double kGolden = 0.6180339887498949;
  for (std::uint32_t i = 0; i < n_cells; ++i) {
    phase_[i] = std::fmod(static_cast<double>(i) * kGolden, 1.0);
  }
}

void SpikeGenerator::set_rates(std::vector<double> rates_hz) {
  if (rates_hz.size() != rates_.size()) throw std::invalid_argument("rate vector size mismatch");
  for (double r : rates_hz) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("rates must be finite and non-negative");
  }
  rates_ = std::move(rates_hz);
}

void SpikeGenerator::step(double tick_ms, std::vector<std::uint32_t>& fired) {
  const double dt_s = tick_ms * 1e-3;
  fired.clear();
  for (std::uint32_t i = 0; i < rates_.size(); ++i) {
    const double p = rates_[i] * dt_s;
    if (stochastic_) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      if (u(rng_) < p) fired.push_back(i);
      continue;
    }
    phase_[i] += p;
    if (phase_[i] >= 1.0 - kPhaseSlack) {
      fired.push_back(i);
      phase_[i] = std::max(0.0, phase_[i] - 1.0);
    }
  }
}

PopulationEncoder::PopulationEncoder(PopulationEncoderConfig cfg, std::uint64_t seed)
    : cfg_(cfg), gen_((cfg.validate(), cfg.n_cells), cfg.stochastic, seed) {
  set_value(0.5 * (cfg_.lo + cfg_.hi));
}

void PopulationEncoder::set_value(double value) {
  value_ = std::clamp(value, cfg_.lo, cfg_.hi);
  gen_.set_rates(population_rates(value_, cfg_));
}

RateEncoder::RateEncoder(double r_max_hz, bool stochastic, std::uint64_t seed)
    : r_max_hz_(r_max_hz), gen_(1, stochastic, seed) {
  if (!(r_max_hz > 0.0)) throw std::invalid_argument("rate encoder needs r_max > 0");
}

void RateEncoder::set_value(double value) {
  if (!(value >= 0.0 && value <= 1.0)) throw std::invalid_argument("rate-coded value must lie in [0, 1]");
  value_ = value;
  gen_.set_rates({value * r_max_hz_});
}

bool RateEncoder::step(double tick_ms) {
  scratch_.clear();
  gen_.step(tick_ms, scratch_);
  return !scratch_.empty();
}

std::vector<SpikeEvent> population_encode(PopulationEncoder& encoder, double value, Tick t, NeuronId first,
                                          double tick_ms) {
  encoder.set_value(value);
  std::vector<std::uint32_t> fired;
  encoder.step(tick_ms, fired);
  std::vector<SpikeEvent> out;
  out.reserve(fired.size());
  for (auto i : fired) out.push_back({t, first + i});
  return out;
}

std::vector<SpikeEvent> rate_encode(RateEncoder& encoder, double value, Tick t, NeuronId neuron, double tick_ms) {
  encoder.set_value(value);
  if (encoder.step(tick_ms)) return {{t, neuron}};
  return {};
}

void MotorDecoderConfig::validate() const {
  if (!(tau_out_ms > 0.0)) throw std::invalid_argument("motor decoder needs tau_out > 0");
  if (!(update_period_ms > 0.0)) throw std::invalid_argument("motor decoder needs a positive update period");
  if (!(omega_lo < omega_hi)) throw std::invalid_argument("motor decoder needs omega_lo < omega_hi");
}

MotorDecoder::MotorDecoder(MotorDecoderConfig cfg)
    : cfg_((cfg.validate(), cfg)), decay_(std::exp(-cfg.update_period_ms / cfg.tau_out_ms)) {
  command_.omega = std::clamp(cfg_.bias, cfg_.omega_lo, cfg_.omega_hi);
}

MotorCommand MotorDecoder::update() {
  activity_ = activity_ * decay_ + static_cast<double>(pending_);
  pending_ = 0;
  command_.omega = std::clamp(cfg_.gain * activity_ + cfg_.bias, cfg_.omega_lo, cfg_.omega_hi);
  return command_;
}

double motor_steady_state(double rate_hz, const MotorDecoderConfig& cfg) {
  const double per_period = rate_hz * cfg.update_period_ms * 1e-3;
  const double a = per_period / (1.0 - std::exp(-cfg.update_period_ms / cfg.tau_out_ms));
  return std::clamp(cfg.gain * a + cfg.bias, cfg.omega_lo, cfg.omega_hi);
}

}  // namespace cerebloop
