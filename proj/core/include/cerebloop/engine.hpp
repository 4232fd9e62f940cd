#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "cerebloop/fixed_point.hpp"
#include "cerebloop/network.hpp"

namespace cerebloop {

/// Exact one-tick propagator of the LIF model
///
///   tau_m dv/dt = -(v - v_rest) + r_m (i_exc - i_inh + i_bias)
///   tau_syn di/dt = -i
///
/// Currents decay exponentially and the membrane picks up their exact
/// integral over the tick, so the result at tick boundaries does not depend
/// on the step size.
struct LifPropagator {
  double leak = 0.0;
  double exc_decay = 0.0;
  double inh_decay = 0.0;
  double exc_to_v = 0.0;
  double inh_to_v = 0.0;
  double bias_drive = 0.0;
  int refractory_ticks = 0;

  static LifPropagator compute(const LifParams& params, double dt_ms);
};

struct LifStepResult {
  LifState state;
  bool spiked = false;
  /// The membrane was already above threshold at mid-step.
  bool first_half = false;
};

/// Advance one neuron by `dt_ms` in double precision. The membrane is
/// sampled at mid-step and at the end of the step; either sample at or
/// above threshold is a spike. While refractory the membrane is held at
/// v_reset and no spike can be emitted. A first-half spike starts its
/// refractory period one step earlier.
LifStepResult lif_step(const LifState& state, const LifParams& params, double dt_ms);

/// Non-recoverable numerical fault of one neuron.
class EngineFault : public std::runtime_error {
public:
  EngineFault(NeuronId neuron, Tick t, const std::string& what);
  NeuronId neuron() const { return neuron_; }
  Tick tick() const { return tick_; }

private:
  NeuronId neuron_;
  Tick tick_;
};

struct PendingDelivery {
  ProjectionId projection = 0;
  std::uint32_t synapse = 0;
};

/// Ring of per-tick delivery slots covering the longest synaptic delay.
class DelayQueue {
public:
  explicit DelayQueue(std::uint32_t max_delay);

  /// Schedules `d` to arrive at `at`; `at` must lie within the ring horizon
  /// of `now`.
  void schedule(Tick now, Tick at, PendingDelivery d);
  std::vector<PendingDelivery>& slot(Tick t) { return slots_[static_cast<std::size_t>(t) % slots_.size()]; }
  std::size_t horizon() const { return slots_.size(); }

private:
  std::vector<std::vector<PendingDelivery>> slots_;
};

struct EngineOptions {
  NumericMode numeric;
  double tick_ms = 1.0;
  bool learning = true;
};

/// Tick-based simulator of a Network.
///
/// One call to tick() at time t runs, in this order:
///   1. deliveries due at t (current increments, plastic/teaching arrivals),
///   2. external input spikes at t (scheduled for t + delay),
///   3. plasticity: LTP for plastic arrivals, then LTD for teaching arrivals,
///   4. integration of every LIF neuron over [t, t + 1].
/// Input spikes are stamped t. A LIF spike is stamped with the tick nearest
/// to its threshold crossing: t when the membrane is above threshold at
/// t + 1/2, t + 1 otherwise. Delays and the refractory period count from
/// the stamp. Within one call, spikes come out sorted by stamp.
class Engine {
public:
  explicit Engine(Network network, EngineOptions options = {});
  ~Engine();
  Engine(Engine&&) noexcept;
  Engine& operator=(Engine&&) noexcept;

  /// `input_spikes` must belong to spike-source populations.
  std::vector<SpikeEvent> tick(std::span<const NeuronId> input_spikes = {});

  Tick now() const;
  const Network& network() const;
  const EngineOptions& options() const;

  LifState state(NeuronId id) const;
  double weight(ProjectionId proj, std::size_t synapse) const;
  std::vector<double> weights(ProjectionId proj) const;
  void set_weights(ProjectionId proj, std::span<const double> weights);
  /// Restores every projection to the weights the network was built with.
  void reset_weights();

  void set_learning(bool enabled);
  bool learning() const;

  std::uint64_t saturation_count() const;

  struct Impl;

private:
  std::unique_ptr<Impl> impl_;
};

/// Runs `n_ticks` ticks feeding `inputs` (sorted by tick) and returns every
/// spike, inputs included.
std::vector<SpikeEvent> run_for(Engine& engine, std::span<const SpikeEvent> inputs, Tick n_ticks);

}  // namespace cerebloop
