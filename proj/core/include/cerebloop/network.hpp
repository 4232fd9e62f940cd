#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cerebloop/plasticity.hpp"

namespace cerebloop {

using NeuronId = std::uint32_t;
using PopulationId = std::uint32_t;
using ProjectionId = std::uint32_t;

/// A spike at tick `t` from global neuron `neuron`.
struct SpikeEvent {
  Tick t = 0;
  NeuronId neuron = 0;

  friend auto operator<=>(const SpikeEvent&, const SpikeEvent&) = default;
};

/// Leaky integrate-and-fire cell with exponentially decaying synaptic
/// currents. Potentials in mV, times in ms, currents in nA, resistance in MOhm.
struct LifParams {
  double v_rest = -70.0;
  double v_threshold = -54.0;
  double v_reset = -70.0;
  double tau_m = 10.0;
  double r_m = 10.0;
  double t_refractory = 2.0;
  double tau_syn_exc = 2.0;
  double tau_syn_inh = 10.0;
  /// Constant injected current.
  double i_bias = 0.0;

  void validate() const;
  friend bool operator==(const LifParams&, const LifParams&) = default;
};

struct LifState {
  double v = 0.0;
  double i_exc = 0.0;
  double i_inh = 0.0;
  int refractory_remaining = 0;

  static LifState at_rest(const LifParams& p) { return {p.v_rest, 0.0, 0.0, 0}; }
  friend bool operator==(const LifState&, const LifState&) = default;
};

enum class PopulationKind : std::uint8_t { lif, source };

struct Population {
  std::string name;
  PopulationKind kind = PopulationKind::lif;
  std::uint32_t size = 0;
  LifParams params;
  NeuronId first = 0;

  bool contains(NeuronId id) const { return id >= first && id < first + size; }
};

enum class SynapseSign : std::uint8_t { excitatory, inhibitory };

/// `pre`/`post` index into the source/target populations.
struct Synapse {
  std::uint32_t pre = 0;
  std::uint32_t post = 0;
  double weight = 0.0;
  std::uint32_t delay = 1;
  SynapseSign sign = SynapseSign::excitatory;
  bool plastic = false;

  friend bool operator==(const Synapse&, const Synapse&) = default;
};

/// `current` projections inject synaptic current. `teaching` projections
/// carry no current; an arrival triggers LTD on every plastic synapse onto
/// the target neuron.
enum class ProjectionKind : std::uint8_t { current, teaching };

struct Projection {
  std::string name;
  PopulationId source = 0;
  PopulationId target = 0;
  ProjectionKind kind = ProjectionKind::current;
  std::vector<Synapse> synapses;
};

class Network {
public:
  PopulationId add_population(std::string name, PopulationKind kind, std::uint32_t size, LifParams params = {});
  ProjectionId add_projection(Projection projection);

  const std::vector<Population>& populations() const { return populations_; }
  const std::vector<Projection>& projections() const { return projections_; }
  const Population& population(PopulationId id) const { return populations_.at(id); }
  const Projection& projection(ProjectionId id) const { return projections_.at(id); }
  /// Mutable access; callers are responsible for calling validate() afterwards.
  Projection& projection(ProjectionId id) { return projections_.at(id); }

  std::optional<PopulationId> find_population(std::string_view name) const;
  std::optional<ProjectionId> find_projection(std::string_view name) const;
  PopulationId population_of(NeuronId id) const;
  NeuronId global_id(PopulationId pop, std::uint32_t local) const;
  std::uint32_t neuron_count() const { return neuron_count_; }
  std::uint32_t max_delay() const;

  const std::optional<KernelParams>& plasticity() const { return plasticity_; }
  void set_plasticity(std::optional<KernelParams> params) { plasticity_ = std::move(params); }

  /// Throws std::invalid_argument naming the offending element.
  void validate() const;

private:
  void validate_projection(const Projection& p) const;

  std::vector<Population> populations_;
  std::vector<Projection> projections_;
  std::optional<KernelParams> plasticity_;
  std::uint32_t neuron_count_ = 0;
};

}  // namespace cerebloop
