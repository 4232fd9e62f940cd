#include "cerebloop/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cerebloop {

void LifParams::validate() const {
  const bool finite = std::isfinite(v_rest) && std::isfinite(v_threshold) && std::isfinite(v_reset) &&
                      std::isfinite(r_m) && std::isfinite(i_bias);
  if (!finite) throw std::invalid_argument("LIF parameters must be finite");
  if (!(v_reset <= v_rest && v_rest < v_threshold)) {
    throw std::invalid_argument("LIF parameters need v_reset <= v_rest < v_threshold");
  }
  if (!(tau_m > 0.0 && tau_syn_exc > 0.0 && tau_syn_inh > 0.0)) {
    throw std::invalid_argument("LIF time constants must be positive");
  }
  if (!(t_refractory >= 0.0)) throw std::invalid_argument("LIF refractory period must be >= 0");
  if (!(r_m > 0.0)) throw std::invalid_argument("LIF membrane resistance must be positive");
}

PopulationId Network::add_population(std::string name, PopulationKind kind, std::uint32_t size, LifParams params) {
  if (name.empty()) throw std::invalid_argument("population name must not be empty");
  if (find_population(name)) throw std::invalid_argument("duplicate population '" + name + "'");
  if (kind == PopulationKind::lif) params.validate();
  Population p{std::move(name), kind, size, params, neuron_count_};
  neuron_count_ += size;
  populations_.push_back(std::move(p));
  return static_cast<PopulationId>(populations_.size() - 1);
}

ProjectionId Network::add_projection(Projection projection) {
  validate_projection(projection);
  if (!projection.name.empty() && find_projection(projection.name)) {
    throw std::invalid_argument("duplicate projection '" + projection.name + "'");
  }
  projections_.push_back(std::move(projection));
  return static_cast<ProjectionId>(projections_.size() - 1);
}

std::optional<PopulationId> Network::find_population(std::string_view name) const {
  for (std::size_t i = 0; i < populations_.size(); ++i) {
    if (populations_[i].name == name) return static_cast<PopulationId>(i);
  }
  return std::nullopt;
}

std::optional<ProjectionId> Network::find_projection(std::string_view name) const {
  for (std::size_t i = 0; i < projections_.size(); ++i) {
    if (projections_[i].name == name) return static_cast<ProjectionId>(i);
  }
  return std::nullopt;
}

PopulationId Network::population_of(NeuronId id) const {
  for (std::size_t i = 0; i < populations_.size(); ++i) {
    if (populations_[i].contains(id)) return static_cast<PopulationId>(i);
  }
  throw std::out_of_range("neuron id " + std::to_string(id) + " is not part of the network");
}

NeuronId Network::global_id(PopulationId pop, std::uint32_t local) const {
  const auto& p = populations_.at(pop);
  if (local >= p.size) {
    throw std::out_of_range("index " + std::to_string(local) + " out of range for population '" + p.name + "'");
  }
  return p.first + local;
}

std::uint32_t Network::max_delay() const {
  std::uint32_t d = 1;
  for (const auto& proj : projections_) {
    for (const auto& s : proj.synapses) d = std::max(d, s.delay);
  }
  return d;
}

void Network::validate_projection(const Projection& p) const {
  const auto label = "projection '" + p.name + "'";
  if (p.source >= populations_.size() || p.target >= populations_.size()) {
    throw std::invalid_argument(label + " references an unknown population");
  }
  const auto& src = populations_[p.source];
  const auto& dst = populations_[p.target];
  if (dst.kind != PopulationKind::lif) {
    throw std::invalid_argument(label + " targets spike source population '" + dst.name + "'");
  }
  for (const auto& s : p.synapses) {
    if (s.pre >= src.size || s.post >= dst.size) throw std::invalid_argument(label + " has a synapse index out of range");
    if (!(s.weight >= 0.0) || !std::isfinite(s.weight)) {
      throw std::invalid_argument(label + " has a negative or non-finite weight");
    }
    if (s.delay < 1) throw std::invalid_argument(label + " has a delay below one tick");
    if (s.plastic && p.kind == ProjectionKind::teaching) {
      throw std::invalid_argument(label + " is a teaching projection with plastic synapses");
    }
  }
}

void Network::validate() const {
  for (const auto& p : populations_) {
    if (p.kind == PopulationKind::lif) p.params.validate();
  }
  for (const auto& p : projections_) validate_projection(p);
  const bool any_plastic = std::any_of(projections_.begin(), projections_.end(), [](const Projection& p) {
    return std::any_of(p.synapses.begin(), p.synapses.end(), [](const Synapse& s) { return s.plastic; });
  });
  if (any_plastic && !plasticity_) throw std::invalid_argument("network has plastic synapses but no kernel parameters");
  if (plasticity_) plasticity_->validate();
}

}  // namespace cerebloop
