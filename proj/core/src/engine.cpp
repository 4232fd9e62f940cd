#include "cerebloop/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cerebloop {

LifPropagator LifPropagator::compute(const LifParams& p, double dt_ms) {
  if (!(dt_ms > 0.0)) throw std::invalid_argument("tick must be positive");
  LifPropagator prop;
  prop.leak = std::exp(-dt_ms / p.tau_m);
  prop.exc_decay = std::exp(-dt_ms / p.tau_syn_exc);
  prop.inh_decay = std::exp(-dt_ms / p.tau_syn_inh);
  auto current_gain = [&](double tau_syn, double decay) {
    if (std::abs(tau_syn - p.tau_m) <= 1e-12 * p.tau_m) {
      return p.r_m * (dt_ms / p.tau_m) * prop.leak;
    }
    return p.r_m * tau_syn / (tau_syn - p.tau_m) * (decay - prop.leak);
  };
  prop.exc_to_v = current_gain(p.tau_syn_exc, prop.exc_decay);
  prop.inh_to_v = current_gain(p.tau_syn_inh, prop.inh_decay);
  prop.bias_drive = p.r_m * p.i_bias * (1.0 - prop.leak);
  prop.refractory_ticks = static_cast<int>(std::llround(p.t_refractory / dt_ms));
  return prop;
}

EngineFault::EngineFault(NeuronId neuron, Tick t, const std::string& what)
    : std::runtime_error("neuron " + std::to_string(neuron) + " at tick " + std::to_string(t) + ": " + what),
      neuron_(neuron),
      tick_(t) {}

DelayQueue::DelayQueue(std::uint32_t max_delay) : slots_(static_cast<std::size_t>(max_delay) + 2) {}

void DelayQueue::schedule(Tick now, Tick at, PendingDelivery d) {
  if (at <= now || at - now >= static_cast<Tick>(slots_.size())) {
    throw std::logic_error("delivery outside of the delay queue horizon");
  }
  slot(at).push_back(d);
}

namespace {

/// Per-population propagator constants in the engine's arithmetic.
template <class Arith>
struct Coefficients {
  using V = typename Arith::value_type;
  V leak{}, exc_decay{}, inh_decay{}, exc_to_v{}, inh_to_v{}, bias_drive{};
  V v_rest{}, v_reset{}, v_threshold{};
  V h_leak{}, h_exc_to_v{}, h_inh_to_v{}, h_bias_drive{};
  int refractory_ticks = 0;

  static Coefficients make(const LifParams& p, const LifPropagator& prop, Arith& a, double dt_ms) {
    Coefficients c;
    c.leak = a.from_double(prop.leak);
    c.exc_decay = a.from_double(prop.exc_decay);
    c.inh_decay = a.from_double(prop.inh_decay);
    c.exc_to_v = a.from_double(prop.exc_to_v);
    c.inh_to_v = a.from_double(prop.inh_to_v);
    c.bias_drive = a.from_double(prop.bias_drive);
    c.v_rest = a.from_double(p.v_rest);
    c.v_reset = a.from_double(p.v_reset);
    c.v_threshold = a.from_double(p.v_threshold);
    c.refractory_ticks = prop.refractory_ticks;
    const auto half = LifPropagator::compute(p, dt_ms * 0.5);
    c.h_leak = a.from_double(half.leak);
    c.h_exc_to_v = a.from_double(half.exc_to_v);
    c.h_inh_to_v = a.from_double(half.inh_to_v);
    c.h_bias_drive = a.from_double(half.bias_drive);
    return c;
  }
};

template <class Arith>
struct NeuronSlot {
  typename Arith::value_type v{}, i_exc{}, i_inh{};
  int refractory = 0;
};

/// Where in the tick the membrane crossed threshold, judged from samples at
/// mid-tick and at the end of the tick.
enum class Crossing { none, first_half, second_half };

/// The single integration path shared by both numeric modes.
template <class Arith>
Crossing advance(Arith& a, NeuronSlot<Arith>& n, const Coefficients<Arith>& c) {
  if (n.refractory > 0) {
    n.v = c.v_reset;
    n.i_exc = a.mul(n.i_exc, c.exc_decay);
    n.i_inh = a.mul(n.i_inh, c.inh_decay);
    --n.refractory;
    return Crossing::none;
  }
  const auto u = a.sub(n.v, c.v_rest);
  auto mid = a.mul(u, c.h_leak);
  mid = a.add(mid, a.mul(n.i_exc, c.h_exc_to_v));
  mid = a.sub(mid, a.mul(n.i_inh, c.h_inh_to_v));
  mid = a.add(mid, c.h_bias_drive);
  auto dv = a.mul(u, c.leak);
  dv = a.add(dv, a.mul(n.i_exc, c.exc_to_v));
  dv = a.sub(dv, a.mul(n.i_inh, c.inh_to_v));
  dv = a.add(dv, c.bias_drive);
  n.v = a.add(c.v_rest, dv);
  n.i_exc = a.mul(n.i_exc, c.exc_decay);
  n.i_inh = a.mul(n.i_inh, c.inh_decay);

  Crossing x = Crossing::none;
  if (a.add(c.v_rest, mid) >= c.v_threshold) {
    x = Crossing::first_half;
  } else if (n.v >= c.v_threshold) {
    x = Crossing::second_half;
  }
  if (x == Crossing::none) return x;
  // Refractory time counts from the spike tick: t for a first-half
  // crossing, t + 1 otherwise.
  n.v = c.v_reset;
  n.refractory = std::max(0, c.refractory_ticks - (x == Crossing::first_half ? 1 : 0));
  return x;
}

struct FanoutEntry {
  PendingDelivery delivery;
  std::uint32_t delay = 1;
};

class CoreBase {
public:
  virtual ~CoreBase() = default;
  virtual void tick(Tick t, std::span<const NeuronId> inputs, bool learning, std::vector<SpikeEvent>& out) = 0;
  virtual LifState state(NeuronId id) const = 0;
  virtual double weight(ProjectionId proj, std::size_t syn) const = 0;
  virtual void set_weight(ProjectionId proj, std::size_t syn, double w) = 0;
  virtual std::uint64_t saturations() const = 0;
};

template <class Arith>
class Core final : public CoreBase {
  using V = typename Arith::value_type;

public:
  Core(const Network& net, const EngineOptions& opt, Arith arith)
      : net_(net), arith_(std::move(arith)), queue_(net.max_delay()) {
    const auto n = net.neuron_count();
    neurons_.resize(n);
    coeff_index_.assign(n, -1);
    is_source_.assign(n, false);
    for (const auto& pop : net.populations()) {
      if (pop.kind == PopulationKind::source) {
        for (std::uint32_t i = 0; i < pop.size; ++i) is_source_[pop.first + i] = true;
        continue;
      }
      const auto prop = LifPropagator::compute(pop.params, opt.tick_ms);
      coeffs_.push_back(Coefficients<Arith>::make(pop.params, prop, arith_, opt.tick_ms));
      const auto rest = arith_.from_double(pop.params.v_rest);
      for (std::uint32_t i = 0; i < pop.size; ++i) {
        coeff_index_[pop.first + i] = static_cast<int>(coeffs_.size() - 1);
        neurons_[pop.first + i].v = rest;
      }
    }

    fanout_offsets_.assign(n + 1, 0);
    const auto& projs = net.projections();
    for (const auto& proj : projs) {
      const auto first = net.population(proj.source).first;
      for (const auto& s : proj.synapses) ++fanout_offsets_[first + s.pre + 1];
    }
    for (std::size_t i = 0; i < n; ++i) fanout_offsets_[i + 1] += fanout_offsets_[i];
    fanout_.resize(fanout_offsets_[n]);
    auto cursor = fanout_offsets_;
    weights_.resize(projs.size());
    buffers_.resize(projs.size());
    plastic_in_.resize(n);
    for (std::size_t p = 0; p < projs.size(); ++p) {
      const auto& proj = projs[p];
      const auto src_first = net.population(proj.source).first;
      const auto dst_first = net.population(proj.target).first;
      bool any_plastic = false;
      weights_[p].reserve(proj.synapses.size());
      for (std::size_t s = 0; s < proj.synapses.size(); ++s) {
        const auto& syn = proj.synapses[s];
        weights_[p].push_back(arith_.from_double(syn.weight));
        const PendingDelivery d{static_cast<ProjectionId>(p), static_cast<std::uint32_t>(s)};
        fanout_[cursor[src_first + syn.pre]++] = FanoutEntry{d, syn.delay};
        if (syn.plastic) {
          any_plastic = true;
          plastic_in_[dst_first + syn.post].push_back(d);
        }
      }
      if (any_plastic) buffers_[p].resize(proj.synapses.size());
    }
    if (net.plasticity()) {
      kernel_ = TickKernel<Arith>::compile(build_kernel_lut(*net.plasticity()), opt.tick_ms, arith_);
      has_kernel_ = true;
    }
  }

  void tick(Tick t, std::span<const NeuronId> inputs, bool learning, std::vector<SpikeEvent>& out) override {
    const auto& projs = net_.projections();

    // 1. deliveries
    auto& due = queue_.slot(t);
    plastic_arrivals_.clear();
    teaching_arrivals_.clear();
    for (const auto& d : due) {
      const auto& proj = projs[d.projection];
      const auto& syn = proj.synapses[d.synapse];
      const NeuronId post = net_.population(proj.target).first + syn.post;
      if (proj.kind == ProjectionKind::teaching) {
        teaching_arrivals_.push_back(post);
        continue;
      }
      auto& target = neurons_[post];
      const V w = weights_[d.projection][d.synapse];
      if (syn.sign == SynapseSign::excitatory) {
        target.i_exc = arith_.add(target.i_exc, w);
      } else {
        target.i_inh = arith_.add(target.i_inh, w);
      }
      if (syn.plastic) plastic_arrivals_.push_back(d);
    }
    due.clear();

    // 2. external input
    for (const NeuronId id : inputs) {
      if (id >= is_source_.size() || !is_source_[id]) {
        throw EngineFault(id, t, "input spike for a neuron that is not a spike source");
      }
      out.push_back({t, id});
      schedule(t, t, id);
    }

    // 3. plasticity
    if (learning && has_kernel_) {
      for (const auto& d : plastic_arrivals_) {
        potentiate(arith_, weights_[d.projection][d.synapse], buffers_[d.projection][d.synapse], t, kernel_);
      }
      for (const NeuronId post : teaching_arrivals_) {
        for (const auto& d : plastic_in_[post]) {
          depress(arith_, weights_[d.projection][d.synapse], buffers_[d.projection][d.synapse], t, kernel_);
        }
      }
    }

    // 4. integration
    late_.clear();
    for (NeuronId id = 0; id < neurons_.size(); ++id) {
      const int c = coeff_index_[id];
      if (c < 0) continue;
      auto& n = neurons_[id];
      const auto x = advance(arith_, n, coeffs_[static_cast<std::size_t>(c)]);
      if constexpr (std::is_same_v<Arith, FloatArith>) {
        if (!std::isfinite(n.v) || !std::isfinite(n.i_exc) || !std::isfinite(n.i_inh)) {
          throw EngineFault(id, t, "non-finite membrane state");
        }
      }
      if (x != Crossing::none) {
        const Tick at = x == Crossing::first_half ? t : t + 1;
        (x == Crossing::first_half ? out : late_).push_back({at, id});
        schedule(t, at, id);
      }
    }
    out.insert(out.end(), late_.begin(), late_.end());
  }

  LifState state(NeuronId id) const override {
    const auto& n = neurons_.at(id);
    return {arith_.to_double(n.v), arith_.to_double(n.i_exc), arith_.to_double(n.i_inh), n.refractory};
  }

  double weight(ProjectionId proj, std::size_t syn) const override { return arith_.to_double(weights_.at(proj).at(syn)); }

  void set_weight(ProjectionId proj, std::size_t syn, double w) override {
    weights_.at(proj).at(syn) = arith_.from_double(w);
  }

  std::uint64_t saturations() const override { return arith_.saturations(); }

private:
  void schedule(Tick now, Tick emitted, NeuronId id) {
    for (auto i = fanout_offsets_[id]; i < fanout_offsets_[id + 1]; ++i) {
      const auto& f = fanout_[i];
      queue_.schedule(now, emitted + f.delay, f.delivery);
    }
  }

  const Network& net_;
  Arith arith_;
  std::vector<Coefficients<Arith>> coeffs_;
  std::vector<int> coeff_index_;
  std::vector<bool> is_source_;
  std::vector<NeuronSlot<Arith>> neurons_;
  std::vector<std::size_t> fanout_offsets_;
  std::vector<FanoutEntry> fanout_;
  std::vector<std::vector<V>> weights_;
  std::vector<std::vector<SynapseSpikeBuffer>> buffers_;
  std::vector<std::vector<PendingDelivery>> plastic_in_;
  DelayQueue queue_;
  TickKernel<Arith> kernel_;
  bool has_kernel_ = false;
  std::vector<PendingDelivery> plastic_arrivals_;
  std::vector<NeuronId> teaching_arrivals_;
  std::vector<SpikeEvent> late_;
};

}  // namespace

LifStepResult lif_step(const LifState& state, const LifParams& params, double dt_ms) {
  FloatArith a;
  const auto c = Coefficients<FloatArith>::make(params, LifPropagator::compute(params, dt_ms), a, dt_ms);
  NeuronSlot<FloatArith> n{state.v, state.i_exc, state.i_inh, state.refractory_remaining};
  const auto x = advance(a, n, c);
  return {{n.v, n.i_exc, n.i_inh, n.refractory}, x != Crossing::none, x == Crossing::first_half};
}

struct Engine::Impl {
  Network network;
  EngineOptions options;
  Tick now = 0;
  bool learning = true;
  std::unique_ptr<CoreBase> core;
};

Engine::Engine(Network network, EngineOptions options) : impl_(std::make_unique<Impl>()) {
  network.validate();
  if (!(options.tick_ms > 0.0)) throw std::invalid_argument("tick must be positive");
  impl_->network = std::move(network);
  impl_->options = options;
  impl_->learning = options.learning;
  if (options.numeric.kind == NumericKind::fixed) {
    impl_->core = std::make_unique<Core<FixedArith>>(impl_->network, options, FixedArith(options.numeric.fixed));
  } else {
    impl_->core = std::make_unique<Core<FloatArith>>(impl_->network, options, FloatArith{});
  }
}

Engine::~Engine() = default;
Engine::Engine(Engine&&) noexcept = default;
Engine& Engine::operator=(Engine&&) noexcept = default;

std::vector<SpikeEvent> Engine::tick(std::span<const NeuronId> input_spikes) {
  std::vector<SpikeEvent> out;
  impl_->core->tick(impl_->now, input_spikes, impl_->learning, out);
  ++impl_->now;
  return out;
}

Tick Engine::now() const { return impl_->now; }
const Network& Engine::network() const { return impl_->network; }
const EngineOptions& Engine::options() const { return impl_->options; }
LifState Engine::state(NeuronId id) const { return impl_->core->state(id); }
double Engine::weight(ProjectionId proj, std::size_t synapse) const { return impl_->core->weight(proj, synapse); }

std::vector<double> Engine::weights(ProjectionId proj) const {
  const auto n = impl_->network.projection(proj).synapses.size();
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = impl_->core->weight(proj, i);
  return w;
}

void Engine::set_weights(ProjectionId proj, std::span<const double> weights) {
  const auto n = impl_->network.projection(proj).synapses.size();
  if (weights.size() != n) throw std::invalid_argument("weight vector size does not match projection");
  for (std::size_t i = 0; i < n; ++i) impl_->core->set_weight(proj, i, weights[i]);
}

void Engine::reset_weights() {
  const auto& projs = impl_->network.projections();
  for (std::size_t p = 0; p < projs.size(); ++p) {
    for (std::size_t s = 0; s < projs[p].synapses.size(); ++s) {
      impl_->core->set_weight(static_cast<ProjectionId>(p), s, projs[p].synapses[s].weight);
    }
  }
}

void Engine::set_learning(bool enabled) { impl_->learning = enabled; }
bool Engine::learning() const { return impl_->learning; }
std::uint64_t Engine::saturation_count() const { return impl_->core->saturations(); }

std::vector<SpikeEvent> run_for(Engine& engine, std::span<const SpikeEvent> inputs, Tick n_ticks) {
  std::vector<SpikeEvent> out;
  std::vector<NeuronId> now;
  std::size_t next = 0;
  const Tick stop = engine.now() + n_ticks;
  while (next < inputs.size() && inputs[next].t < engine.now()) ++next;
  while (engine.now() < stop) {
    now.clear();
    for (; next < inputs.size() && inputs[next].t == engine.now(); ++next) now.push_back(inputs[next].neuron);
    if (next < inputs.size() && inputs[next].t < engine.now()) throw std::invalid_argument("inputs must be sorted by tick");
    auto spikes = engine.tick(now);
    out.insert(out.end(), spikes.begin(), spikes.end());
  }
  return out;
}

}  // namespace cerebloop
