#include "cerebloop/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace cerebloop {

bool EventQueue::Later::operator()(const OracleEvent& x, const OracleEvent& y) const {
  if (x.t_ms != y.t_ms) return x.t_ms > y.t_ms;
  if (x.neuron != y.neuron) return x.neuron > y.neuron;
  if (x.kind != y.kind) return x.kind > y.kind;
  return x.seq > y.seq;
}

void EventQueue::push(OracleEvent e) {
  e.seq = next_seq_++;
  heap_.push(e);
}

OracleEvent EventQueue::pop() {
  if (heap_.empty()) throw std::logic_error("pop from an empty event queue");
  OracleEvent e = heap_.top();
  heap_.pop();
  if (e.t_ms < last_popped_) throw std::logic_error("event queue order violation");
  last_popped_ = e.t_ms;
  return e;
}

namespace {

/// Free membrane trajectory after an event, as a sum of exponentials:
///   v(s) = v_inf + cm e^{-s/tm} + ce e^{-s/te} + ci e^{-s/ti}
///          + (alpha_e + alpha_i) (s/tm) e^{-s/tm}
/// The alpha terms replace ce/ci when a synaptic time constant equals tm.
struct Trajectory {
  double v_inf = 0.0;
  double cm = 0.0, ce = 0.0, ci = 0.0;
  double alpha = 0.0;
  double tm = 1.0, te = 1.0, ti = 1.0;

  static Trajectory from(const LifState& st, const LifParams& p) {
    Trajectory tr;
    tr.tm = p.tau_m;
    tr.te = p.tau_syn_exc;
    tr.ti = p.tau_syn_inh;
    tr.v_inf = p.v_rest + p.r_m * p.i_bias;
    double membrane = st.v - tr.v_inf;
    auto add_current = [&](double current, double tau, double& coeff) {
      if (std::abs(tau - p.tau_m) <= 1e-12 * p.tau_m) {
        tr.alpha += p.r_m * current;
        return;
      }
      coeff = p.r_m * current * tau / (tau - p.tau_m);
      membrane -= coeff;
    };
    add_current(st.i_exc, p.tau_syn_exc, tr.ce);
    add_current(-st.i_inh, p.tau_syn_inh, tr.ci);
    tr.cm = membrane;
    return tr;
  }

  double v(double s) const {
    const double em = std::exp(-s / tm);
    return v_inf + cm * em + ce * std::exp(-s / te) + ci * std::exp(-s / ti) + alpha * (s / tm) * em;
  }

  /// Upper bound of v over [s, inf).
  double bound(double s) const {
    double b = v_inf;
    if (cm > 0.0) b += cm * std::exp(-s / tm);
    if (ce > 0.0) b += ce * std::exp(-s / te);
    if (ci > 0.0) b += ci * std::exp(-s / ti);
    if (alpha > 0.0) {
      const double x = s / tm;
      b += alpha * (x >= 1.0 ? x * std::exp(-x) : std::exp(-1.0));
    }
    return b;
  }
};

struct NeuronRecord {
  bool lif = false;
  PopulationId population = 0;
  double t_last = 0.0;
  LifState state;
  double refractory_until = -1.0;
  std::uint64_t version = 0;
};

struct Fanout {
  ProjectionId projection;
  std::uint32_t synapse;
  std::uint32_t delay;
};

Tick arrival_tick(double t_ms, double tick_ms) { return static_cast<Tick>(std::ceil(t_ms / tick_ms - 1e-9)); }

class OracleRun {
public:
  OracleRun(const Network& net, const OracleOptions& opt) : net_(net), opt_(opt) {
    const auto n = net.neuron_count();
    if (n > opt.max_neurons) {
      throw std::invalid_argument("oracle is limited to " + std::to_string(opt.max_neurons) + " neurons, network has " +
                                  std::to_string(n));
    }
    neurons_.resize(n);
    for (PopulationId p = 0; p < net.populations().size(); ++p) {
      const auto& pop = net.population(p);
      for (std::uint32_t i = 0; i < pop.size; ++i) {
        auto& rec = neurons_[pop.first + i];
        rec.lif = pop.kind == PopulationKind::lif;
        rec.population = p;
        rec.state = LifState::at_rest(pop.params);
      }
    }
    fanout_.resize(n);
    plastic_in_.resize(n);
    const auto& projs = net.projections();
    weights_.resize(projs.size());
    buffers_.resize(projs.size());
    for (ProjectionId p = 0; p < projs.size(); ++p) {
      const auto& proj = projs[p];
      const auto src = net.population(proj.source).first;
      const auto dst = net.population(proj.target).first;
      for (std::uint32_t s = 0; s < proj.synapses.size(); ++s) {
        const auto& syn = proj.synapses[s];
        weights_[p].push_back(syn.weight);
        fanout_[src + syn.pre].push_back({p, s, syn.delay});
        if (syn.plastic) plastic_in_[dst + syn.post].push_back({p, s, 0});
      }
      buffers_[p].resize(proj.synapses.size());
    }
    if (net.plasticity()) lut_ = build_kernel_lut(*net.plasticity());
  }

  OracleResult run(std::span<const SpikeEvent> inputs, double duration_ms) {
    for (const auto& in : inputs) {
      if (in.neuron >= neurons_.size() || neurons_[in.neuron].lif) {
        throw std::invalid_argument("oracle input for neuron " + std::to_string(in.neuron) +
                                    ", which is not a spike source");
      }
      const double t = static_cast<double>(in.t) * opt_.tick_ms;
      if (t <= duration_ms) queue_.push({t, in.neuron, OracleEventKind::source_spike, 0, 0, 0});
    }
    // Bias current alone can drive a cell to threshold.
    for (NeuronId n = 0; n < neurons_.size(); ++n) {
      if (neurons_[n].lif) predict(n);
    }
    OracleResult result;
    while (!queue_.empty()) {
      const OracleEvent e = queue_.pop();
      if (e.t_ms > duration_ms) break;
      ++result.events_processed;
      switch (e.kind) {
        case OracleEventKind::source_spike:
          result.spikes.push_back({e.t_ms, e.neuron});
          emit(e.neuron, e.t_ms);
          break;
        case OracleEventKind::delivery:
          deliver(e);
          break;
        case OracleEventKind::threshold:
          if (e.b == neurons_[e.neuron].version) fire(e.neuron, e.t_ms, result);
          break;
        case OracleEventKind::refractory_end:
          if (e.b == neurons_[e.neuron].version) {
            advance(e.neuron, e.t_ms);
            predict(e.neuron);
          }
          break;
      }
    }
    result.weights = weights_;
    return result;
  }

private:
  const LifParams& params(NeuronId n) const { return net_.population(neurons_[n].population).params; }

  void advance(NeuronId n, double t) {
    auto& rec = neurons_[n];
    const auto& p = params(n);
    if (t <= rec.t_last) return;
    if (rec.refractory_until > rec.t_last) {
      const double end = std::min(t, rec.refractory_until);
      const double seg = end - rec.t_last;
      rec.state.v = p.v_reset;
      rec.state.i_exc *= std::exp(-seg / p.tau_syn_exc);
      rec.state.i_inh *= std::exp(-seg / p.tau_syn_inh);
      rec.t_last = end;
      if (t <= end) return;
    }
    const double dt = t - rec.t_last;
    const auto tr = Trajectory::from(rec.state, p);
    rec.state.v = tr.v(dt);
    rec.state.i_exc *= std::exp(-dt / p.tau_syn_exc);
    rec.state.i_inh *= std::exp(-dt / p.tau_syn_inh);
    rec.t_last = t;
  }

  void predict(NeuronId n) {
    auto& rec = neurons_[n];
    ++rec.version;
    if (rec.refractory_until > rec.t_last) {
      queue_.push({rec.refractory_until, n, OracleEventKind::refractory_end, 0, 0, rec.version});
      return;
    }
    const auto s = next_threshold_crossing(rec.state, params(n), opt_.scan_step_ms, opt_.bisection_tol_ms);
    if (s) queue_.push({rec.t_last + *s, n, OracleEventKind::threshold, 0, 0, rec.version});
  }

  void emit(NeuronId n, double t) {
    for (const auto& f : fanout_[n]) {
      queue_.push({t + f.delay * opt_.tick_ms, n, OracleEventKind::delivery, 0, f.projection, f.synapse});
    }
  }

  void fire(NeuronId n, double t, OracleResult& result) {
    advance(n, t);
    auto& rec = neurons_[n];
    const auto& p = params(n);
    result.spikes.push_back({t, n});
    rec.state.v = p.v_reset;
    rec.refractory_until = t + p.t_refractory;
    emit(n, t);
    predict(n);
  }

  void deliver(const OracleEvent& e) {
    const auto& proj = net_.projection(e.a);
    const auto syn_index = static_cast<std::uint32_t>(e.b);
    const auto& syn = proj.synapses[syn_index];
    const NeuronId post = net_.population(proj.target).first + syn.post;
    if (post >= neurons_.size()) throw std::logic_error("delivery to unknown neuron");
    advance(post, e.t_ms);
    const Tick q = arrival_tick(e.t_ms, opt_.tick_ms);
    if (proj.kind == ProjectionKind::teaching) {
      if (opt_.learning && lut_) {
        for (const auto& f : plastic_in_[post]) depress(f, q);
      }
      return;
    }
    auto& st = neurons_[post].state;
    const double w = weights_[e.a][syn_index];
    if (syn.sign == SynapseSign::excitatory) {
      st.i_exc += w;
    } else {
      st.i_inh += w;
    }
    if (syn.plastic && opt_.learning && lut_) {
      auto& weight = weights_[e.a][syn_index];
      weight = std::clamp(weight + lut_->a_ltp, lut_->w_min, lut_->w_max);
      buffers_[e.a][syn_index].push(q);
    }
    predict(post);
  }

  void depress(const Fanout& f, Tick q_ino) {
    const auto& buf = buffers_[f.projection][f.synapse];
    double sum = 0.0;
    for (std::size_t i = 0; i < buf.size(); ++i) {
      if (buf[i] > q_ino) break;
      sum += lut_->at(static_cast<double>(buf[i] - q_ino) * opt_.tick_ms);
    }
    auto& w = weights_[f.projection][f.synapse];
    w = std::clamp(w + sum, lut_->w_min, lut_->w_max);
  }

  const Network& net_;
  OracleOptions opt_;
  std::vector<NeuronRecord> neurons_;
  std::vector<std::vector<Fanout>> fanout_;
  std::vector<std::vector<Fanout>> plastic_in_;
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<SynapseSpikeBuffer>> buffers_;
  std::optional<KernelLut> lut_;
  EventQueue queue_;
};

}  // namespace

std::optional<double> next_threshold_crossing(const LifState& state, const LifParams& params, double scan_step_ms,
                                              double tol_ms) {
  const auto tr = Trajectory::from(state, params);
  const double thr = params.v_threshold;
  if (tr.v(0.0) >= thr) return 0.0;
  const double horizon = 50.0 * std::max({params.tau_m, params.tau_syn_exc, params.tau_syn_inh});
  double s = 0.0;
  while (s < horizon) {
    if (tr.bound(s) < thr) return std::nullopt;
    const double next = s + scan_step_ms;
    if (tr.v(next) >= thr) {
      double lo = s;
      double hi = next;
      while (hi - lo > tol_ms) {
        const double mid = 0.5 * (lo + hi);
        (tr.v(mid) >= thr ? hi : lo) = mid;
      }
      return hi;
    }
    s = next;
  }
  return std::nullopt;
}

OracleResult event_driven_run(const Network& net, std::span<const SpikeEvent> inputs, double duration_ms,
                              const OracleOptions& options) {
  net.validate();
  OracleRun run(net, options);
  return run.run(inputs, duration_ms);
}

double DivergenceReport::max_relative_population_delta() const {
  double m = 0.0;
  for (const auto& p : populations) m = std::max(m, p.relative);
  return m;
}

DivergenceReport compare_runs(const Network& net, std::span<const TimedSpike> a, std::span<const TimedSpike> b,
                              double tol_ms) {
  const auto n = net.neuron_count();
  std::vector<std::vector<double>> ta(n), tb(n);
  for (const auto& s : a) ta.at(s.neuron).push_back(s.t_ms);
  for (const auto& s : b) tb.at(s.neuron).push_back(s.t_ms);

  DivergenceReport r;
  double offset_sum = 0.0;
  std::vector<std::size_t> count_a(net.populations().size()), count_b(net.populations().size());
  for (NeuronId id = 0; id < n; ++id) {
    auto& x = ta[id];
    auto& y = tb[id];
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const auto pop = net.population_of(id);
    count_a[pop] += x.size();
    count_b[pop] += y.size();
    if (x.size() != y.size()) ++r.neurons_with_count_delta;
    std::size_t i = 0, j = 0;
    while (i < x.size() || j < y.size()) {
      if (i < x.size() && j < y.size() && std::abs(x[i] - y[j]) <= tol_ms) {
        const double off = y[j] - x[i];
        r.max_offset_ms = std::max(r.max_offset_ms, std::abs(off));
        offset_sum += std::abs(off);
        ++r.matched;
        ++i;
        ++j;
      } else if (j >= y.size() || (i < x.size() && x[i] < y[j])) {
        r.unmatched_a.push_back({x[i], id});
        ++i;
      } else {
        r.unmatched_b.push_back({y[j], id});
        ++j;
      }
    }
  }
  if (r.matched > 0) r.mean_abs_offset_ms = offset_sum / static_cast<double>(r.matched);
  for (const auto& v : {r.unmatched_a, r.unmatched_b}) {
    for (const auto& s : v) {
      if (!r.first_divergence_ms || s.t_ms < *r.first_divergence_ms) r.first_divergence_ms = s.t_ms;
    }
  }
  auto by_time = [](const TimedSpike& l, const TimedSpike& rr) {
    return l.t_ms != rr.t_ms ? l.t_ms < rr.t_ms : l.neuron < rr.neuron;
  };
  std::sort(r.unmatched_a.begin(), r.unmatched_a.end(), by_time);
  std::sort(r.unmatched_b.begin(), r.unmatched_b.end(), by_time);
  for (PopulationId p = 0; p < net.populations().size(); ++p) {
    PopulationDelta d;
    d.population = net.population(p).name;
    d.count_a = count_a[p];
    d.count_b = count_b[p];
    d.delta = static_cast<long long>(count_b[p]) - static_cast<long long>(count_a[p]);
    d.relative = static_cast<double>(std::llabs(d.delta)) / static_cast<double>(std::max<std::size_t>(count_a[p], 1));
    r.populations.push_back(d);
  }
  return r;
}

std::vector<TimedSpike> to_timed(std::span<const SpikeEvent> spikes, double tick_ms) {
  std::vector<TimedSpike> out;
  out.reserve(spikes.size());
  for (const auto& s : spikes) out.push_back({static_cast<double>(s.t) * tick_ms, s.neuron});
  return out;
}

Network rescale_delays(const Network& net, std::uint32_t factor) {
  if (factor == 0) throw std::invalid_argument("delay scale factor must be positive");
  Network out = net;
  for (ProjectionId p = 0; p < out.projections().size(); ++p) {
    for (auto& s : out.projection(p).synapses) s.delay *= factor;
  }
  return out;
}

}  // namespace cerebloop
