#include "cerebloop/session.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cerebloop/logs.hpp"

namespace cerebloop {

SessionError::SessionError(double t_s, const std::string& what)
    : std::runtime_error("session fault at t=" + std::to_string(t_s) + " s: " + what), t_s_(t_s) {}

namespace {

Tick to_ticks(double ms, double tick_ms) { return static_cast<Tick>(std::llround(ms / tick_ms)); }

/// Distinct generator seeds for the stochastic codecs.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Cerebellum build_for(const SessionConfig& cfg) {
  auto cc = cfg.cerebellum;
  cc.seed = cfg.seed;
  return build_network(cc);
}

EngineOptions engine_options(const SessionConfig& cfg) {
  EngineOptions o;
  o.numeric = cfg.numeric;
  o.tick_ms = cfg.tick_ms;
  o.learning = cfg.learning;
  return o;
}

}  // namespace

struct Session::Impl {
  explicit Impl(SessionConfig c)
      : cfg((c.validate(), std::move(c))),
        cb(build_for(cfg)),
        engine(cb.network, engine_options(cfg)),
        mof_act(cfg.mof_act, derive_seed(cfg.seed, 0)),
        mof_set(cfg.mof_set, derive_seed(cfg.seed, 1)),
        ino{RateEncoder(cfg.ino_r_max_hz, cfg.ino_stochastic, derive_seed(cfg.seed, 2)),
            RateEncoder(cfg.ino_r_max_hz, cfg.ino_stochastic, derive_seed(cfg.seed, 3))},
        decoder{MotorDecoder(cfg.decoder), MotorDecoder(cfg.decoder)},
        plant(pretensioned_state(cfg.pretension_n, cfg.plant)),
        pid(cfg.pid),
        setpoint(cfg.setpoint) {
    const double h = cfg.tick_ms;
    plant_ticks = to_ticks(cfg.plant_period_ms, h);
    mof_act_ticks = to_ticks(cfg.mof_act.update_period_ms, h);
    mof_set_ticks = to_ticks(cfg.mof_set.update_period_ms, h);
    decode_ticks = to_ticks(cfg.decoder.update_period_ms, h);
    frame_ticks = to_ticks(cfg.telemetry_period_ms, h);
    total_ticks = to_ticks(cfg.duration_s * 1e3, h);

    const auto& net = cb.network;
    pop_of.resize(net.neuron_count());
    for (PopulationId p = 0; p < net.populations().size(); ++p) {
      const auto& pop = net.population(p);
      std::fill_n(pop_of.begin() + pop.first, pop.size, p);
    }
    frame_counts.assign(net.populations().size(), 0);
    for (Side s : kSides) {
      dcn_pop[index(s)] = cb.layout.dcn[index(s)];
      ino_neuron[index(s)] = net.population(cb.layout.ino[index(s)]).first;
    }
    mof_act_first = net.population(cb.layout.mof_act).first;
    mof_set_first = net.population(cb.layout.mof_set).first;
    phi_set = setpoint.value(0.0);
    for (auto& cmd : cfg.timeline) pending.push_back({cmd, next_seq++});
  }

  double now_s() const { return static_cast<double>(t) * cfg.tick_ms * 1e-3; }

  Tick pid_ticks() const { return to_ticks(pid.period_ms, cfg.tick_ms); }

  void run_tick() {
    phi_set = setpoint.value(now_s());

    if (t % plant_ticks == 0) {
      double ff_l = 0.0;
      double ff_r = 0.0;
      if (cfg.feedforward_per_deg != 0.0) {
        const double ff = cfg.feedforward_per_deg * phi_set;
        ff_r = std::max(ff, 0.0);
        ff_l = std::max(-ff, 0.0);
      }
      plant = plant_step(plant, decoder[0].command().omega + ff_l, decoder[1].command().omega + ff_r, cfg.plant,
                         cfg.plant_period_ms);
      ++counters.plant_steps;
    }
    if (t % pid_ticks() == 0) {
      teach = pid_teacher(phi_set, plant.phi_deg, pid_state, pid);
      ino[0].set_value(teach.eps_left);
      ino[1].set_value(teach.eps_right);
      ++counters.teacher_updates;
    }
    if (t % mof_set_ticks == 0) {
      mof_set.set_value(phi_set);
      ++counters.mof_set_updates;
    }
    if (t % mof_act_ticks == 0) {
      mof_act.set_value(plant.phi_deg);
      ++counters.mof_act_updates;
    }

    inputs.clear();
    mof_act.step(cfg.tick_ms, fired);
    for (auto i : fired) inputs.push_back(mof_act_first + i);
    mof_set.step(cfg.tick_ms, fired);
    for (auto i : fired) inputs.push_back(mof_set_first + i);
    for (Side s : kSides) {
      if (ino[index(s)].step(cfg.tick_ms)) inputs.push_back(ino_neuron[index(s)]);
    }

    auto spikes = engine.tick(inputs);
    ++counters.engine_ticks;
    std::array<std::uint32_t, 2> dcn_spikes{};
    for (const auto& sp : spikes) {
      const auto p = pop_of[sp.neuron];
      ++frame_counts[p];
      if (p == dcn_pop[0]) ++dcn_spikes[0];
      if (p == dcn_pop[1]) ++dcn_spikes[1];
    }
    for (Side s : kSides) decoder[index(s)].add_spikes(dcn_spikes[index(s)]);
    if (capture) frame_spikes.insert(frame_spikes.end(), spikes.begin(), spikes.end());

    ++t;
    if (t % decode_ticks == 0) {
      for (auto& d : decoder) d.update();
      ++counters.decoder_updates;
    }
  }

  void apply_due_commands() {
    const double now = now_s();
    std::vector<std::pair<Command, std::uint64_t>> due;
    for (auto it = pending.begin(); it != pending.end();) {
      if (!it->first.at_s || *it->first.at_s <= now + 1e-9) {
        due.push_back(std::move(*it));
        it = pending.erase(it);
      } else {
        ++it;
      }
    }
    std::stable_sort(due.begin(), due.end(), [now](const auto& a, const auto& b) {
      return a.first.at_s.value_or(now) < b.first.at_s.value_or(now);
    });
    for (auto& [cmd, seq] : due) results.push_back(apply(cmd));
  }

  CommandResult apply(const Command& cmd) {
    CommandResult r;
    r.command = cmd;
    r.applied_at_s = now_s();
    switch (cmd.kind) {
      case CommandKind::set_setpoint:
        setpoint.kind = WaveformKind::manual;
        setpoint.value_deg = cmd.value_deg;
        break;
      case CommandKind::set_waveform:
        setpoint = cmd.waveform;
        break;
      case CommandKind::set_pid: {
        PidConfig next = pid;
        next.k_p = cmd.k_p;
        next.k_i = cmd.k_i;
        next.k_d = cmd.k_d;
        try {
          next.validate();
          pid = next;
        } catch (const std::exception& e) {
          r.ok = false;
          r.message = e.what();
        }
        break;
      }
      case CommandKind::freeze_learning:
        engine.set_learning(false);
        break;
      case CommandKind::unfreeze_learning:
        engine.set_learning(true);
        break;
      case CommandKind::reset_weights:
        engine.reset_weights();
        break;
      case CommandKind::snapshot:
        r.snapshot = take_snapshot();
        break;
      case CommandKind::subscribe_raster:
      case CommandKind::pause:
      case CommandKind::resume:
        // Handled by the server; nothing changes in the model.
        break;
    }
    if (!r.ok && r.message.empty()) r.message = "rejected";
    return r;
  }

  WeightSnapshot take_snapshot() const {
    WeightSnapshot s;
    s.t_s = now_s();
    for (Side side : kSides) {
      const auto id = cb.layout.parallel_fibers[index(side)];
      s.projections.push_back({id, cb.network.projection(id).name, engine.weights(id)});
    }
    return s;
  }

  TelemetryFrame step_frame() {
    apply_due_commands();
    std::fill(frame_counts.begin(), frame_counts.end(), 0U);
    frame_spikes.clear();
    do {
      run_tick();
    } while (t % frame_ticks != 0);
    ++counters.telemetry_frames;

    TelemetryFrame f;
    f.index = frame_index++;
    f.row.t = now_s();
    f.row.phi_set = phi_set;
    f.row.phi_act = plant.phi_deg;
    f.row.eps_l = teach.eps_left;
    f.row.eps_r = teach.eps_right;
    f.row.omega_l = decoder[0].command().omega;
    f.row.omega_r = decoder[1].command().omega;
    f.learning = engine.learning();
    f.population_counts = frame_counts;
    if (capture) f.spikes = frame_spikes;
    return f;
  }

  SessionConfig cfg;
  Cerebellum cb;
  Engine engine;
  PopulationEncoder mof_act;
  PopulationEncoder mof_set;
  std::array<RateEncoder, 2> ino;
  std::array<MotorDecoder, 2> decoder;
  PlantState plant;
  PidConfig pid;
  PidState pid_state;
  WaveformConfig setpoint;
  TeachingSignal teach;
  double phi_set = 0.0;
  SchedulingCounters counters;

  Tick t = 0;
  Tick plant_ticks = 1, mof_act_ticks = 1, mof_set_ticks = 1, decode_ticks = 1, frame_ticks = 1, total_ticks = 0;
  std::uint64_t frame_index = 0;

  std::vector<PopulationId> pop_of;
  std::array<PopulationId, 2> dcn_pop{};
  std::array<NeuronId, 2> ino_neuron{};
  NeuronId mof_act_first = 0;
  NeuronId mof_set_first = 0;
  std::vector<NeuronId> inputs;
  std::vector<std::uint32_t> fired;
  std::vector<std::uint32_t> frame_counts;
  bool capture = false;
  std::vector<SpikeEvent> frame_spikes;

  std::deque<std::pair<Command, std::uint64_t>> pending;
  std::uint64_t next_seq = 0;
  std::vector<CommandResult> results;
};

Session::Session(SessionConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
Session::~Session() = default;
Session::Session(Session&&) noexcept = default;
Session& Session::operator=(Session&&) noexcept = default;

const SessionConfig& Session::config() const { return impl_->cfg; }
const Network& Session::network() const { return impl_->cb.network; }
const CerebellumLayout& Session::layout() const { return impl_->cb.layout; }
const Engine& Session::engine() const { return impl_->engine; }
const PlantState& Session::plant() const { return impl_->plant; }
const SchedulingCounters& Session::counters() const { return impl_->counters; }
Tick Session::tick() const { return impl_->t; }
double Session::time_s() const { return impl_->now_s(); }
bool Session::finished() const { return impl_->t >= impl_->total_ticks; }
void Session::set_capture_spikes(bool on) { impl_->capture = on; }

void Session::enqueue(Command cmd) { impl_->pending.push_back({std::move(cmd), impl_->next_seq++}); }

std::vector<CommandResult> Session::take_results() { return std::exchange(impl_->results, {}); }

TelemetryFrame Session::step_frame() {
  try {
    return impl_->step_frame();
  } catch (const SessionError&) {
    throw;
  } catch (const std::exception& e) {
    throw SessionError(time_s(), e.what());
  }
}

WeightSnapshot Session::snapshot() const { return impl_->take_snapshot(); }

SessionResult run_session(const SessionConfig& cfg, double metrics_window_s) {
  Session session(cfg);
  const auto& out_dir = cfg.logs.out_dir;
  const bool logging = !out_dir.empty();
  session.set_capture_spikes(logging && cfg.logs.spikes);

  std::optional<TelemetryWriter> telemetry;
  std::optional<SpikeWriter> spikes;
  auto path = [&](const std::string& name) { return (std::filesystem::path(out_dir) / name).string(); };
  if (logging) {
    std::filesystem::create_directories(out_dir);
    std::ofstream(path("config.json"), std::ios::binary) << session_config_to_json(cfg);
    telemetry.emplace(path("telemetry.csv"));
    if (cfg.logs.spikes) spikes.emplace(path("spikes.csv"), session.network(), cfg.tick_ms);
  }
  auto dump_weights = [&](const WeightSnapshot& snap) {
    if (logging) write_weights_csv(path(weights_file_name(snap.t_s)), snap, session.network());
  };

  SessionResult result;
  std::vector<std::uint64_t> totals(session.network().populations().size(), 0);
  const double wp = cfg.logs.weights_period_s;
  double next_weights = wp > 0.0 ? 0.0 : -1.0;
  double last_dump = -1.0;
  try {
    while (!session.finished()) {
      if (next_weights >= 0.0 && session.time_s() + 1e-9 >= next_weights) {
        dump_weights(session.snapshot());
        last_dump = session.time_s();
        next_weights += wp;
      }
      const auto frame = session.step_frame();
      for (const auto& r : session.take_results()) {
        if (r.snapshot) dump_weights(*r.snapshot);
      }
      result.telemetry.push_back(frame.row);
      for (std::size_t p = 0; p < totals.size(); ++p) totals[p] += frame.population_counts[p];
      if (telemetry) telemetry->write(frame.row);
      if (spikes) spikes->write(frame.spikes);
    }
  } catch (const std::exception& e) {
    if (telemetry) telemetry->flush();
    if (spikes) spikes->flush();
    if (const auto* se = dynamic_cast<const SessionError*>(&e)) throw *se;
    throw SessionError(session.time_s(), e.what());
  }
  if (std::abs(last_dump - session.time_s()) > 1e-9) dump_weights(session.snapshot());

  result.metrics = compute_metrics(result.telemetry, metrics_window_s);
  const double seconds = session.time_s();
  for (PopulationId p = 0; p < totals.size(); ++p) {
    const auto& pop = session.network().population(p);
    result.metrics.mean_rate_hz[pop.name] = static_cast<double>(totals[p]) / (seconds * pop.size);
  }
  result.counters = session.counters();
  result.saturations = session.engine().saturation_count();
  return result;
}

std::vector<SpikeEvent> open_loop_inputs(const SessionConfig& cfg, const Network& net, const CerebellumLayout& layout,
                                         double duration_s) {
  PopulationEncoder act(cfg.mof_act, derive_seed(cfg.seed, 0));
  PopulationEncoder set(cfg.mof_set, derive_seed(cfg.seed, 1));
  std::array<RateEncoder, 2> ino{RateEncoder(cfg.ino_r_max_hz, cfg.ino_stochastic, derive_seed(cfg.seed, 2)),
                                 RateEncoder(cfg.ino_r_max_hz, cfg.ino_stochastic, derive_seed(cfg.seed, 3))};
  const double h = cfg.tick_ms;
  const Tick n = to_ticks(duration_s * 1e3, h);
  const Tick pid_ticks = to_ticks(cfg.pid.period_ms, h);
  const Tick act_ticks = to_ticks(cfg.mof_act.update_period_ms, h);
  const Tick set_ticks = to_ticks(cfg.mof_set.update_period_ms, h);
  const double lag_s = cfg.setpoint.kind == WaveformKind::manual ? 0.0 : 0.25 / cfg.setpoint.frequency_hz;
  const NeuronId act_first = net.population(layout.mof_act).first;
  const NeuronId set_first = net.population(layout.mof_set).first;
  std::array<NeuronId, 2> ino_id{net.population(layout.ino[0]).first, net.population(layout.ino[1]).first};

  PidState pid;
  std::vector<SpikeEvent> out;
  std::vector<std::uint32_t> fired;
  for (Tick t = 0; t < n; ++t) {
    const double t_s = static_cast<double>(t) * h * 1e-3;
    const double phi_set = cfg.setpoint.value(t_s);
    const double phi_act = 0.5 * cfg.setpoint.value(t_s - lag_s);
    if (t % pid_ticks == 0) {
      const auto teach = pid_teacher(phi_set, phi_act, pid, cfg.pid);
      ino[0].set_value(teach.eps_left);
      ino[1].set_value(teach.eps_right);
    }
    if (t % set_ticks == 0) set.set_value(phi_set);
    if (t % act_ticks == 0) act.set_value(phi_act);
    act.step(h, fired);
    for (auto i : fired) out.push_back({t, act_first + i});
    set.step(h, fired);
    for (auto i : fired) out.push_back({t, set_first + i});
    for (std::size_t s = 0; s < 2; ++s) {
      if (ino[s].step(h)) out.push_back({t, ino_id[s]});
    }
  }
  return out;
}

}  // namespace cerebloop
