// Acceptance checks for the closed-loop simulator. Prints one PASS/FAIL line
// per criterion and exits non-zero when any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cerebloop/cerebellum.hpp"
#include "cerebloop/engine.hpp"
#include "cerebloop/metrics.hpp"
#include "cerebloop/oracle.hpp"
#include "cerebloop/plant.hpp"
#include "cerebloop/plasticity.hpp"
#include "cerebloop/session.hpp"
#include "plasticity_oracle.hpp"
#include "random_network.hpp"

using namespace cerebloop;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Default 300 s learning session, kept for the learning and teaching checks.
struct TrainedRun {
  std::vector<TelemetryRow> rows;
  std::vector<std::vector<std::uint32_t>> counts;
  CerebellumLayout layout;
};

const TrainedRun& trained_run() {
  static const TrainedRun run = [] {
    TrainedRun r;
    Session s(SessionConfig::standard());
    r.layout = s.layout();
    while (!s.finished()) {
      auto f = s.step_frame();
      r.rows.push_back(f.row);
      r.counts.push_back(std::move(f.population_counts));
    }
    return r;
  }();
  return run;
}

double naive_rmse(double* setpoint_rms = nullptr) {
  auto cfg = SessionConfig::standard();
  cfg.duration_s = 60.0;
  cfg.learning = false;
  const auto r = run_session(cfg);
  if (setpoint_rms) *setpoint_rms = r.metrics.setpoint_rms;
  return r.metrics.rmse;
}

Outcome learning_reproduction() {
  const auto& run = trained_run();
  const double t_end = run.rows.back().t;
  const double trained = tracking_rmse(run.rows, t_end - 60.0, t_end);
  const double naive = naive_rmse();
  const double first = tracking_rmse(run.rows, 0.0, 60.0);
  return {trained <= 0.5 * naive,
          fmt("final 60 s RMSE %.3f deg, naive RMSE %.3f deg, ratio %.3f (limit 0.5); first 60 s of training %.3f deg",
              trained, naive, trained / naive, first)};
}

Outcome naive_incoherence() {
  double sp_rms = 0.0;
  const double naive = naive_rmse(&sp_rms);
  return {naive >= 0.7 * sp_rms,
          fmt("naive RMSE %.3f deg, setpoint RMS %.3f deg, ratio %.3f (limit 0.7)", naive, sp_rms, naive / sp_rms)};
}

Outcome one_sided_teaching() {
  const auto& run = trained_run();
  const auto n = run.rows.size();
  double max_e = 0.0;
  for (const auto& r : run.rows) max_e = std::max(max_e, r.phi_set - r.phi_act);
  if (max_e <= 0.0) return {false, "error never positive"};
  const auto ino_l = run.layout.ino[static_cast<std::size_t>(Side::left)];
  const auto ino_r = run.layout.ino[static_cast<std::size_t>(Side::right)];
  std::size_t instants = 0, eps_bad = 0, rate_bad = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (run.rows[k].phi_set - run.rows[k].phi_act <= 0.8 * max_e) continue;
    ++instants;
    if (!(run.rows[k].eps_r > 0.9 && run.rows[k].eps_l == 0.0)) ++eps_bad;
    // Ten 50 ms frames around the instant.
    const std::size_t lo = k >= 4 ? k - 4 : 0;
    const std::size_t hi = std::min(n - 1, k + 5);
    std::uint64_t l = 0, r = 0;
    for (std::size_t j = lo; j <= hi; ++j) {
      l += run.counts[j][ino_l];
      r += run.counts[j][ino_r];
    }
    if (!(r > l)) ++rate_bad;
  }
  return {instants > 0 && eps_bad == 0 && rate_bad == 0,
          fmt("%zu instants above 80%% of max error %.2f deg; eps violations %zu, InO rate violations %zu", instants,
              max_e, eps_bad, rate_bad)};
}

Outcome plasticity_oracle() {
  auto kp = KernelParams::with_default_amplitudes(1.0);
  kp.a_ltd = 0.05;
  kp.a_ltp = 0.004;
  std::size_t mismatched = 0;
  std::size_t max_syn = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto sc = test_support::make_scenario(seed, 60.0, kp);
    max_syn = std::max<std::size_t>(max_syn, sc.n_syn);
    const Tick n_ticks = 60000;
    const auto expected = test_support::offline_trajectory(sc, kp, n_ticks);
    Engine e(sc.net, {NumericMode::float64(), 1.0, true});
    std::size_t next = 0;
    std::vector<NeuronId> now;
    bool ok = true;
    for (Tick t = 0; t < n_ticks && ok; ++t) {
      now.clear();
      while (next < sc.inputs.size() && sc.inputs[next].t == t) now.push_back(sc.inputs[next++].neuron);
      e.tick(now);
      const auto w = e.weights(0);
      for (std::uint32_t k = 0; k < sc.n_syn; ++k) ok &= w[k] == expected[static_cast<std::size_t>(t)][k];
    }
    mismatched += !ok;
  }
  const auto [a, b] = test_support::correlated_vs_control(5);
  const bool selective = a <= 0.8 * b;
  return {mismatched == 0 && selective,
          fmt("%zu/10 scenarios differ from the offline convolution (max %zu synapses); correlated %.4f vs control "
              "%.4f",
              mismatched, max_syn, a, b)};
}

Outcome kernel_lut() {
  double worst = 0.0;
  bool zero_outside = true, min_ok = true;
  for (const double bin : {0.5, 1.0, 2.0}) {
    auto p = KernelParams::with_default_amplitudes(1.0);
    p.bin_ms = bin;
    const auto lut = build_kernel_lut(p);
    for (std::size_t k = 0; k < lut.table.size(); ++k) {
      const double expected = test_support::gaussian_ltd(p, static_cast<double>(k) * bin);
      worst = std::max(worst, std::abs(lut.table[k] - expected) / std::abs(expected));
    }
    for (const double dt : {0.5 * bin, 1.0, 50.0, -p.window_ms - bin, -p.window_ms - 0.5 * bin, -1e4}) {
      zero_outside &= lut.at(dt) == 0.0;
    }
    const auto it = std::min_element(lut.table.begin(), lut.table.end());
    min_ok &= lut.bin_center(static_cast<std::size_t>(it - lut.table.begin())) == -p.t_peak_ms;
  }
  return {worst <= 1e-9 && zero_outside && min_ok,
          fmt("max relative bin error %.2e; zero outside window %s; minimum at -100 ms %s", worst,
              zero_outside ? "yes" : "no", min_ok ? "yes" : "no")};
}

Outcome engine_vs_oracle_random() {
  // Driven hard enough that every network fires and recurrence matters.
  test_support::RandomNetworkSpec spec;
  spec.w_source = 6.0;
  spec.w_recurrent = 3.0;
  spec.p_recurrent = 0.1;
  std::size_t identical = 0, spikes = 0, unmatched = 0;
  double max_offset = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto rc = test_support::random_case(seed, 10000.0, spec);
    Engine e(rc.network, {NumericMode::float64(), 1.0, false});
    const auto es = to_timed(run_for(e, rc.inputs, 10000), 1.0);
    const auto orc = event_driven_run(rc.network, rc.inputs, 10000.0 - 1e-9);
    const auto rep = compare_runs(rc.network, orc.spikes, es, 1.0);
    const bool ok = rep.identical_counts() && rep.unmatched_a.empty() && rep.unmatched_b.empty() &&
                    rep.max_offset_ms <= 1.0;
    identical += ok;
    spikes += orc.spikes.size();
    unmatched += rep.unmatched_a.size() + rep.unmatched_b.size();
    max_offset = std::max(max_offset, rep.max_offset_ms);
  }
  return {identical == 20,
          fmt("%zu/20 networks identical; %zu unmatched of %zu oracle spikes; max matched offset %.3f ms", identical,
              unmatched, spikes, max_offset)};
}

/// Worst per-population spike-count deviation of the fixed-point engine
/// from the oracle on the full cerebellum, open loop.
std::pair<double, std::string> fixed_point_deviation(bool learning) {
  const auto cfg = SessionConfig::standard();
  const double duration_s = 60.0;
  auto cc = cfg.cerebellum;
  cc.seed = cfg.seed;
  const auto cb = build_network(cc);
  const auto inputs = open_loop_inputs(cfg, cb.network, cb.layout, duration_s);
  OracleOptions oo;
  oo.learning = learning;
  const auto orc = event_driven_run(cb.network, inputs, duration_s * 1e3 - 1e-9, oo);
  Engine e(cb.network, {NumericMode::fixed_point(), 1.0, learning});
  const auto es = to_timed(run_for(e, inputs, static_cast<Tick>(duration_s * 1e3)), 1.0);
  const auto rep = compare_runs(cb.network, orc.spikes, es, 1.0);
  double worst = 0.0;
  std::string worst_pop;
  for (const auto& p : rep.populations) {
    if (p.relative >= worst) {
      worst = p.relative;
      worst_pop = p.population;
    }
  }
  return {worst, worst_pop};
}

Outcome engine_vs_oracle_fixed() {
  const auto [learn, learn_pop] = fixed_point_deviation(true);
  const auto [frozen, frozen_pop] = fixed_point_deviation(false);
  return {learn <= 0.02, fmt("worst population %s %.2f%% (limit 2%%); frozen weights: %s %.2f%% (info)",
                             learn_pop.c_str(), 100.0 * learn, frozen_pop.c_str(), 100.0 * frozen)};
}

PlantState run_plant(PlantState s, double dl, double dr, const PlantParams& p, double dt_ms, double ms) {
  const auto n = static_cast<long>(std::llround(ms / dt_ms));
  for (long i = 0; i < n; ++i) s = plant_step(s, dl, dr, p, dt_ms);
  return s;
}

Outcome plant_properties() {
  const PlantParams p;
  double sym = 0.0;
  for (const double duty : {0.0, 0.2, 0.5, 0.9}) {
    PlantState s;
    for (int i = 0; i < 10000; ++i) {
      s = plant_step(s, duty, duty, p, 1.0);
      sym = std::max(sym, std::abs(s.phi_deg));
    }
  }
  bool passive = true;
  for (const double pretension : {1.0, 4.0, 8.0}) {
    PlantState s = pretensioned_state(pretension, p);
    s.phi_dot_deg = 200.0;
    s = plant_step(s, 0.0, 0.0, p, 1.0);
    double e = mechanical_energy(s, p);
    const double e0 = e;
    for (int i = 0; i < 5000; ++i) {
      s = plant_step(s, 0.0, 0.0, p, 1.0);
      const double next = mechanical_energy(s, p);
      passive &= next <= e + 1e-12 * e0;
      e = next;
    }
  }
  bool monotone = true;
  double prev = 0.0;
  for (const double f : {1.0, 4.0, 10.0}) {
    const double k = joint_stiffness(pretensioned_state(f, p), p);
    monotone &= k > prev;
    prev = k;
  }
  const auto start = pretensioned_state(2.0, p);
  const auto coarse = run_plant(start, 0.25, 0.55, p, 1.0, 1000.0);
  const auto fine = run_plant(start, 0.25, 0.55, p, 0.1, 1000.0);
  const double step_err = std::abs(coarse.phi_deg - fine.phi_deg) / std::abs(fine.phi_deg);
  return {sym < 0.1 && passive && monotone && step_err <= 0.01,
          fmt("symmetry max |phi| %.2e deg; passive %s; stiffness monotone %s; 1 ms vs 0.1 ms step %.3f%%", sym,
              passive ? "yes" : "no", monotone ? "yes" : "no", 100.0 * step_err)};
}

Outcome determinism(const fs::path& out) {
  auto cfg = SessionConfig::standard();
  cfg.duration_s = 60.0;
  const auto a = out / "determinism_a";
  const auto b = out / "determinism_b";
  fs::remove_all(a);
  fs::remove_all(b);
  cfg.logs.out_dir = a.string();
  run_session(cfg);
  cfg.logs.out_dir = b.string();
  run_session(cfg);
  bool same = true;
  std::string sizes;
  for (const char* f : {"telemetry.csv", "spikes.csv"}) {
    const auto x = slurp(a / f);
    same &= !x.empty() && x == slurp(b / f);
    sizes += fmt(" %s %zu bytes", f, x.size());
  }
  return {same, std::string(same ? "byte-identical:" : "outputs differ:") + sizes};
}

Outcome scheduling() {
  auto cfg = SessionConfig::standard();
  cfg.duration_s = 10.0;
  Session s(cfg);
  SchedulingCounters prev;
  std::size_t seconds = 0, bad = 0;
  std::uint64_t frames = 0;
  while (!s.finished()) {
    s.step_frame();
    if (++frames % 20 != 0) continue;
    const auto& c = s.counters();
    ++seconds;
    bad += c.plant_steps - prev.plant_steps != 500 || c.teacher_updates - prev.teacher_updates != 20 ||
           c.decoder_updates - prev.decoder_updates != 50;
    prev = c;
  }
  return {seconds == 10 && bad == 0,
          fmt("%zu simulated seconds checked, %zu off; totals plant %llu teacher %llu decoder %llu", seconds, bad,
              static_cast<unsigned long long>(prev.plant_steps), static_cast<unsigned long long>(prev.teacher_updates),
              static_cast<unsigned long long>(prev.decoder_updates))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cerebloop acceptance checks"};
  std::string out = (fs::temp_directory_path() / "cerebloop_acceptance").string();
  app.add_option("--out", out, "Directory for the session logs the checks write");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"learning_reproduction", learning_reproduction},
      {"naive_incoherence", naive_incoherence},
      {"one_sided_teaching", one_sided_teaching},
      {"plasticity_oracle", plasticity_oracle},
      {"kernel_lut", kernel_lut},
      {"engine_vs_oracle_random", engine_vs_oracle_random},
      {"engine_vs_oracle_fixed_point", engine_vs_oracle_fixed},
      {"plant_properties", plant_properties},
      {"determinism", [&] { return determinism(out); }},
      {"scheduling", scheduling},
  };

  int failed = 0;
  for (const auto& [name, check] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
