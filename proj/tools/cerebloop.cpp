// cerebloop: headless runs, live serving and engine cross-checks of the
// closed-loop cerebellar controller.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cerebloop/cerebellum.hpp"
#include "cerebloop/config.hpp"
#include "cerebloop/engine.hpp"
#include "cerebloop/network_io.hpp"
#include "cerebloop/oracle.hpp"
#include "cerebloop/server.hpp"
#include "cerebloop/session.hpp"

namespace {

using namespace cerebloop;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::optional<std::string> mode;
  std::string out;
};

void add_common(CLI::App* app, CommonFlags& f, bool with_out) {
  app->add_option("--config", f.config, "Session config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "Seed for network construction and stochastic codecs");
  app->add_option("--duration", f.duration, "Simulated duration in seconds")->check(CLI::PositiveNumber);
  app->add_option("--mode", f.mode, "Engine arithmetic")->check(CLI::IsMember({"float", "fixed"}));
  if (with_out) app->add_option("--out", f.out, "Output directory");
}

SessionConfig resolve(const CommonFlags& f) {
  SessionConfig cfg = f.config.empty() ? SessionConfig::standard() : load_session_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.duration) cfg.duration_s = *f.duration;
  if (f.mode) cfg.numeric.kind = numeric_kind_from_string(*f.mode);
  if (!f.out.empty()) cfg.logs.out_dir = f.out;
  cfg.validate();
  return cfg;
}

int cmd_run(const CommonFlags& f, double window_s) {
  auto cfg = resolve(f);
  if (cfg.logs.out_dir.empty()) cfg.logs.out_dir = "out";
  const auto r = run_session(cfg, window_s);
  const auto& m = r.metrics;
  std::printf("simulated %.1f s, %llu engine ticks, %llu fixed-point saturations\n", cfg.duration_s,
              static_cast<unsigned long long>(r.counters.engine_ticks), static_cast<unsigned long long>(r.saturations));
  std::printf("%-10s %-10s %s\n", "from_s", "to_s", "rmse_deg");
  for (const auto& w : m.windows) std::printf("%-10.1f %-10.1f %.3f\n", w.t_start, w.t_end, w.rmse);
  std::printf("overall rmse %.3f deg, setpoint rms %.3f deg, first/final window %.2f\n", m.rmse, m.setpoint_rms,
              m.improvement_ratio);
  for (const auto& [name, rate] : m.mean_rate_hz) std::printf("  %-8s %8.2f Hz\n", name.c_str(), rate);
  std::printf("logs written to %s\n", cfg.logs.out_dir.c_str());
  return 0;
}

int cmd_serve(const CommonFlags& f, ServeOptions opt) {
  auto cfg = resolve(f);
  cfg.logs.out_dir.clear();
  SessionServer server(std::move(cfg), opt);
  std::printf("serving on ws://%s:%u (speed %gx%s)\n", opt.address.c_str(), server.port(), opt.speed,
              opt.start_paused ? ", paused" : "");
  std::fflush(stdout);
  server.run();
  return 0;
}

int cmd_compare(const CommonFlags& f, const std::string& network_path, bool learning, double tol_ms) {
  auto cfg = resolve(f);
  auto cc = cfg.cerebellum;
  cc.seed = cfg.seed;
  Cerebellum cb = build_network(cc);
  if (!network_path.empty()) {
    cb.network = load_network(network_path);
    cb.layout = CerebellumLayout::from_network(cb.network);
  }
  const auto& net = cb.network;
  const auto inputs = open_loop_inputs(cfg, net, cb.layout, cfg.duration_s);
  const auto n_ticks = static_cast<Tick>(std::llround(cfg.duration_s * 1e3 / cfg.tick_ms));

  Engine engine(net, {cfg.numeric, cfg.tick_ms, learning});
  const auto engine_spikes = to_timed(run_for(engine, inputs, n_ticks), cfg.tick_ms);

  OracleOptions oo;
  oo.tick_ms = cfg.tick_ms;
  oo.learning = learning;
  const auto oracle = event_driven_run(net, inputs, cfg.duration_s * 1e3 - 1e-9, oo);

  const auto rep = compare_runs(net, oracle.spikes, engine_spikes, tol_ms);
  std::printf("engine mode %s, %.1f s, tolerance %.3f ms\n", to_string(cfg.numeric.kind).c_str(), cfg.duration_s, tol_ms);
  std::printf("%-8s %10s %10s %8s %9s\n", "pop", "oracle", "engine", "delta", "rel");
  for (const auto& p : rep.populations) {
    std::printf("%-8s %10zu %10zu %8lld %8.3f%%\n", p.population.c_str(), p.count_a, p.count_b, p.delta,
                100.0 * p.relative);
  }
  std::printf("matched %zu, oracle-only %zu, engine-only %zu\n", rep.matched, rep.unmatched_a.size(),
              rep.unmatched_b.size());
  std::printf("max offset %.4f ms, mean offset %.4f ms\n", rep.max_offset_ms, rep.mean_abs_offset_ms);
  if (rep.first_divergence_ms) std::printf("first divergence at %.4f ms\n", *rep.first_divergence_ms);
  std::printf("max population deviation %.3f%%\n", 100.0 * rep.max_relative_population_delta());

  if (!f.out.empty()) {
    std::filesystem::create_directories(f.out);
    std::ofstream os(std::filesystem::path(f.out) / "compare.csv");
    os << "population,oracle,engine,delta,relative\n";
    for (const auto& p : rep.populations) {
      os << p.population << ',' << p.count_a << ',' << p.count_b << ',' << p.delta << ',' << p.relative << '\n';
    }
  }
  return 0;
}

int cmd_dump(const CommonFlags& f) {
  const auto cfg = resolve(f);
  auto cc = cfg.cerebellum;
  cc.seed = cfg.seed;
  const auto cb = build_network(cc);
  const auto rep = validate_topology(cb.network);
  std::fprintf(stderr, "%u MoF, %u GrC, %u PuC and %u DCN per side; %u MoF per GrC, %u PF per PuC\n", rep.n_mof,
               rep.n_grc, rep.n_puc_per_side, rep.n_dcn_per_side, rep.mof_per_grc, rep.pf_afferents_per_puc);
  if (f.out.empty() || f.out == "-") {
    write_network(std::cout, cb.network);
  } else {
    save_network(f.out, cb.network);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop cerebellar spiking controller for an antagonistic tendon joint"};
  app.require_subcommand(1);

  CommonFlags run_f, serve_f, cmp_f, dump_f;
  double window_s = 60.0;
  auto* run = app.add_subcommand("run", "Run a headless session and write CSV logs");
  add_common(run, run_f, true);
  run->add_option("--window", window_s, "RMSE window in seconds")->check(CLI::PositiveNumber);

  ServeOptions serve_opt;
  auto* serve = app.add_subcommand("serve", "Run a live session behind a WebSocket");
  add_common(serve, serve_f, false);
  serve->add_option("--port", serve_opt.port, "TCP port (0 picks a free one)");
  serve->add_option("--address", serve_opt.address, "Listen address");
  serve->add_option("--speed", serve_opt.speed, "Simulated seconds per wall second, 0 for unpaced")
      ->check(CLI::NonNegativeNumber);
  serve->add_flag("--paused", serve_opt.start_paused, "Wait for a resume command before simulating");

  std::string network_path;
  bool cmp_learning = false;
  double tol_ms = 1.0;
  auto* cmp = app.add_subcommand("compare-engines", "Compare the tick engine with the event-driven reference");
  add_common(cmp, cmp_f, true);
  cmp->add_option("--network", network_path, "Network file to use instead of building one")->check(CLI::ExistingFile);
  cmp->add_flag("--learning", cmp_learning, "Enable plasticity in both simulators");
  cmp->add_option("--tolerance", tol_ms, "Spike matching window in ms")->check(CLI::PositiveNumber);

  auto* dump = app.add_subcommand("dump-network", "Write the network in the text format");
  add_common(dump, dump_f, true);
  dump->get_option("--out")->description("Output file, '-' or absent for stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_f, window_s);
    if (serve->parsed()) return cmd_serve(serve_f, serve_opt);
    if (cmp->parsed()) {
      if (!cmp_f.duration) cmp_f.duration = 10.0;
      return cmd_compare(cmp_f, network_path, cmp_learning, tol_ms);
    }
    if (dump->parsed()) return cmd_dump(dump_f);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
