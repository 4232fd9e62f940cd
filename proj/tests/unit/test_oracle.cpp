#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cerebloop/engine.hpp"
#include "cerebloop/oracle.hpp"
#include "random_network.hpp"

using namespace cerebloop;

namespace {

Network single_cell(LifParams p, double w_in, std::uint32_t delay = 1) {
  Network net;
  const auto src = net.add_population("src", PopulationKind::source, 1);
  const auto cell = net.add_population("cell", PopulationKind::lif, 1, p);
  if (w_in > 0.0) {
    net.add_projection({"in", src, cell, ProjectionKind::current, {{0, 0, w_in, delay, SynapseSign::excitatory, false}}});
  }
  net.validate();
  return net;
}

/// Membrane of a resting cell after a current step i0 at t = 0, decaying
/// with tau_s, plus the bias drive.
double membrane(const LifParams& p, double i0, double t) {
  const double em = std::exp(-t / p.tau_m);
  const double es = std::exp(-t / p.tau_syn_exc);
  return p.v_rest + p.r_m * p.i_bias * (1.0 - em) +
         p.r_m * i0 * p.tau_syn_exc / (p.tau_syn_exc - p.tau_m) * (es - em);
}

double bisect(const LifParams& p, double i0, double lo, double hi) {
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (membrane(p, i0, mid) >= p.v_threshold ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Sum over neurons of |count difference| plus unmatched spikes.
std::size_t disagreement(const DivergenceReport& r) {
  return r.unmatched_a.size() + r.unmatched_b.size();
}

}  // namespace

TEST(Oracle, BiasDrivenSpikeTimesAreAnalytic) {
  LifParams p;
  p.i_bias = 2.0;  // v_inf = -50 mV
  const double t_star = p.tau_m * std::log((p.v_rest + p.r_m * p.i_bias - p.v_reset) /
                                           (p.v_rest + p.r_m * p.i_bias - p.v_threshold));
  const auto res = event_driven_run(single_cell(p, 0.0), {}, 100.0);
  ASSERT_GE(res.spikes.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    // Reset to v_rest and hold for the refractory period between spikes.
    const double expected = (k + 1) * t_star + k * p.t_refractory;
    EXPECT_NEAR(res.spikes[k].t_ms, expected, 1e-6) << k;
  }
}

TEST(Oracle, SynapticKickSpikeTimeIsAnalytic) {
  LifParams p;
  for (double w : {14.0, 20.0, 40.0}) {
    // Peak of the kick response is at ln(tau_m / tau_s) tau_m tau_s / (tau_m - tau_s).
    const double t_peak = std::log(p.tau_m / p.tau_syn_exc) * p.tau_m * p.tau_syn_exc / (p.tau_m - p.tau_syn_exc);
    ASSERT_GT(membrane(p, w, t_peak), p.v_threshold) << w;
    const double expected = 1.0 + bisect(p, w, 0.0, t_peak);  // input at tick 0, delay 1 ms
    const std::vector<SpikeEvent> in{{0, 0}};
    const auto res = event_driven_run(single_cell(p, w), in, 50.0);
    std::vector<TimedSpike> cell;
    std::copy_if(res.spikes.begin(), res.spikes.end(), std::back_inserter(cell), [](const TimedSpike& s) { return s.neuron == 1; });
    ASSERT_EQ(cell.size(), 1u) << w;
    EXPECT_NEAR(cell[0].t_ms, expected, 1e-6) << w;
  }
}

TEST(Oracle, SubthresholdKickDoesNotFire) {
  LifParams p;
  const std::vector<SpikeEvent> in{{0, 0}};
  const auto res = event_driven_run(single_cell(p, 5.0), in, 100.0);
  ASSERT_EQ(res.spikes.size(), 1u);  // the input itself
  EXPECT_EQ(res.spikes[0].neuron, 0u);
}

TEST(Oracle, NoInputNoSpikes) {
  const auto rc = test_support::random_case(4, 1000.0);
  const auto res = event_driven_run(rc.network, {}, 1000.0);
  EXPECT_TRUE(res.spikes.empty());
}

TEST(Oracle, NextThresholdCrossingMatchesClosedForm) {
  LifParams p;
  p.i_bias = 1.8;
  const auto t = next_threshold_crossing(LifState::at_rest(p), p, 0.05, 1e-9);
  ASSERT_TRUE(t);
  const double v_inf = p.v_rest + p.r_m * p.i_bias;
  EXPECT_NEAR(*t, p.tau_m * std::log((v_inf - p.v_rest) / (v_inf - p.v_threshold)), 1e-6);
  p.i_bias = 1.0;  // v_inf below threshold
  EXPECT_FALSE(next_threshold_crossing(LifState::at_rest(p), p, 0.05, 1e-9));
}

TEST(EventQueue, PopsInTimeNeuronKindOrder) {
  EventQueue q;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> ti(0, 20), ni(0, 5), ki(0, 3);
  std::vector<OracleEvent> pushed;
  for (int i = 0; i < 500; ++i) {
    OracleEvent e;
    e.t_ms = ti(rng) * 0.5;
    e.neuron = static_cast<NeuronId>(ni(rng));
    e.kind = static_cast<OracleEventKind>(ki(rng));
    e.b = static_cast<std::uint64_t>(i);
    pushed.push_back(e);
    q.push(e);
  }
  std::stable_sort(pushed.begin(), pushed.end(), [](const OracleEvent& x, const OracleEvent& y) {
    return std::tie(x.t_ms, x.neuron, x.kind) < std::tie(y.t_ms, y.neuron, y.kind);
  });
  for (const auto& want : pushed) {
    const auto got = q.pop();
    ASSERT_EQ(got.t_ms, want.t_ms);
    ASSERT_EQ(got.neuron, want.neuron);
    ASSERT_EQ(got.kind, want.kind);
    ASSERT_EQ(got.b, want.b);  // insertion order breaks ties
  }
  EXPECT_TRUE(q.empty());
}

TEST(EventQueue, RejectsEventsInThePast) {
  EventQueue q;
  q.push({5.0, 0, OracleEventKind::delivery});
  q.pop();
  q.push({4.0, 0, OracleEventKind::delivery});
  EXPECT_THROW(q.pop(), std::logic_error);
}

TEST(CompareRuns, IdenticalListsMatchExactly) {
  const auto rc = test_support::random_case(2, 2000.0);
  const auto spikes = to_timed(rc.inputs);
  const auto r = compare_runs(rc.network, spikes, spikes, 0.5);
  EXPECT_TRUE(r.identical_counts());
  EXPECT_EQ(r.matched, spikes.size());
  EXPECT_TRUE(r.unmatched_a.empty());
  EXPECT_TRUE(r.unmatched_b.empty());
  EXPECT_EQ(r.max_offset_ms, 0.0);
  EXPECT_FALSE(r.first_divergence_ms);
  EXPECT_EQ(r.max_relative_population_delta(), 0.0);
}

TEST(CompareRuns, OneExtraSpikeIsReported) {
  const auto rc = test_support::random_case(2, 2000.0);
  const auto a = to_timed(rc.inputs);
  auto b = a;
  const TimedSpike extra{1234.5, rc.network.global_id(1, 7)};
  b.insert(std::upper_bound(b.begin(), b.end(), extra, [](const TimedSpike& x, const TimedSpike& y) { return x.t_ms < y.t_ms; }),
           extra);
  const auto r = compare_runs(rc.network, a, b, 0.5);
  EXPECT_FALSE(r.identical_counts());
  EXPECT_EQ(r.neurons_with_count_delta, 1u);
  ASSERT_EQ(r.unmatched_b.size(), 1u);
  EXPECT_EQ(r.unmatched_b[0], extra);
  EXPECT_TRUE(r.unmatched_a.empty());
  ASSERT_TRUE(r.first_divergence_ms);
  EXPECT_DOUBLE_EQ(*r.first_divergence_ms, 1234.5);
  for (const auto& p : r.populations) {
    if (p.population == "lif") {
      EXPECT_EQ(p.delta, 1);
    } else {
      EXPECT_EQ(p.delta, 0);
    }
  }
}

TEST(CompareRuns, ShiftedSpikesMatchWithinTolerance) {
  const auto rc = test_support::random_case(3, 1000.0);
  const auto a = to_timed(rc.inputs);
  auto b = a;
  for (auto& s : b) s.t_ms += 0.3;
  const auto r = compare_runs(rc.network, a, b, 0.5);
  EXPECT_EQ(r.matched, a.size());
  EXPECT_NEAR(r.max_offset_ms, 0.3, 1e-12);
  const auto strict = compare_runs(rc.network, a, b, 0.1);
  EXPECT_EQ(strict.matched, 0u);
}

TEST(Oracle, FinerEngineTickIsCloser) {
  // Active random networks; a 0.1 ms engine must track the event-driven
  // reference better than the 1 ms engine.
  test_support::RandomNetworkSpec spec;
  spec.w_source = 6.0;
  spec.w_recurrent = 3.0;
  spec.p_recurrent = 0.1;
  std::size_t coarse_total = 0, fine_total = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto rc = test_support::random_case(seed, 2000.0, spec);
    const auto ref = event_driven_run(rc.network, rc.inputs, 2000.0 - 1e-9).spikes;

    Engine coarse(rc.network, {NumericMode::float64(), 1.0, false});
    const auto a = to_timed(run_for(coarse, rc.inputs, 2000), 1.0);

    auto fine_inputs = rc.inputs;
    for (auto& e : fine_inputs) e.t *= 10;
    Engine fine(rescale_delays(rc.network, 10), {NumericMode::float64(), 0.1, false});
    const auto b = to_timed(run_for(fine, fine_inputs, 20000), 0.1);

    const auto rc_coarse = compare_runs(rc.network, ref, a, 1.0);
    const auto rc_fine = compare_runs(rc.network, ref, b, 1.0);
    coarse_total += disagreement(rc_coarse);
    fine_total += disagreement(rc_fine);
    EXPECT_LE(rc_fine.mean_abs_offset_ms, rc_coarse.mean_abs_offset_ms) << seed;
  }
  RecordProperty("coarse_unmatched", std::to_string(coarse_total));
  RecordProperty("fine_unmatched", std::to_string(fine_total));
  EXPECT_GT(coarse_total, 0u);
  EXPECT_LT(fine_total, coarse_total);
}

TEST(Oracle, LearningReplayMatchesEngineWeights) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Network net;
    const auto pre = net.add_population("pre", PopulationKind::source, 5);
    const auto teach = net.add_population("teach", PopulationKind::source, 2);
    LifParams lp;
    lp.i_bias = 1.7;
    const auto post = net.add_population("post", PopulationKind::lif, 2, lp);
    Projection pf{"pf", pre, post, ProjectionKind::current, {}};
    for (std::uint32_t i = 0; i < 5; ++i) {
      for (std::uint32_t j = 0; j < 2; ++j) {
        pf.synapses.push_back({i, j, 0.2 + 0.6 * u(rng), 1 + static_cast<std::uint32_t>(u(rng) * 3),
                               SynapseSign::excitatory, true});
      }
    }
    net.add_projection(pf);
    net.add_projection({"cf", teach, post, ProjectionKind::teaching,
                        {{0, 0, 0.0, 1, SynapseSign::excitatory, false}, {1, 1, 0.0, 2, SynapseSign::excitatory, false}}});
    auto kp = KernelParams::with_default_amplitudes(1.0);
    kp.a_ltd *= 10.0;
    kp.a_ltp *= 10.0;
    net.set_plasticity(kp);
    net.validate();

    std::vector<SpikeEvent> inputs;
    for (Tick t = 0; t < 5000; ++t) {
      for (std::uint32_t i = 0; i < 5; ++i) {
        if (u(rng) < 0.04) inputs.push_back({t, net.global_id(pre, i)});
      }
      for (std::uint32_t j = 0; j < 2; ++j) {
        if (u(rng) < 0.004) inputs.push_back({t, net.global_id(teach, j)});
      }
    }

    Engine engine(net, {NumericMode::float64(), 1.0, true});
    run_for(engine, inputs, 5000);
    OracleOptions opt;
    opt.learning = true;
    const auto ref = event_driven_run(net, inputs, 5000.0 - 1e-9, opt);
    const auto w = engine.weights(0);
    ASSERT_EQ(ref.weights.at(0).size(), w.size());
    bool moved = false;
    for (std::size_t k = 0; k < w.size(); ++k) {
      EXPECT_NEAR(ref.weights[0][k], w[k], 1e-12) << "seed " << seed << " synapse " << k;
      moved |= w[k] != net.projection(0).synapses[k].weight;
    }
    EXPECT_TRUE(moved);
  }
}

TEST(Oracle, RejectsOversizedNetworks) {
  test_support::RandomNetworkSpec spec;
  spec.n_lif = 50;
  const auto rc = test_support::random_case(1, 10.0, spec);
  OracleOptions opt;
  opt.max_neurons = 20;
  EXPECT_THROW(event_driven_run(rc.network, rc.inputs, 10.0, opt), std::invalid_argument);
}
