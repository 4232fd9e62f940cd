#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "cerebloop/network.hpp"

namespace cerebloop {

/// A spike at a continuous time in ms.
struct TimedSpike {
  double t_ms = 0.0;
  NeuronId neuron = 0;

  friend bool operator==(const TimedSpike&, const TimedSpike&) = default;
};

enum class OracleEventKind : std::uint8_t { source_spike = 0, delivery = 1, threshold = 2, refractory_end = 3 };

struct OracleEvent {
  double t_ms = 0.0;
  NeuronId neuron = 0;
  OracleEventKind kind = OracleEventKind::delivery;
  std::uint64_t seq = 0;
  /// delivery: projection/synapse; threshold: neuron version at prediction.
  std::uint32_t a = 0;
  std::uint64_t b = 0;
};

/// Min-queue on (time, neuron, kind, insertion order).
class EventQueue {
public:
  void push(OracleEvent e);
  /// Throws std::logic_error if time would run backwards.
  OracleEvent pop();
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

private:
  struct Later {
    bool operator()(const OracleEvent& x, const OracleEvent& y) const;
  };
  std::priority_queue<OracleEvent, std::vector<OracleEvent>, Later> heap_;
  std::uint64_t next_seq_ = 0;
  double last_popped_ = -1e300;
};

struct OracleOptions {
  /// Converts integer delays and input ticks to ms.
  double tick_ms = 1.0;
  bool learning = false;
  /// Coarse scan used to bracket threshold crossings before bisection.
  double scan_step_ms = 0.05;
  double bisection_tol_ms = 1e-6;
  std::uint32_t max_neurons = 1000;
};

struct OracleResult {
  std::vector<TimedSpike> spikes;
  /// Final weights per projection.
  std::vector<std::vector<double>> weights;
  std::uint64_t events_processed = 0;
};

/// Event-driven double precision run of `net` for `duration_ms`, fed with
/// spike-source events stamped in ticks. Membrane and currents are
/// integrated in closed form between events. With `learning` set, the
/// LTP/LTD rules are replayed with arrival times rounded up to ticks.
OracleResult event_driven_run(const Network& net, std::span<const SpikeEvent> inputs, double duration_ms,
                              const OracleOptions& options = {});

/// First time in (0, horizon] where a free LIF trajectory starting from
/// `state` reaches threshold, or nullopt.
std::optional<double> next_threshold_crossing(const LifState& state, const LifParams& params, double scan_step_ms,
                                              double tol_ms);

struct PopulationDelta {
  std::string population;
  std::size_t count_a = 0;
  std::size_t count_b = 0;
  long long delta = 0;        // count_b - count_a
  double relative = 0.0;      // |delta| / max(count_a, 1)
};

struct DivergenceReport {
  std::vector<PopulationDelta> populations;
  std::size_t matched = 0;
  std::vector<TimedSpike> unmatched_a;
  std::vector<TimedSpike> unmatched_b;
  double max_offset_ms = 0.0;
  double mean_abs_offset_ms = 0.0;
  std::optional<double> first_divergence_ms;
  /// Neurons whose spike counts differ between the runs.
  std::size_t neurons_with_count_delta = 0;

  bool identical_counts() const { return neurons_with_count_delta == 0; }
  double max_relative_population_delta() const;
};

/// Matches spikes neuron by neuron (in time order, within `tol_ms`) and
/// summarises count and timing differences.
DivergenceReport compare_runs(const Network& net, std::span<const TimedSpike> a, std::span<const TimedSpike> b,
                              double tol_ms);

std::vector<TimedSpike> to_timed(std::span<const SpikeEvent> spikes, double tick_ms = 1.0);

/// Copy of `net` with every delay multiplied by `factor`, for running the
/// same model at a finer tick.
Network rescale_delays(const Network& net, std::uint32_t factor);

}  // namespace cerebloop
