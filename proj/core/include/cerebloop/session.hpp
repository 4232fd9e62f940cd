#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cerebloop/cerebellum.hpp"
#include "cerebloop/codec.hpp"
#include "cerebloop/config.hpp"
#include "cerebloop/engine.hpp"
#include "cerebloop/metrics.hpp"
#include "cerebloop/plant.hpp"

namespace cerebloop {

/// A module fault during a session, with the simulated time it happened at.
class SessionError : public std::runtime_error {
public:
  SessionError(double t_s, const std::string& what);
  double time_s() const { return t_s_; }

private:
  double t_s_;
};

struct TelemetryFrame {
  std::uint64_t index = 0;
  TelemetryRow row;
  bool learning = true;
  /// Spikes per population during this frame, in network population order.
  std::vector<std::uint32_t> population_counts;
  /// Every spike of the frame when spike capture is on.
  std::vector<SpikeEvent> spikes;
};

/// How often each periodic stage has run since the session started.
struct SchedulingCounters {
  std::uint64_t engine_ticks = 0;
  std::uint64_t plant_steps = 0;
  std::uint64_t teacher_updates = 0;
  std::uint64_t decoder_updates = 0;
  std::uint64_t mof_act_updates = 0;
  std::uint64_t mof_set_updates = 0;
  std::uint64_t telemetry_frames = 0;
};

struct ProjectionWeights {
  ProjectionId projection = 0;
  std::string name;
  std::vector<double> weights;
};

/// Plastic weights at one instant.
struct WeightSnapshot {
  double t_s = 0.0;
  std::vector<ProjectionWeights> projections;
};

struct CommandResult {
  Command command;
  double applied_at_s = 0.0;
  bool ok = true;
  std::string message;
  std::optional<WeightSnapshot> snapshot;
};

/// The closed loop: setpoint, encoders, cerebellum, decoder, plant and
/// teacher, advanced one engine tick at a time on the calling thread.
///
/// Per tick t the session runs, in order: plant step (every plant period,
/// with the current motor commands), teacher and MoF_set update (their
/// periods), MoF_act update, input spike generation, one engine tick,
/// DCN spike counting and, at the end of each decoder period, a decoder
/// update. Commands are applied at telemetry frame boundaries.
class Session {
public:
  explicit Session(SessionConfig cfg);
  ~Session();
  Session(Session&&) noexcept;
  Session& operator=(Session&&) noexcept;

  const SessionConfig& config() const;
  const Network& network() const;
  const CerebellumLayout& layout() const;
  const Engine& engine() const;
  const PlantState& plant() const;
  const SchedulingCounters& counters() const;

  Tick tick() const;
  double time_s() const;
  /// True once the configured duration has been simulated.
  bool finished() const;

  void set_capture_spikes(bool on);

  /// Queues a command for the next frame boundary at or after its `at`.
  void enqueue(Command cmd);
  /// Results of commands applied since the last call.
  std::vector<CommandResult> take_results();

  /// Applies due commands, then simulates up to the next frame boundary.
  TelemetryFrame step_frame();

  WeightSnapshot snapshot() const;

  struct Impl;

private:
  std::unique_ptr<Impl> impl_;
};

struct SessionResult {
  std::vector<TelemetryRow> telemetry;
  TrackingMetrics metrics;
  SchedulingCounters counters;
  std::uint64_t saturations = 0;
};

/// Runs a headless session for its full duration. When cfg.logs.out_dir is
/// set, writes telemetry.csv, spikes.csv, weights_<t>.csv and config.json
/// there. A fault aborts the run with a SessionError after flushing the
/// partial logs. `metrics_window_s` sets the RMSE window.
SessionResult run_session(const SessionConfig& cfg, double metrics_window_s = 60.0);

/// Open-loop input spikes for the cerebellum of `cfg`: MoF_set encodes the
/// setpoint waveform, MoF_act a half-amplitude copy lagging it by a quarter
/// period, and the climbing fibres carry the teacher's reaction to the gap.
/// Used to compare engines without the plant in the loop.
std::vector<SpikeEvent> open_loop_inputs(const SessionConfig& cfg, const Network& net, const CerebellumLayout& layout,
                                         double duration_s);

}  // namespace cerebloop
