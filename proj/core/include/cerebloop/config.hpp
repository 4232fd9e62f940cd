#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cerebloop/cerebellum.hpp"
#include "cerebloop/codec.hpp"
#include "cerebloop/fixed_point.hpp"
#include "cerebloop/plant.hpp"

namespace cerebloop {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class WaveformKind : std::uint8_t { sine, triangle, manual };

const char* to_string(WaveformKind k);
WaveformKind waveform_kind_from_string(const std::string& s);

/// Setpoint source in degrees.
struct WaveformConfig {
  WaveformKind kind = WaveformKind::sine;
  double frequency_hz = 1.0 / 15.0;
  double amplitude_deg = 30.0;
  double offset_deg = 0.0;
  /// Held value in manual mode.
  double value_deg = 0.0;

  double value(double t_s) const;
  void validate() const;
};

enum class CommandKind : std::uint8_t {
  set_setpoint,
  set_waveform,
  set_pid,
  freeze_learning,
  unfreeze_learning,
  reset_weights,
  snapshot,
  subscribe_raster,
  pause,
  resume,
};

const char* to_string(CommandKind k);

/// Version of the command and telemetry message schema.
inline constexpr int kCommandSchemaVersion = 1;

/// Live or scripted session command. Only the fields of `kind` are used.
struct Command {
  CommandKind kind = CommandKind::snapshot;
  /// Simulated time (s) at which the command takes effect; it is applied at
  /// the first telemetry frame boundary at or after this time. Unset means
  /// the next frame boundary.
  std::optional<double> at_s;
  double value_deg = 0.0;
  WaveformConfig waveform;
  double k_p = 0.0;
  double k_i = 0.0;
  double k_d = 0.0;
  std::vector<std::string> populations;
  /// Client supplied id echoed in the acknowledgement.
  std::string id;
};

struct LogConfig {
  /// Output directory; empty disables file logging.
  std::string out_dir;
  bool spikes = true;
  /// Period of weights_<t>.csv dumps in s; 0 keeps only the final dump.
  double weights_period_s = 60.0;
};

struct SessionConfig {
  std::uint64_t seed = 1;
  double duration_s = 300.0;
  NumericMode numeric = NumericMode::float64();
  double tick_ms = 1.0;
  CerebellumConfig cerebellum = CerebellumConfig::standard();
  PopulationEncoderConfig mof_act;
  PopulationEncoderConfig mof_set;
  double ino_r_max_hz = 10.0;
  bool ino_stochastic = false;
  MotorDecoderConfig decoder;
  PlantParams plant;
  double plant_period_ms = 2.0;
  /// Tendon force both winches start wound to (N).
  double pretension_n = 2.0;
  PidConfig pid;
  WaveformConfig setpoint;
  bool learning = true;
  /// Optional open-loop term added to the network duty, per degree of
  /// setpoint. Zero keeps the network as the only motor drive.
  double feedforward_per_deg = 0.0;
  double telemetry_period_ms = 50.0;
  LogConfig logs;
  /// Scripted commands, replayed in time order.
  std::vector<Command> timeline;

  /// Defaults of the standard experiment.
  static SessionConfig standard();
  /// Throws ConfigError.
  void validate() const;
};

SessionConfig session_config_from_json(const std::string& text);
std::string session_config_to_json(const SessionConfig& cfg);
SessionConfig load_session_config(const std::string& path);

/// Parses one command message. Throws ConfigError with the reason.
Command command_from_json(const std::string& text);
std::string command_to_json(const Command& cmd);

}  // namespace cerebloop
