#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "cerebloop/config.hpp"

using namespace cerebloop;

namespace {

std::string with_replaced(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  if (pos == std::string::npos) throw std::logic_error("pattern not found: " + from);
  return text.replace(pos, from.size(), to);
}

}  // namespace

TEST(SessionConfigJson, RoundTripIsStable) {
  auto cfg = SessionConfig::standard();
  cfg.seed = 42;
  cfg.duration_s = 12.5;
  cfg.numeric = NumericMode::fixed_point();
  cfg.cerebellum.mirror_sides = true;
  cfg.cerebellum.n_grc = 128;
  cfg.pid.k_i = 0.25;
  cfg.setpoint.kind = WaveformKind::triangle;
  cfg.logs.spikes = false;
  Command c;
  c.kind = CommandKind::set_pid;
  c.at_s = 3.0;
  c.k_p = 2.0;
  cfg.timeline.push_back(c);

  const auto text = session_config_to_json(cfg);
  const auto back = session_config_from_json(text);
  EXPECT_EQ(session_config_to_json(back), text);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.duration_s, 12.5);
  EXPECT_EQ(back.numeric.kind, NumericKind::fixed);
  EXPECT_TRUE(back.cerebellum.mirror_sides);
  EXPECT_EQ(back.cerebellum.n_grc, 128u);
  EXPECT_EQ(back.setpoint.kind, WaveformKind::triangle);
  EXPECT_FALSE(back.logs.spikes);
  ASSERT_EQ(back.timeline.size(), 1u);
  EXPECT_EQ(back.timeline[0].kind, CommandKind::set_pid);
  EXPECT_EQ(back.timeline[0].at_s, 3.0);
  EXPECT_EQ(back.timeline[0].k_p, 2.0);
}

TEST(SessionConfigJson, PartialDocumentKeepsDefaults) {
  const auto cfg = session_config_from_json(R"({"seed": 7, "pid": {"k_p": 0.5}})");
  const auto def = SessionConfig::standard();
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.pid.k_p, 0.5);
  EXPECT_EQ(cfg.pid.u_max, def.pid.u_max);
  EXPECT_EQ(cfg.cerebellum.n_grc, def.cerebellum.n_grc);
  EXPECT_EQ(cfg.mof_set.update_period_ms, 50.0);
  EXPECT_EQ(session_config_to_json(session_config_from_json("{}")), session_config_to_json(def));
}

TEST(SessionConfigJson, UnknownKeysAreRejectedWithTheirPath) {
  const auto text = session_config_to_json(SessionConfig::standard());
  try {
    session_config_from_json(with_replaced(text, "\"n_grc\"", "\"n_grcs\": 1, \"n_grc\""));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("n_grcs"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("cerebellum"), std::string::npos) << e.what();
  }
  EXPECT_THROW(session_config_from_json(R"({"speed": 1})"), ConfigError);
}

TEST(SessionConfigJson, WrongTypesAndBadJsonAreRejected) {
  EXPECT_THROW(session_config_from_json(R"({"seed": "one"})"), ConfigError);
  EXPECT_THROW(session_config_from_json(R"({"pid": 3})"), ConfigError);
  EXPECT_THROW(session_config_from_json("{"), ConfigError);
  EXPECT_THROW(session_config_from_json(R"({"numeric": {"mode": "half"}})"), ConfigError);
  EXPECT_THROW(session_config_from_json(R"({"setpoint": {"waveform": "square"}})"), ConfigError);
}

TEST(SessionConfigValidate, RejectsInconsistentValues) {
  auto cfg = SessionConfig::standard();
  EXPECT_NO_THROW(cfg.validate());
  cfg.duration_s = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SessionConfig::standard();
  cfg.plant_period_ms = 2.5;  // not a multiple of the tick
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SessionConfig::standard();
  cfg.numeric = NumericMode::fixed_point();
  cfg.numeric.fixed.int_bits = 30;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SessionConfig::standard();
  cfg.cerebellum.n_grc = 40000;  // more than C(32, 4)
  EXPECT_THROW(cfg.validate(), std::exception);
  cfg = SessionConfig::standard();
  cfg.setpoint.frequency_hz = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(SessionConfigFile, LoadsFromDiskAndNamesTheFile) {
  const auto dir = std::filesystem::temp_directory_path() / "cerebloop_config_test";
  std::filesystem::create_directories(dir);
  const auto good = dir / "good.json";
  std::ofstream(good) << R"({"duration_s": 2.0})";
  EXPECT_EQ(load_session_config(good.string()).duration_s, 2.0);
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << R"({"duration_s": -1})";
  try {
    load_session_config(bad.string());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json"), std::string::npos);
  }
  EXPECT_THROW(load_session_config((dir / "missing.json").string()), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(Waveform, ValuesOfEachKind) {
  WaveformConfig w;
  w.amplitude_deg = 30.0;
  w.frequency_hz = 0.25;
  w.offset_deg = 5.0;
  EXPECT_NEAR(w.value(0.0), 5.0, 1e-12);
  EXPECT_NEAR(w.value(1.0), 35.0, 1e-12);
  EXPECT_NEAR(w.value(3.0), -25.0, 1e-12);
  w.kind = WaveformKind::triangle;
  EXPECT_NEAR(w.value(0.0), 5.0, 1e-12);
  EXPECT_NEAR(w.value(1.0), 35.0, 1e-12);
  EXPECT_NEAR(w.value(0.5), 20.0, 1e-12);
  EXPECT_NEAR(w.value(3.0), -25.0, 1e-12);
  w.kind = WaveformKind::manual;
  w.value_deg = -12.0;
  EXPECT_EQ(w.value(123.0), -12.0);
}

TEST(CommandJson, ParsesEveryKind) {
  auto c = command_from_json(R"({"type": "set_setpoint", "value": 12.5, "id": "a1"})");
  EXPECT_EQ(c.kind, CommandKind::set_setpoint);
  EXPECT_EQ(c.value_deg, 12.5);
  EXPECT_EQ(c.id, "a1");
  EXPECT_FALSE(c.at_s);

  c = command_from_json(R"({"type": "set_pid", "k_p": 1, "k_i": 0.1, "k_d": 0, "at": 4.5})");
  EXPECT_EQ(c.kind, CommandKind::set_pid);
  EXPECT_EQ(c.k_i, 0.1);
  EXPECT_EQ(c.at_s, 4.5);

  c = command_from_json(R"({"type": "set_waveform", "waveform": {"waveform": "triangle", "amplitude_deg": 20, "frequency_hz": 0.1}})");
  EXPECT_EQ(c.waveform.kind, WaveformKind::triangle);
  EXPECT_EQ(c.waveform.amplitude_deg, 20.0);

  c = command_from_json(R"({"type": "subscribe_raster", "populations": ["GrC", "DCN_L"]})");
  EXPECT_EQ(c.populations, (std::vector<std::string>{"GrC", "DCN_L"}));

  for (const char* t : {"freeze_learning", "unfreeze_learning", "reset_weights", "snapshot", "pause", "resume"}) {
    EXPECT_EQ(std::string(to_string(command_from_json(std::string(R"({"type": ")") + t + "\"}").kind)), t);
  }
}

TEST(CommandJson, RoundTrip) {
  Command c;
  c.kind = CommandKind::set_waveform;
  c.at_s = 1.5;
  c.id = "w";
  c.waveform.kind = WaveformKind::manual;
  c.waveform.value_deg = 9.0;
  const auto text = command_to_json(c);
  EXPECT_EQ(command_to_json(command_from_json(text)), text);
}

TEST(CommandJson, MalformedCommandsAreRejected) {
  for (const char* bad : {
           R"({"type": "launch"})",
           R"({"value": 3})",
           R"({"type": "set_setpoint"})",
           R"({"type": "set_setpoint", "value": "high"})",
           R"({"type": "set_pid", "k_p": -1, "k_i": 0, "k_d": 0})",
           R"({"type": "set_pid", "k_p": 1})",
           R"({"type": "pause", "extra": true})",
           R"({"type": "pause", "at": -2})",
           R"({"type": "pause", "v": 99})",
           R"([1, 2])",
           "not json",
       }) {
    EXPECT_THROW(command_from_json(bad), ConfigError) << bad;
  }
}
