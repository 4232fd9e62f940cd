#include "cerebloop/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cerebloop {

using json = nlohmann::json;

const char* to_string(WaveformKind k) {
  switch (k) {
    case WaveformKind::sine: return "sine";
    case WaveformKind::triangle: return "triangle";
    case WaveformKind::manual: return "manual";
  }
  return "?";
}

WaveformKind waveform_kind_from_string(const std::string& s) {
  if (s == "sine") return WaveformKind::sine;
  if (s == "triangle") return WaveformKind::triangle;
  if (s == "manual") return WaveformKind::manual;
  throw ConfigError("unknown waveform '" + s + "' (expected sine, triangle or manual)");
}

double WaveformConfig::value(double t_s) const {
  switch (kind) {
    case WaveformKind::sine:
      return offset_deg + amplitude_deg * std::sin(2.0 * std::numbers::pi * frequency_hz * t_s);
    case WaveformKind::triangle: {
      // Same phase as the sine: 0 at t = 0, rising.
      double p = frequency_hz * t_s + 0.25;
      p -= std::floor(p);
      return offset_deg + amplitude_deg * (1.0 - 4.0 * std::abs(p - 0.5));
    }
    case WaveformKind::manual:
      return value_deg;
  }
  return 0.0;
}

void WaveformConfig::validate() const {
  for (double v : {frequency_hz, amplitude_deg, offset_deg, value_deg}) {
    if (!std::isfinite(v)) throw ConfigError("setpoint fields must be finite");
  }
  if (kind != WaveformKind::manual && !(frequency_hz > 0.0)) throw ConfigError("setpoint frequency must be positive");
  if (amplitude_deg < 0.0) throw ConfigError("setpoint amplitude must be >= 0");
}

const char* to_string(CommandKind k) {
  switch (k) {
    case CommandKind::set_setpoint: return "set_setpoint";
    case CommandKind::set_waveform: return "set_waveform";
    case CommandKind::set_pid: return "set_pid";
    case CommandKind::freeze_learning: return "freeze_learning";
    case CommandKind::unfreeze_learning: return "unfreeze_learning";
    case CommandKind::reset_weights: return "reset_weights";
    case CommandKind::snapshot: return "snapshot";
    case CommandKind::subscribe_raster: return "subscribe_raster";
    case CommandKind::pause: return "pause";
    case CommandKind::resume: return "resume";
  }
  return "?";
}

namespace {

CommandKind command_kind_from_string(const std::string& s) {
  for (auto k : {CommandKind::set_setpoint, CommandKind::set_waveform, CommandKind::set_pid,
                 CommandKind::freeze_learning, CommandKind::unfreeze_learning, CommandKind::reset_weights,
                 CommandKind::snapshot, CommandKind::subscribe_raster, CommandKind::pause, CommandKind::resume}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown command type '" + s + "'");
}

/// Reads fields of one JSON object and rejects keys nobody asked for, so a
/// misspelt option fails loudly instead of silently keeping its default.
class Fields {
public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  void get(const char* key, std::optional<double>& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    if (!it->is_number()) throw ConfigError(where(key) + " must be a number");
    out = it->get<double>();
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where(const char* key = nullptr) const {
    std::string p = path_.empty() ? "config" : path_;
    if (key) p += std::string(path_.empty() ? ": " : ".") + key;
    return p;
  }

  std::string path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(where() + ": unknown key '" + k + "'");
    }
  }

private:
  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

void read_lif(const json& j, const std::string& path, LifParams& p) {
  Fields f(j, path);
  f.get("v_rest", p.v_rest);
  f.get("v_threshold", p.v_threshold);
  f.get("v_reset", p.v_reset);
  f.get("tau_m", p.tau_m);
  f.get("r_m", p.r_m);
  f.get("t_refractory", p.t_refractory);
  f.get("tau_syn_exc", p.tau_syn_exc);
  f.get("tau_syn_inh", p.tau_syn_inh);
  f.get("i_bias", p.i_bias);
  f.finish();
}

json lif_json(const LifParams& p) {
  return {{"v_rest", p.v_rest},         {"v_threshold", p.v_threshold}, {"v_reset", p.v_reset},
          {"tau_m", p.tau_m},           {"r_m", p.r_m},                 {"t_refractory", p.t_refractory},
          {"tau_syn_exc", p.tau_syn_exc}, {"tau_syn_inh", p.tau_syn_inh}, {"i_bias", p.i_bias}};
}

void read_kernel(const json& j, KernelParams& k) {
  Fields f(j, "plasticity");
  f.get("w_min", k.w_min);
  if (f.has("w_max")) {
    f.get("w_max", k.w_max);
    const auto scaled = KernelParams::with_default_amplitudes(k.w_max);
    k.a_ltd = scaled.a_ltd;
    k.a_ltp = scaled.a_ltp;
  }
  f.get("t_peak_ms", k.t_peak_ms);
  f.get("sigma_ms", k.sigma_ms);
  f.get("a_ltd", k.a_ltd);
  f.get("a_ltp", k.a_ltp);
  f.get("bin_ms", k.bin_ms);
  f.get("window_ms", k.window_ms);
  f.finish();
}

json kernel_json(const KernelParams& k) {
  return {{"t_peak_ms", k.t_peak_ms}, {"sigma_ms", k.sigma_ms}, {"a_ltd", k.a_ltd},         {"a_ltp", k.a_ltp},
          {"bin_ms", k.bin_ms},       {"window_ms", k.window_ms}, {"w_min", k.w_min}, {"w_max", k.w_max}};
}

void read_cerebellum(const json& j, CerebellumConfig& c) {
  Fields f(j, "cerebellum");
  f.get("n_mof_act", c.n_mof_act);
  f.get("n_mof_set", c.n_mof_set);
  f.get("n_grc", c.n_grc);
  f.get("n_puc", c.n_puc);
  f.get("n_dcn", c.n_dcn);
  f.get("mof_per_grc", c.mof_per_grc);
  f.get("pf_init_lo", c.pf_init_lo);
  f.get("pf_init_hi", c.pf_init_hi);
  f.get("w_mof_grc", c.w_mof_grc);
  f.get("w_mof_dcn", c.w_mof_dcn);
  f.get("w_puc_dcn", c.w_puc_dcn);
  f.get("mirror_sides", c.mirror_sides);
  if (const auto* d = f.child("delays")) {
    Fields fd(*d, "cerebellum.delays");
    fd.get("mof_grc", c.delay_mof_grc);
    fd.get("grc_puc", c.delay_grc_puc);
    fd.get("mof_dcn", c.delay_mof_dcn);
    fd.get("puc_dcn", c.delay_puc_dcn);
    fd.get("ino_puc", c.delay_ino_puc);
    fd.finish();
  }
  if (const auto* p = f.child("grc")) read_lif(*p, "cerebellum.grc", c.grc);
  if (const auto* p = f.child("puc")) read_lif(*p, "cerebellum.puc", c.puc);
  if (const auto* p = f.child("dcn")) read_lif(*p, "cerebellum.dcn", c.dcn);
  f.finish();
}

json cerebellum_json(const CerebellumConfig& c) {
  return {{"n_mof_act", c.n_mof_act},
          {"n_mof_set", c.n_mof_set},
          {"n_grc", c.n_grc},
          {"n_puc", c.n_puc},
          {"n_dcn", c.n_dcn},
          {"mof_per_grc", c.mof_per_grc},
          {"pf_init_lo", c.pf_init_lo},
          {"pf_init_hi", c.pf_init_hi},
          {"w_mof_grc", c.w_mof_grc},
          {"w_mof_dcn", c.w_mof_dcn},
          {"w_puc_dcn", c.w_puc_dcn},
          {"mirror_sides", c.mirror_sides},
          {"delays",
           {{"mof_grc", c.delay_mof_grc},
            {"grc_puc", c.delay_grc_puc},
            {"mof_dcn", c.delay_mof_dcn},
            {"puc_dcn", c.delay_puc_dcn},
            {"ino_puc", c.delay_ino_puc}}},
          {"grc", lif_json(c.grc)},
          {"puc", lif_json(c.puc)},
          {"dcn", lif_json(c.dcn)}};
}

void read_encoder(const json& j, const std::string& path, PopulationEncoderConfig& e) {
  Fields f(j, path);
  f.get("lo", e.lo);
  f.get("hi", e.hi);
  f.get("sigma_rf", e.sigma_rf);
  f.get("r_max_hz", e.r_max_hz);
  f.get("update_period_ms", e.update_period_ms);
  f.get("stochastic", e.stochastic);
  f.finish();
}

json encoder_json(const PopulationEncoderConfig& e) {
  return {{"lo", e.lo},
          {"hi", e.hi},
          {"sigma_rf", e.sigma_rf},
          {"r_max_hz", e.r_max_hz},
          {"update_period_ms", e.update_period_ms},
          {"stochastic", e.stochastic}};
}

void read_codec(const json& j, SessionConfig& c) {
  Fields f(j, "codec");
  if (const auto* e = f.child("mof_act")) read_encoder(*e, "codec.mof_act", c.mof_act);
  if (const auto* e = f.child("mof_set")) read_encoder(*e, "codec.mof_set", c.mof_set);
  if (const auto* e = f.child("ino")) {
    Fields fi(*e, "codec.ino");
    fi.get("r_max_hz", c.ino_r_max_hz);
    fi.get("stochastic", c.ino_stochastic);
    fi.finish();
  }
  if (const auto* e = f.child("decoder")) {
    Fields fd(*e, "codec.decoder");
    fd.get("gain", c.decoder.gain);
    fd.get("bias", c.decoder.bias);
    fd.get("tau_out_ms", c.decoder.tau_out_ms);
    fd.get("update_period_ms", c.decoder.update_period_ms);
    fd.get("omega_lo", c.decoder.omega_lo);
    fd.get("omega_hi", c.decoder.omega_hi);
    fd.finish();
  }
  f.finish();
}

json codec_json(const SessionConfig& c) {
  const auto& d = c.decoder;
  return {{"mof_act", encoder_json(c.mof_act)},
          {"mof_set", encoder_json(c.mof_set)},
          {"ino", {{"r_max_hz", c.ino_r_max_hz}, {"stochastic", c.ino_stochastic}}},
          {"decoder",
           {{"gain", d.gain},
            {"bias", d.bias},
            {"tau_out_ms", d.tau_out_ms},
            {"update_period_ms", d.update_period_ms},
            {"omega_lo", d.omega_lo},
            {"omega_hi", d.omega_hi}}}};
}

void read_actuator(const json& j, const std::string& path, ActuatorParams& a) {
  Fields f(j, path);
  f.get("k_m", a.k_m);
  f.get("f_stall", a.f_stall);
  f.get("tau_mot_ms", a.tau_mot_ms);
  f.get("k1", a.k1);
  f.get("k2", a.k2);
  f.get("slack_offset", a.slack_offset);
  f.finish();
}

json actuator_json(const ActuatorParams& a) {
  return {{"k_m", a.k_m}, {"f_stall", a.f_stall}, {"tau_mot_ms", a.tau_mot_ms},
          {"k1", a.k1},   {"k2", a.k2},           {"slack_offset", a.slack_offset}};
}

void read_plant(const json& j, SessionConfig& c) {
  Fields f(j, "plant");
  auto& p = c.plant;
  f.get("inertia", p.inertia);
  f.get("damping", p.damping);
  f.get("moment_arm", p.moment_arm);
  f.get("phi_lim_deg", p.phi_lim_deg);
  f.get("stop_stiffness", p.stop_stiffness);
  f.get("stop_damping", p.stop_damping);
  f.get("period_ms", c.plant_period_ms);
  f.get("pretension_n", c.pretension_n);
  if (const auto* a = f.child("left")) read_actuator(*a, "plant.left", p.left);
  if (const auto* a = f.child("right")) read_actuator(*a, "plant.right", p.right);
  f.finish();
}

json plant_json(const SessionConfig& c) {
  const auto& p = c.plant;
  return {{"inertia", p.inertia},
          {"damping", p.damping},
          {"moment_arm", p.moment_arm},
          {"phi_lim_deg", p.phi_lim_deg},
          {"stop_stiffness", p.stop_stiffness},
          {"stop_damping", p.stop_damping},
          {"period_ms", c.plant_period_ms},
          {"pretension_n", c.pretension_n},
          {"left", actuator_json(p.left)},
          {"right", actuator_json(p.right)}};
}

void read_pid(const json& j, PidConfig& p) {
  Fields f(j, "pid");
  f.get("k_p", p.k_p);
  f.get("k_i", p.k_i);
  f.get("k_d", p.k_d);
  f.get("integral_limit", p.integral_limit);
  f.get("u_max", p.u_max);
  f.get("period_ms", p.period_ms);
  f.finish();
}

json pid_json(const PidConfig& p) {
  return {{"k_p", p.k_p},       {"k_i", p.k_i},         {"k_d", p.k_d},
          {"integral_limit", p.integral_limit}, {"u_max", p.u_max}, {"period_ms", p.period_ms}};
}

void read_waveform(const json& j, const std::string& path, WaveformConfig& w) {
  Fields f(j, path);
  std::string kind = to_string(w.kind);
  f.get("waveform", kind);
  w.kind = waveform_kind_from_string(kind);
  f.get("frequency_hz", w.frequency_hz);
  f.get("amplitude_deg", w.amplitude_deg);
  f.get("offset_deg", w.offset_deg);
  f.get("value_deg", w.value_deg);
  f.finish();
}

json waveform_json(const WaveformConfig& w) {
  return {{"waveform", to_string(w.kind)},
          {"frequency_hz", w.frequency_hz},
          {"amplitude_deg", w.amplitude_deg},
          {"offset_deg", w.offset_deg},
          {"value_deg", w.value_deg}};
}

Command read_command(const json& j, const std::string& path) {
  Fields f(j, path);
  Command c;
  std::string type;
  f.get("type", type);
  if (type.empty()) throw ConfigError(f.where("type") + " is required");
  c.kind = command_kind_from_string(type);
  int version = kCommandSchemaVersion;
  f.get("v", version);
  if (version != kCommandSchemaVersion) throw ConfigError(f.where("v") + ": unsupported schema version");
  f.get("at", c.at_s);
  f.get("id", c.id);
  if (c.at_s && !(std::isfinite(*c.at_s) && *c.at_s >= 0.0)) throw ConfigError(f.where("at") + " must be >= 0");
  auto required_number = [&](const char* key, double& out) {
    if (!f.has(key)) throw ConfigError(f.where(key) + " is required for " + type);
    f.get(key, out);
    if (!std::isfinite(out)) throw ConfigError(f.where(key) + " must be finite");
  };
  switch (c.kind) {
    case CommandKind::set_setpoint:
      required_number("value", c.value_deg);
      break;
    case CommandKind::set_waveform: {
      const auto* w = f.child("waveform");
      if (!w) throw ConfigError(f.where("waveform") + " is required for set_waveform");
      read_waveform(*w, f.path("waveform"), c.waveform);
      c.waveform.validate();
      break;
    }
    case CommandKind::set_pid:
      required_number("k_p", c.k_p);
      required_number("k_i", c.k_i);
      required_number("k_d", c.k_d);
      if (c.k_p < 0.0 || c.k_i < 0.0 || c.k_d < 0.0) throw ConfigError("PID gains must be non-negative");
      break;
    case CommandKind::subscribe_raster:
      f.get("populations", c.populations);
      break;
    default:
      break;
  }
  f.finish();
  return c;
}

json command_json(const Command& c) {
  json j = {{"type", to_string(c.kind)}};
  if (c.at_s) j["at"] = *c.at_s;
  if (!c.id.empty()) j["id"] = c.id;
  switch (c.kind) {
    case CommandKind::set_setpoint: j["value"] = c.value_deg; break;
    case CommandKind::set_waveform: j["waveform"] = waveform_json(c.waveform); break;
    case CommandKind::set_pid:
      j["k_p"] = c.k_p;
      j["k_i"] = c.k_i;
      j["k_d"] = c.k_d;
      break;
    case CommandKind::subscribe_raster: j["populations"] = c.populations; break;
    default: break;
  }
  return j;
}

json parse_text(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

}  // namespace

SessionConfig SessionConfig::standard() {
  SessionConfig c;
  c.mof_act.update_period_ms = 20.0;
  c.mof_set.update_period_ms = 50.0;
  // Two preferred-value spacings, so enough fibres are active together to
  // reach the granule threshold.
  c.mof_act.sigma_rf = 16.0;
  c.mof_set.sigma_rf = 16.0;
  return c;
}

void SessionConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) fail("duration_s must be positive");
  if (!(tick_ms > 0.0)) fail("tick_ms must be positive");
  if (numeric.kind == NumericKind::fixed) {
    try {
      numeric.fixed.validate();
    } catch (const std::exception& e) {
      fail(std::string("numeric: ") + e.what());
    }
  }
  auto check_period = [&](double period_ms, const char* name) {
    const double ratio = period_ms / tick_ms;
    if (!(period_ms > 0.0) || std::abs(ratio - std::round(ratio)) > 1e-9) {
      fail(std::string(name) + " must be a positive multiple of tick_ms");
    }
  };
  check_period(plant_period_ms, "plant.period_ms");
  check_period(pid.period_ms, "pid.period_ms");
  check_period(mof_act.update_period_ms, "codec.mof_act.update_period_ms");
  check_period(mof_set.update_period_ms, "codec.mof_set.update_period_ms");
  check_period(decoder.update_period_ms, "codec.decoder.update_period_ms");
  check_period(telemetry_period_ms, "telemetry_period_ms");
  if (!(ino_r_max_hz > 0.0) || ino_r_max_hz * tick_ms > 1000.0) fail("codec.ino.r_max_hz must be in (0, 1000 / tick_ms]");
  if (!(pretension_n >= 0.0)) fail("plant.pretension_n must be >= 0");
  if (!std::isfinite(feedforward_per_deg)) fail("feedforward_per_deg must be finite");
  if (logs.weights_period_s < 0.0) fail("logs.weights_period_s must be >= 0");
  if (mof_act.n_cells != cerebellum.n_mof_act || mof_set.n_cells != cerebellum.n_mof_set) {
    fail("encoder cell counts must match the MoF population sizes");
  }
  try {
    cerebellum.validate();
    mof_act.validate();
    mof_set.validate();
    decoder.validate();
    plant.validate();
    pid.validate();
    setpoint.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(e.what());
  }
}

SessionConfig session_config_from_json(const std::string& text) {
  const json root = parse_text(text, "session config");
  SessionConfig c = SessionConfig::standard();
  Fields f(root, "");
  f.get("seed", c.seed);
  f.get("duration_s", c.duration_s);
  f.get("tick_ms", c.tick_ms);
  if (const auto* n = f.child("numeric")) {
    Fields fn(*n, "numeric");
    std::string mode = to_string(c.numeric.kind);
    fn.get("mode", mode);
    try {
      c.numeric.kind = numeric_kind_from_string(mode);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("numeric.mode: ") + e.what());
    }
    fn.get("int_bits", c.numeric.fixed.int_bits);
    fn.get("frac_bits", c.numeric.fixed.frac_bits);
    fn.finish();
  }
  if (const auto* p = f.child("cerebellum")) read_cerebellum(*p, c.cerebellum);
  if (const auto* p = f.child("plasticity")) read_kernel(*p, c.cerebellum.kernel);
  if (const auto* p = f.child("codec")) read_codec(*p, c);
  if (const auto* p = f.child("plant")) read_plant(*p, c);
  if (const auto* p = f.child("pid")) read_pid(*p, c.pid);
  if (const auto* p = f.child("setpoint")) read_waveform(*p, "setpoint", c.setpoint);
  f.get("learning", c.learning);
  f.get("feedforward_per_deg", c.feedforward_per_deg);
  f.get("telemetry_period_ms", c.telemetry_period_ms);
  if (const auto* p = f.child("logs")) {
    Fields fl(*p, "logs");
    fl.get("out_dir", c.logs.out_dir);
    fl.get("spikes", c.logs.spikes);
    fl.get("weights_period_s", c.logs.weights_period_s);
    fl.finish();
  }
  if (const auto* p = f.child("timeline")) {
    if (!p->is_array()) throw ConfigError("timeline must be an array of commands");
    for (std::size_t i = 0; i < p->size(); ++i) {
      c.timeline.push_back(read_command((*p)[i], "timeline[" + std::to_string(i) + "]"));
    }
  }
  f.finish();
  c.mof_act.n_cells = c.cerebellum.n_mof_act;
  c.mof_set.n_cells = c.cerebellum.n_mof_set;
  c.validate();
  return c;
}

std::string session_config_to_json(const SessionConfig& c) {
  json timeline = json::array();
  for (const auto& cmd : c.timeline) timeline.push_back(command_json(cmd));
  json j = {{"seed", c.seed},
            {"duration_s", c.duration_s},
            {"tick_ms", c.tick_ms},
            {"numeric",
             {{"mode", to_string(c.numeric.kind)},
              {"int_bits", c.numeric.fixed.int_bits},
              {"frac_bits", c.numeric.fixed.frac_bits}}},
            {"cerebellum", cerebellum_json(c.cerebellum)},
            {"plasticity", kernel_json(c.cerebellum.kernel)},
            {"codec", codec_json(c)},
            {"plant", plant_json(c)},
            {"pid", pid_json(c.pid)},
            {"setpoint", waveform_json(c.setpoint)},
            {"learning", c.learning},
            {"feedforward_per_deg", c.feedforward_per_deg},
            {"telemetry_period_ms", c.telemetry_period_ms},
            {"logs", {{"out_dir", c.logs.out_dir}, {"spikes", c.logs.spikes}, {"weights_period_s", c.logs.weights_period_s}}},
            {"timeline", timeline}};
  return j.dump(2) + "\n";
}

SessionConfig load_session_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  try {
    return session_config_from_json(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

Command command_from_json(const std::string& text) { return read_command(parse_text(text, "command"), "command"); }

std::string command_to_json(const Command& cmd) { return command_json(cmd).dump(); }

}  // namespace cerebloop
