#include "cerebloop/logs.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace cerebloop {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  return os;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  // Avoid "-0.000000", which would make equal runs differ in sign only.
  if (buf[0] == '-') {
    bool zero = true;
    for (const char* p = buf + 1; *p; ++p) zero = zero && (*p == '0' || *p == '.');
    if (zero) return buf + 1;
  }
  return buf;
}

}  // namespace

TelemetryWriter::TelemetryWriter(const std::string& path) : os_(open_out(path)) {
  os_ << "t,phi_set,phi_act,eps_l,eps_r,omega_l,omega_r\n";
}

void TelemetryWriter::write(const TelemetryRow& r) {
  os_ << fmt("%.3f", r.t) << ',' << fmt("%.6f", r.phi_set) << ',' << fmt("%.6f", r.phi_act) << ','
      << fmt("%.6f", r.eps_l) << ',' << fmt("%.6f", r.eps_r) << ',' << fmt("%.6f", r.omega_l) << ','
      << fmt("%.6f", r.omega_r) << '\n';
}

SpikeWriter::SpikeWriter(const std::string& path, const Network& net, double tick_ms)
    : os_(open_out(path)), tick_ms_(tick_ms) {
  population_of_.reserve(net.neuron_count());
  for (NeuronId n = 0; n < net.neuron_count(); ++n) population_of_.push_back(net.population(net.population_of(n)).name);
  os_ << "t,neuron,population\n";
}

void SpikeWriter::write(std::span<const SpikeEvent> spikes) {
  for (const auto& s : spikes) {
    os_ << fmt("%.4f", static_cast<double>(s.t) * tick_ms_ * 1e-3) << ',' << s.neuron << ','
        << population_of_.at(s.neuron) << '\n';
  }
}

std::string weights_file_name(double t_s) {
  const double r = std::round(t_s);
  if (std::abs(t_s - r) < 1e-9) return "weights_" + std::to_string(static_cast<long long>(r)) + ".csv";
  return "weights_" + fmt("%.3f", t_s) + ".csv";
}

void write_weights_csv(const std::string& path, const WeightSnapshot& snap, const Network& net) {
  auto os = open_out(path);
  os << "projection,pre,post,weight\n";
  for (const auto& pw : snap.projections) {
    const auto& syn = net.projection(pw.projection).synapses;
    for (std::size_t i = 0; i < pw.weights.size(); ++i) {
      os << pw.name << ',' << syn[i].pre << ',' << syn[i].post << ',' << fmt("%.9g", pw.weights[i]) << '\n';
    }
  }
  if (!os) throw std::runtime_error("failed writing " + path);
}

std::vector<TelemetryRow> read_telemetry_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("t,phi_set,phi_act", 0) != 0) {
    throw std::runtime_error(path + ": missing telemetry header");
  }
  std::vector<TelemetryRow> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    TelemetryRow r;
    char extra = 0;
    const int n = std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf%c", &r.t, &r.phi_set, &r.phi_act, &r.eps_l,
                              &r.eps_r, &r.omega_l, &r.omega_r, &extra);
    if (n != 7) throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed telemetry row");
    rows.push_back(r);
  }
  return rows;
}

}  // namespace cerebloop
