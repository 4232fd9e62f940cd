#pragma once

#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "cerebloop/metrics.hpp"
#include "cerebloop/network.hpp"
#include "cerebloop/session.hpp"

namespace cerebloop {

/// telemetry.csv: t,phi_set,phi_act,eps_l,eps_r,omega_l,omega_r
class TelemetryWriter {
public:
  explicit TelemetryWriter(const std::string& path);
  void write(const TelemetryRow& row);
  void flush() { os_.flush(); }

private:
  std::ofstream os_;
};

/// spikes.csv: t,neuron,population with t in s.
class SpikeWriter {
public:
  SpikeWriter(const std::string& path, const Network& net, double tick_ms);
  void write(std::span<const SpikeEvent> spikes);
  void flush() { os_.flush(); }

private:
  std::ofstream os_;
  std::vector<std::string> population_of_;
  double tick_ms_;
};

/// "weights_<t>.csv" with t in whole seconds when integral.
std::string weights_file_name(double t_s);

/// weights_<t>.csv: projection,pre,post,weight
void write_weights_csv(const std::string& path, const WeightSnapshot& snap, const Network& net);

std::vector<TelemetryRow> read_telemetry_csv(const std::string& path);

}  // namespace cerebloop
