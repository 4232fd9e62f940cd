#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cerebloop/network.hpp"

namespace cerebloop {

enum class Side : std::uint8_t { left = 0, right = 1 };

inline constexpr std::array<Side, 2> kSides{Side::left, Side::right};
inline constexpr std::size_t index(Side s) { return static_cast<std::size_t>(s); }
inline const char* suffix(Side s) { return s == Side::left ? "L" : "R"; }

/// Marr-Albus cerebellar microcircuit driving one antagonistic joint.
///
/// Weights are in nA. PF (GrC->PuC) weights start uniform in
/// [init_lo, init_hi] * kernel.w_max.
struct CerebellumConfig {
  std::uint32_t n_mof_act = 16;
  std::uint32_t n_mof_set = 16;
  std::uint32_t n_grc = 256;
  std::uint32_t n_puc = 8;
  std::uint32_t n_dcn = 4;
  std::uint32_t mof_per_grc = 4;

  double pf_init_lo = 0.2;
  double pf_init_hi = 0.8;
  double w_mof_grc = 0.0;
  double w_mof_dcn = 0.0;
  double w_puc_dcn = 0.0;

  std::uint32_t delay_mof_grc = 1;
  std::uint32_t delay_grc_puc = 1;
  std::uint32_t delay_mof_dcn = 1;
  std::uint32_t delay_puc_dcn = 1;
  std::uint32_t delay_ino_puc = 1;

  LifParams grc;
  LifParams puc;
  LifParams dcn;
  KernelParams kernel;

  std::uint64_t seed = 1;
  /// Right PF weights copy the left ones, making the two sides identical.
  bool mirror_sides = false;

  /// Tuned defaults used by the standard experiment.
  static CerebellumConfig standard();

  std::uint32_t n_mof() const { return n_mof_act + n_mof_set; }
  void validate() const;
};

/// Population and projection handles of a built cerebellum.
struct CerebellumLayout {
  PopulationId mof_act = 0;
  PopulationId mof_set = 0;
  PopulationId grc = 0;
  std::array<PopulationId, 2> puc{};
  std::array<PopulationId, 2> dcn{};
  std::array<PopulationId, 2> ino{};
  std::array<ProjectionId, 2> parallel_fibers{};
  /// MoF indices (0 .. n_mof-1, act first) feeding each GrC, sorted.
  std::vector<std::vector<std::uint32_t>> grc_inputs;

  /// Recovers the handles from population/projection names.
  static CerebellumLayout from_network(const Network& net);
};

struct Cerebellum {
  Network network;
  CerebellumLayout layout;
};

/// Throws std::invalid_argument when the configuration cannot be built, in
/// particular when unique MoF combinations run out.
Cerebellum build_network(const CerebellumConfig& cfg);

class TopologyError : public std::runtime_error {
public:
  TopologyError(std::string element, const std::string& what)
      : std::runtime_error(element + ": " + what), element_(std::move(element)) {}
  const std::string& element() const { return element_; }

private:
  std::string element_;
};

struct TopologyReport {
  std::uint32_t n_mof = 0;
  std::uint32_t n_grc = 0;
  std::uint32_t n_puc_per_side = 0;
  std::uint32_t n_dcn_per_side = 0;
  std::uint32_t mof_per_grc = 0;
  std::uint32_t mof_afferents_per_dcn = 0;
  std::uint32_t puc_afferents_per_dcn = 0;
  std::uint32_t pf_afferents_per_puc = 0;
};

/// Checks convergence/divergence counts, side isolation and the absence of
/// interneuron or olivo-cerebellar projections. Throws TopologyError.
TopologyReport validate_topology(const Network& net);

/// Number of k-subsets of n, saturating at UINT64_MAX.
std::uint64_t binomial(std::uint32_t n, std::uint32_t k);

}  // namespace cerebloop
