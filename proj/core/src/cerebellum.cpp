#include "cerebloop/cerebellum.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace cerebloop {

namespace {

// Explicit bit-to-double mapping so weight draws do not depend on the
// standard library's distribution implementation.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint32_t uniform_index(std::mt19937_64& rng, std::uint32_t n) {
  return static_cast<std::uint32_t>(unit_uniform(rng) * n);
}

std::string side_name(const char* base, Side s) { return std::string(base) + "_" + suffix(s); }

}  // namespace

std::uint64_t binomial(std::uint32_t n, std::uint32_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint32_t i = 1; i <= k; ++i) {
    // r * (n - k + i) is divisible by i; cancel first so the product stays
    // exact whenever the result fits.
    const std::uint64_t g = std::gcd(r, std::uint64_t{i});
    const std::uint64_t num = (n - k + i) / (i / g);
    r /= g;
    if (r > UINT64_MAX / num) return UINT64_MAX;
    r *= num;
  }
  return r;
}

CerebellumConfig CerebellumConfig::standard() {
  CerebellumConfig c;

  c.grc.tau_m = 10.0;
  c.grc.r_m = 10.0;
  // A granule cell needs three of its four fibres near peak rate to fire.
  c.w_mof_grc = 3.5;

  c.puc.tau_m = 10.0;
  c.puc.r_m = 10.0;
  c.puc.i_bias = 1.5;

  c.dcn.tau_m = 10.0;
  c.dcn.r_m = 10.0;
  c.w_mof_dcn = 2.5;
  c.w_puc_dcn = 1.0;

  c.kernel = KernelParams::with_default_amplitudes(1.0);
  return c;
}

void CerebellumConfig::validate() const {
  if (n_mof_act == 0 || n_mof_set == 0) throw std::invalid_argument("cerebellum needs MoFs for both inputs");
  if (n_grc == 0 || n_puc == 0 || n_dcn == 0) throw std::invalid_argument("cerebellum population sizes must be positive");
  if (mof_per_grc == 0 || mof_per_grc > n_mof()) throw std::invalid_argument("mof_per_grc must lie in [1, n_mof]");
  if (n_grc > binomial(n_mof(), mof_per_grc)) {
    throw std::invalid_argument("n_grc exceeds the number of unique MoF combinations C(" + std::to_string(n_mof()) +
                                ", " + std::to_string(mof_per_grc) + ")");
  }
  if (!(pf_init_lo >= 0.0 && pf_init_lo <= pf_init_hi && pf_init_hi <= 1.0)) {
    throw std::invalid_argument("PF initial weight range must satisfy 0 <= lo <= hi <= 1");
  }
  if (!(w_mof_grc >= 0.0 && w_mof_dcn >= 0.0 && w_puc_dcn >= 0.0)) {
    throw std::invalid_argument("static weights must be non-negative");
  }
  for (auto d : {delay_mof_grc, delay_grc_puc, delay_mof_dcn, delay_puc_dcn, delay_ino_puc}) {
    if (d < 1) throw std::invalid_argument("delays must be at least one tick");
  }
  grc.validate();
  puc.validate();
  dcn.validate();
  kernel.validate();
}

Cerebellum build_network(const CerebellumConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  Cerebellum out;
  auto& net = out.network;
  auto& lay = out.layout;

  lay.mof_act = net.add_population("MoF_act", PopulationKind::source, cfg.n_mof_act);
  lay.mof_set = net.add_population("MoF_set", PopulationKind::source, cfg.n_mof_set);
  lay.grc = net.add_population("GrC", PopulationKind::lif, cfg.n_grc, cfg.grc);
  for (Side s : kSides) lay.puc[index(s)] = net.add_population(side_name("PuC", s), PopulationKind::lif, cfg.n_puc, cfg.puc);
  for (Side s : kSides) lay.dcn[index(s)] = net.add_population(side_name("DCN", s), PopulationKind::lif, cfg.n_dcn, cfg.dcn);
  for (Side s : kSides) lay.ino[index(s)] = net.add_population(side_name("InO", s), PopulationKind::source, 1);
  net.set_plasticity(cfg.kernel);

  // Unique MoF combinations per GrC, by rejection.
  std::set<std::vector<std::uint32_t>> seen;
  lay.grc_inputs.reserve(cfg.n_grc);
  while (lay.grc_inputs.size() < cfg.n_grc) {
    std::vector<std::uint32_t> pool(cfg.n_mof());
    for (std::uint32_t i = 0; i < pool.size(); ++i) pool[i] = i;
    std::vector<std::uint32_t> combo;
    for (std::uint32_t k = 0; k < cfg.mof_per_grc; ++k) {
      const auto j = k + uniform_index(rng, static_cast<std::uint32_t>(pool.size()) - k);
      std::swap(pool[k], pool[j]);
      combo.push_back(pool[k]);
    }
    std::sort(combo.begin(), combo.end());
    if (seen.insert(combo).second) lay.grc_inputs.push_back(std::move(combo));
  }

  Projection act_grc{"mof_act_grc", lay.mof_act, lay.grc, ProjectionKind::current, {}};
  Projection set_grc{"mof_set_grc", lay.mof_set, lay.grc, ProjectionKind::current, {}};
  for (std::uint32_t g = 0; g < cfg.n_grc; ++g) {
    for (auto m : lay.grc_inputs[g]) {
      if (m < cfg.n_mof_act) {
        act_grc.synapses.push_back({m, g, cfg.w_mof_grc, cfg.delay_mof_grc, SynapseSign::excitatory, false});
      } else {
        set_grc.synapses.push_back({m - cfg.n_mof_act, g, cfg.w_mof_grc, cfg.delay_mof_grc, SynapseSign::excitatory, false});
      }
    }
  }
  net.add_projection(std::move(act_grc));
  net.add_projection(std::move(set_grc));

  const double w_lo = cfg.pf_init_lo * cfg.kernel.w_max;
  const double w_hi = cfg.pf_init_hi * cfg.kernel.w_max;
  for (Side s : kSides) {
    Projection pf{side_name("pf", s), lay.grc, lay.puc[index(s)], ProjectionKind::current, {}};
    pf.synapses.reserve(static_cast<std::size_t>(cfg.n_grc) * cfg.n_puc);
    for (std::uint32_t g = 0; g < cfg.n_grc; ++g) {
      for (std::uint32_t p = 0; p < cfg.n_puc; ++p) {
        const double w = (cfg.mirror_sides && s == Side::right)
                             ? net.projection(lay.parallel_fibers[index(Side::left)]).synapses[pf.synapses.size()].weight
                             : w_lo + (w_hi - w_lo) * unit_uniform(rng);
        pf.synapses.push_back({g, p, w, cfg.delay_grc_puc, SynapseSign::excitatory, true});
      }
    }
    lay.parallel_fibers[index(s)] = net.add_projection(std::move(pf));
  }

  for (Side s : kSides) {
    for (auto [src, n, label] : {std::tuple{lay.mof_act, cfg.n_mof_act, "mof_act_dcn"},
                                 std::tuple{lay.mof_set, cfg.n_mof_set, "mof_set_dcn"}}) {
      Projection p{side_name(label, s), src, lay.dcn[index(s)], ProjectionKind::current, {}};
      for (std::uint32_t m = 0; m < n; ++m) {
        for (std::uint32_t d = 0; d < cfg.n_dcn; ++d) {
          p.synapses.push_back({m, d, cfg.w_mof_dcn, cfg.delay_mof_dcn, SynapseSign::excitatory, false});
        }
      }
      net.add_projection(std::move(p));
    }
    Projection inh{side_name("puc_dcn", s), lay.puc[index(s)], lay.dcn[index(s)], ProjectionKind::current, {}};
    for (std::uint32_t p = 0; p < cfg.n_puc; ++p) {
      for (std::uint32_t d = 0; d < cfg.n_dcn; ++d) {
        inh.synapses.push_back({p, d, cfg.w_puc_dcn, cfg.delay_puc_dcn, SynapseSign::inhibitory, false});
      }
    }
    net.add_projection(std::move(inh));

    Projection cf{side_name("cf", s), lay.ino[index(s)], lay.puc[index(s)], ProjectionKind::teaching, {}};
    for (std::uint32_t p = 0; p < cfg.n_puc; ++p) {
      cf.synapses.push_back({0, p, 0.0, cfg.delay_ino_puc, SynapseSign::excitatory, false});
    }
    net.add_projection(std::move(cf));
  }

  net.validate();
  return out;
}

CerebellumLayout CerebellumLayout::from_network(const Network& net) {
  auto pop = [&](const std::string& name) {
    const auto id = net.find_population(name);
    if (!id) throw TopologyError(name, "population missing");
    return *id;
  };
  CerebellumLayout lay;
  lay.mof_act = pop("MoF_act");
  lay.mof_set = pop("MoF_set");
  lay.grc = pop("GrC");
  for (Side s : kSides) {
    lay.puc[index(s)] = pop(side_name("PuC", s));
    lay.dcn[index(s)] = pop(side_name("DCN", s));
    lay.ino[index(s)] = pop(side_name("InO", s));
    const auto pf = net.find_projection(side_name("pf", s));
    if (!pf) throw TopologyError(side_name("pf", s), "parallel fiber projection missing");
    lay.parallel_fibers[index(s)] = *pf;
  }
  const auto n_act = net.population(lay.mof_act).size;
  lay.grc_inputs.assign(net.population(lay.grc).size, {});
  for (const auto& proj : net.projections()) {
    if (proj.target != lay.grc) continue;
    const std::uint32_t offset = proj.source == lay.mof_set ? n_act : 0;
    for (const auto& s : proj.synapses) lay.grc_inputs[s.post].push_back(s.pre + offset);
  }
  for (auto& v : lay.grc_inputs) std::sort(v.begin(), v.end());
  return lay;
}

namespace {

struct AllowedEdge {
  std::string source;
  std::string target;
  ProjectionKind kind;
  SynapseSign sign;
  bool plastic;
};

std::vector<AllowedEdge> allowed_edges() {
  std::vector<AllowedEdge> e;
  for (const char* mof : {"MoF_act", "MoF_set"}) {
    e.push_back({mof, "GrC", ProjectionKind::current, SynapseSign::excitatory, false});
    for (Side s : kSides) e.push_back({mof, side_name("DCN", s), ProjectionKind::current, SynapseSign::excitatory, false});
  }
  for (Side s : kSides) {
    e.push_back({"GrC", side_name("PuC", s), ProjectionKind::current, SynapseSign::excitatory, true});
    e.push_back({side_name("PuC", s), side_name("DCN", s), ProjectionKind::current, SynapseSign::inhibitory, false});
    e.push_back({side_name("InO", s), side_name("PuC", s), ProjectionKind::teaching, SynapseSign::excitatory, false});
  }
  return e;
}

std::string neuron_label(const Population& p, std::uint32_t i) { return p.name + "[" + std::to_string(i) + "]"; }

}  // namespace

TopologyReport validate_topology(const Network& net) {
  const auto lay = CerebellumLayout::from_network(net);
  const auto& mof_act = net.population(lay.mof_act);
  const auto& mof_set = net.population(lay.mof_set);
  const auto& grc = net.population(lay.grc);

  for (auto id : {lay.mof_act, lay.mof_set, lay.ino[0], lay.ino[1]}) {
    if (net.population(id).kind != PopulationKind::source) {
      throw TopologyError(net.population(id).name, "must be a spike source");
    }
  }
  for (const auto& n : {std::string("InO_L"), std::string("InO_R")}) {
    if (net.population(*net.find_population(n)).size != 1) throw TopologyError(n, "must be a single spike source");
  }

  const auto allowed = allowed_edges();
  for (const auto& proj : net.projections()) {
    const auto& src = net.population(proj.source).name;
    const auto& dst = net.population(proj.target).name;
    const auto it = std::find_if(allowed.begin(), allowed.end(), [&](const AllowedEdge& e) {
      return e.source == src && e.target == dst && e.kind == proj.kind;
    });
    if (it == allowed.end()) {
      throw TopologyError(proj.name.empty() ? src + "->" + dst : proj.name,
                          "forbidden projection from " + src + " to " + dst);
    }
    for (const auto& s : proj.synapses) {
      if (s.sign != it->sign || s.plastic != it->plastic) {
        throw TopologyError(proj.name, "synapse sign or plasticity does not match its pathway");
      }
    }
  }

  // Afferent bookkeeping per target neuron, keyed by source population.
  std::map<NeuronId, std::map<PopulationId, std::set<std::uint32_t>>> afferent_sets;
  std::map<NeuronId, std::map<PopulationId, std::uint32_t>> afferent_counts;
  for (const auto& proj : net.projections()) {
    const auto& dst = net.population(proj.target);
    for (const auto& s : proj.synapses) {
      const NeuronId post = dst.first + s.post;
      afferent_sets[post][proj.source].insert(s.pre);
      ++afferent_counts[post][proj.source];
    }
  }
  auto count = [&](NeuronId post, PopulationId src) -> std::uint32_t {
    auto it = afferent_counts.find(post);
    if (it == afferent_counts.end()) return 0;
    auto jt = it->second.find(src);
    return jt == it->second.end() ? 0 : jt->second;
  };
  auto distinct = [&](NeuronId post, PopulationId src) -> std::uint32_t {
    auto it = afferent_sets.find(post);
    if (it == afferent_sets.end()) return 0;
    auto jt = it->second.find(src);
    return jt == it->second.end() ? 0 : static_cast<std::uint32_t>(jt->second.size());
  };

  TopologyReport r;
  r.n_mof = mof_act.size + mof_set.size;
  r.n_grc = grc.size;
  r.n_puc_per_side = net.population(lay.puc[0]).size;
  r.n_dcn_per_side = net.population(lay.dcn[0]).size;

  std::set<std::vector<std::uint32_t>> combos;
  for (std::uint32_t g = 0; g < grc.size; ++g) {
    const NeuronId id = grc.first + g;
    const auto n = count(id, lay.mof_act) + count(id, lay.mof_set);
    if (n != distinct(id, lay.mof_act) + distinct(id, lay.mof_set)) {
      throw TopologyError(neuron_label(grc, g), "duplicate MoF afferent");
    }
    if (g == 0) r.mof_per_grc = n;
    if (n != r.mof_per_grc || n == 0) {
      throw TopologyError(neuron_label(grc, g), "has " + std::to_string(n) + " MoF afferents, expected " +
                                                    std::to_string(r.mof_per_grc));
    }
    if (!combos.insert(lay.grc_inputs[g]).second) {
      throw TopologyError(neuron_label(grc, g), "shares its MoF combination with another GrC");
    }
  }

  for (Side s : kSides) {
    const auto& puc = net.population(lay.puc[index(s)]);
    const auto& dcn = net.population(lay.dcn[index(s)]);
    if (puc.size != r.n_puc_per_side || dcn.size != r.n_dcn_per_side) {
      throw TopologyError(puc.name, "left and right populations differ in size");
    }
    for (std::uint32_t i = 0; i < puc.size; ++i) {
      const NeuronId id = puc.first + i;
      const auto pf = count(id, lay.grc);
      if (pf != grc.size || distinct(id, lay.grc) != grc.size) {
        throw TopologyError(neuron_label(puc, i), "has " + std::to_string(pf) + " parallel fiber afferents, expected " +
                                                      std::to_string(grc.size));
      }
      if (count(id, lay.ino[index(s)]) != 1) {
        throw TopologyError(neuron_label(puc, i), "needs exactly one climbing fiber from " +
                                                      net.population(lay.ino[index(s)]).name);
      }
    }
    r.pf_afferents_per_puc = grc.size;
    for (std::uint32_t i = 0; i < dcn.size; ++i) {
      const NeuronId id = dcn.first + i;
      const auto inh = count(id, lay.puc[index(s)]);
      if (inh != puc.size || distinct(id, lay.puc[index(s)]) != puc.size) {
        throw TopologyError(neuron_label(dcn, i), "has " + std::to_string(inh) + " inhibitory PuC afferents, expected " +
                                                      std::to_string(puc.size));
      }
      const auto exc = count(id, lay.mof_act) + count(id, lay.mof_set);
      const auto exc_distinct = distinct(id, lay.mof_act) + distinct(id, lay.mof_set);
      if (exc != r.n_mof || exc_distinct != r.n_mof) {
        throw TopologyError(neuron_label(dcn, i), "has " + std::to_string(exc) + " MoF afferents, expected " +
                                                      std::to_string(r.n_mof));
      }
    }
    r.puc_afferents_per_dcn = puc.size;
    r.mof_afferents_per_dcn = r.n_mof;
  }
  return r;
}

}  // namespace cerebloop
