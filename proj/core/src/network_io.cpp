#include "cerebloop/network_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace cerebloop {

namespace {

[[noreturn]] void parse_error(const std::string& what) { throw std::runtime_error("network file: " + what); }

void expect(std::istream& is, const std::string& keyword) {
  std::string word;
  if (!(is >> word) || word != keyword) parse_error("expected '" + keyword + "', got '" + word + "'");
}

template <class T>
T read(std::istream& is, const char* what) {
  T v{};
  if (!(is >> v)) parse_error(std::string("cannot read ") + what);
  return v;
}

double read_double(std::istream& is, const char* what) {
  // operator>> rejects "inf"/"nan" spellings; strtod accepts every %.17g output.
  std::string token = read<std::string>(is, what);
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') parse_error(std::string("bad number for ") + what + ": " + token);
  return v;
}

}  // namespace

void write_network(std::ostream& os, const Network& net) {
  const auto old_precision = os.precision(17);
  os << "cerebloop-network " << kNetworkFormatVersion << '\n';
  if (const auto& k = net.plasticity()) {
    os << "kernel " << k->t_peak_ms << ' ' << k->sigma_ms << ' ' << k->a_ltd << ' ' << k->a_ltp << ' ' << k->bin_ms
       << ' ' << k->window_ms << ' ' << k->w_min << ' ' << k->w_max << '\n';
  } else {
    os << "kernel none\n";
  }
  os << "populations " << net.populations().size() << '\n';
  for (const auto& p : net.populations()) {
    const auto& q = p.params;
    os << p.name << ' ' << (p.kind == PopulationKind::lif ? "lif" : "source") << ' ' << p.size << ' ' << q.v_rest << ' '
       << q.v_threshold << ' ' << q.v_reset << ' ' << q.tau_m << ' ' << q.r_m << ' ' << q.t_refractory << ' '
       << q.tau_syn_exc << ' ' << q.tau_syn_inh << ' ' << q.i_bias << '\n';
  }
  os << "projections " << net.projections().size() << '\n';
  for (const auto& proj : net.projections()) {
    os << "projection " << (proj.name.empty() ? "-" : proj.name) << ' ' << net.population(proj.source).name << ' '
       << net.population(proj.target).name << ' ' << (proj.kind == ProjectionKind::teaching ? "teaching" : "current")
       << ' ' << proj.synapses.size() << '\n';
    for (const auto& s : proj.synapses) {
      os << s.pre << ' ' << s.post << ' ' << s.weight << ' ' << s.delay << ' '
         << (s.sign == SynapseSign::excitatory ? 'e' : 'i') << ' ' << (s.plastic ? 1 : 0) << '\n';
    }
  }
  os << "end\n";
  os.precision(old_precision);
}

Network read_network(std::istream& is) {
  expect(is, "cerebloop-network");
  const int version = read<int>(is, "version");
  if (version != kNetworkFormatVersion) parse_error("unsupported version " + std::to_string(version));

  Network net;
  expect(is, "kernel");
  std::string first = read<std::string>(is, "kernel");
  if (first != "none") {
    std::istringstream head(first);
    KernelParams k;
    k.t_peak_ms = read_double(head, "t_peak");
    k.sigma_ms = read_double(is, "sigma");
    k.a_ltd = read_double(is, "a_ltd");
    k.a_ltp = read_double(is, "a_ltp");
    k.bin_ms = read_double(is, "bin");
    k.window_ms = read_double(is, "window");
    k.w_min = read_double(is, "w_min");
    k.w_max = read_double(is, "w_max");
    net.set_plasticity(k);
  }

  expect(is, "populations");
  const auto n_pop = read<std::size_t>(is, "population count");
  for (std::size_t i = 0; i < n_pop; ++i) {
    auto name = read<std::string>(is, "population name");
    const auto kind_name = read<std::string>(is, "population kind");
    if (kind_name != "lif" && kind_name != "source") parse_error("unknown population kind '" + kind_name + "'");
    const auto size = read<std::uint32_t>(is, "population size");
    LifParams q;
    q.v_rest = read_double(is, "v_rest");
    q.v_threshold = read_double(is, "v_threshold");
    q.v_reset = read_double(is, "v_reset");
    q.tau_m = read_double(is, "tau_m");
    q.r_m = read_double(is, "r_m");
    q.t_refractory = read_double(is, "t_refractory");
    q.tau_syn_exc = read_double(is, "tau_syn_exc");
    q.tau_syn_inh = read_double(is, "tau_syn_inh");
    q.i_bias = read_double(is, "i_bias");
    net.add_population(std::move(name), kind_name == "lif" ? PopulationKind::lif : PopulationKind::source, size, q);
  }

  expect(is, "projections");
  const auto n_proj = read<std::size_t>(is, "projection count");
  for (std::size_t i = 0; i < n_proj; ++i) {
    expect(is, "projection");
    Projection p;
    p.name = read<std::string>(is, "projection name");
    if (p.name == "-") p.name.clear();
    const auto src = read<std::string>(is, "source");
    const auto dst = read<std::string>(is, "target");
    const auto s_id = net.find_population(src);
    const auto d_id = net.find_population(dst);
    if (!s_id || !d_id) parse_error("projection references unknown population");
    p.source = *s_id;
    p.target = *d_id;
    const auto kind = read<std::string>(is, "projection kind");
    if (kind != "current" && kind != "teaching") parse_error("unknown projection kind '" + kind + "'");
    p.kind = kind == "teaching" ? ProjectionKind::teaching : ProjectionKind::current;
    const auto n_syn = read<std::size_t>(is, "synapse count");
    p.synapses.resize(n_syn);
    for (auto& s : p.synapses) {
      s.pre = read<std::uint32_t>(is, "pre");
      s.post = read<std::uint32_t>(is, "post");
      s.weight = read_double(is, "weight");
      s.delay = read<std::uint32_t>(is, "delay");
      const auto sign = read<char>(is, "sign");
      if (sign != 'e' && sign != 'i') parse_error("bad synapse sign");
      s.sign = sign == 'e' ? SynapseSign::excitatory : SynapseSign::inhibitory;
      const auto plastic = read<int>(is, "plastic flag");
      if (plastic != 0 && plastic != 1) parse_error("bad plastic flag");
      s.plastic = plastic == 1;
    }
    net.add_projection(std::move(p));
  }
  expect(is, "end");
  net.validate();
  return net;
}

std::string network_to_string(const Network& net) {
  std::ostringstream os;
  write_network(os, net);
  return os.str();
}

Network network_from_string(const std::string& text) {
  std::istringstream is(text);
  return read_network(is);
}

void save_network(const std::string& path, const Network& net) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_network(os, net);
}

Network load_network(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_network(is);
}

}  // namespace cerebloop
