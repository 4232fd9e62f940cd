#pragma once

#include <iosfwd>
#include <string>

#include "cerebloop/network.hpp"

namespace cerebloop {

/// Versioned plain-text network format.
///
///   cerebloop-network 1
///   kernel <t_peak> <sigma> <a_ltd> <a_ltp> <bin> <window> <w_min> <w_max> | kernel none
///   populations <n>
///   <name> lif|source <size> <v_rest> <v_th> <v_reset> <tau_m> <r_m> <t_ref> <tau_exc> <tau_inh> <i_bias>
///   projections <n>
///   projection <name> <source> <target> current|teaching <n_synapses>
///   <pre> <post> <weight> <delay> e|i 0|1
///   end
///
/// Doubles are written with 17 significant digits so a round trip is exact.
inline constexpr int kNetworkFormatVersion = 1;

void write_network(std::ostream& os, const Network& net);
Network read_network(std::istream& is);

std::string network_to_string(const Network& net);
Network network_from_string(const std::string& text);

void save_network(const std::string& path, const Network& net);
Network load_network(const std::string& path);

}  // namespace cerebloop
