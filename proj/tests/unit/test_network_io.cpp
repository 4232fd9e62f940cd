#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "cerebloop/cerebellum.hpp"
#include "cerebloop/network_io.hpp"
#include "random_network.hpp"

using namespace cerebloop;

namespace {

void expect_same(const Network& a, const Network& b) {
  ASSERT_EQ(a.populations().size(), b.populations().size());
  for (std::size_t i = 0; i < a.populations().size(); ++i) {
    const auto& p = a.populations()[i];
    const auto& q = b.populations()[i];
    EXPECT_EQ(p.name, q.name);
    EXPECT_EQ(p.kind, q.kind);
    EXPECT_EQ(p.size, q.size);
    EXPECT_EQ(p.first, q.first);
    EXPECT_EQ(p.params, q.params);
  }
  ASSERT_EQ(a.projections().size(), b.projections().size());
  for (std::size_t i = 0; i < a.projections().size(); ++i) {
    const auto& p = a.projections()[i];
    const auto& q = b.projections()[i];
    EXPECT_EQ(p.name, q.name);
    EXPECT_EQ(p.source, q.source);
    EXPECT_EQ(p.target, q.target);
    EXPECT_EQ(p.kind, q.kind);
    EXPECT_EQ(p.synapses, q.synapses);
  }
  EXPECT_EQ(a.plasticity(), b.plasticity());
}

}  // namespace

TEST(NetworkIo, CerebellumRoundTripIsExact) {
  const auto net = build_network(CerebellumConfig::standard()).network;
  const auto text = network_to_string(net);
  const auto back = network_from_string(text);
  expect_same(net, back);
  EXPECT_EQ(network_to_string(back), text);
  EXPECT_EQ(text.rfind("cerebloop-network 1\n", 0), 0u);
}

TEST(NetworkIo, RandomNetworksWithoutKernelRoundTrip) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto rc = test_support::random_case(seed, 1.0);
    expect_same(rc.network, network_from_string(network_to_string(rc.network)));
    EXPECT_FALSE(network_from_string(network_to_string(rc.network)).plasticity());
  }
}

TEST(NetworkIo, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "cerebloop_net_test.txt";
  const auto net = build_network(CerebellumConfig::standard()).network;
  save_network(path.string(), net);
  expect_same(net, load_network(path.string()));
  std::filesystem::remove(path);
  EXPECT_THROW(load_network(path.string()), std::runtime_error);
}

TEST(NetworkIo, MalformedInputIsRejected) {
  const auto good = network_to_string(test_support::random_case(1, 1.0).network);
  auto replace = [&](const std::string& from, const std::string& to) {
    auto s = good;
    const auto pos = s.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    return s.replace(pos, from.size(), to);
  };
  EXPECT_THROW(network_from_string(""), std::runtime_error);
  EXPECT_THROW(network_from_string(replace("cerebloop-network 1", "cerebloop-network 9")), std::runtime_error);
  EXPECT_THROW(network_from_string(replace("cerebloop-network", "other-format")), std::runtime_error);
  EXPECT_THROW(network_from_string(replace(" lif ", " fancy ")), std::runtime_error);
  EXPECT_THROW(network_from_string(good.substr(0, good.size() / 2)), std::runtime_error);
  EXPECT_THROW(network_from_string(replace("\nend", "\n")), std::runtime_error);
}
