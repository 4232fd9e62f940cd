#include <cmath>
#include <cstdint>
#include <random>

#include <gtest/gtest.h>

#include "cerebloop/fixed_point.hpp"

using namespace cerebloop;

TEST(FixedFormat, DefaultIsSixteenFifteen) {
  FixedFormat f;
  EXPECT_EQ(f.int_bits, 16);
  EXPECT_EQ(f.frac_bits, 15);
  EXPECT_DOUBLE_EQ(f.resolution(), 1.0 / 32768.0);
  EXPECT_DOUBLE_EQ(f.max_value(), 65536.0 - 1.0 / 32768.0);
  EXPECT_DOUBLE_EQ(f.min_value(), -65536.0);
}

TEST(FixedFormat, RejectsOversizedLayouts) {
  EXPECT_THROW((FixedFormat{20, 15}.validate()), std::invalid_argument);
  EXPECT_THROW((FixedFormat{0, 15}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((FixedFormat{8, 23}.validate()));
}

TEST(FixedArith, RoundsToNearest) {
  FixedArith a;
  const double lsb = a.format().resolution();
  EXPECT_EQ(a.from_double(0.4 * lsb), 0);
  EXPECT_EQ(a.from_double(0.6 * lsb), 1);
  EXPECT_EQ(a.from_double(-0.6 * lsb), -1);
  EXPECT_EQ(a.from_double(3.0), 3 * 32768);
  EXPECT_DOUBLE_EQ(a.to_double(a.from_double(-70.0)), -70.0);
}

TEST(FixedArith, SaturatesAndCounts) {
  FixedArith a;
  EXPECT_EQ(a.saturations(), 0u);
  const auto big = a.from_double(1e9);
  EXPECT_EQ(a.saturations(), 1u);
  EXPECT_DOUBLE_EQ(a.to_double(big), a.format().max_value());
  const auto sum = a.add(big, a.from_double(1.0));
  EXPECT_EQ(sum, big);
  EXPECT_EQ(a.saturations(), 2u);
  const auto neg = a.sub(a.from_double(-65000.0), a.from_double(1000.0));
  EXPECT_DOUBLE_EQ(a.to_double(neg), a.format().min_value());
  EXPECT_EQ(a.saturations(), 3u);
}

TEST(FixedArith, NanIsRejected) {
  FixedArith a;
  EXPECT_THROW(a.from_double(std::nan("")), std::domain_error);
}

TEST(FixedArith, MultiplicationMatchesRoundedProduct) {
  FixedArith a;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-150.0, 150.0);
  for (int i = 0; i < 10000; ++i) {
    const auto x = a.from_double(u(rng));
    const auto y = a.from_double(u(rng) / 100.0);
    // Exact product of the raw words, rounded half up to the grid.
    const double exact = static_cast<double>(std::int64_t{x} * std::int64_t{y}) / 32768.0;
    const auto expected = static_cast<std::int32_t>(std::floor(exact + 0.5));
    ASSERT_EQ(a.mul(x, y), expected);
  }
  EXPECT_EQ(a.saturations(), 0u);
}

TEST(NumericKind, ParsesNames) {
  EXPECT_EQ(numeric_kind_from_string("float"), NumericKind::float64);
  EXPECT_EQ(numeric_kind_from_string("fixed"), NumericKind::fixed);
  EXPECT_EQ(to_string(NumericKind::fixed), "fixed");
  EXPECT_THROW(numeric_kind_from_string("half"), std::invalid_argument);
}
