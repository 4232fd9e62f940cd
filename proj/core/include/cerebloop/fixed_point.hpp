#pragma once

#include <cstdint>
#include <string>

namespace cerebloop {

/// Signed fixed-point layout: one sign bit, `int_bits` integer bits and
/// `frac_bits` fraction bits, stored in a 32-bit word. The default 16.15
/// split is the SpiNNaker `accum` layout.
struct FixedFormat {
  int int_bits = 16;
  int frac_bits = 15;

  void validate() const;
  double resolution() const;
  double max_value() const;
  double min_value() const;

  friend bool operator==(const FixedFormat&, const FixedFormat&) = default;
};

/// Double precision arithmetic policy. Mirrors the FixedArith interface so
/// the engine core can be written once against either.
class FloatArith {
public:
  using value_type = double;

  value_type from_double(double x) { return x; }
  static double to_double(value_type x) { return x; }

  static value_type zero() { return 0.0; }
  static value_type add(value_type a, value_type b) { return a + b; }
  static value_type sub(value_type a, value_type b) { return a - b; }
  static value_type mul(value_type a, value_type b) { return a * b; }

  std::uint64_t saturations() const { return 0; }
};

/// Saturating, round-to-nearest fixed-point arithmetic on raw 32-bit words.
/// Every saturation is counted instead of being treated as fatal.
class FixedArith {
public:
  using value_type = std::int32_t;

  explicit FixedArith(FixedFormat format = {});

  const FixedFormat& format() const { return format_; }

  value_type from_double(double x);
  double to_double(value_type raw) const;

  static value_type zero() { return 0; }
  value_type add(value_type a, value_type b) { return saturate(std::int64_t{a} + b); }
  value_type sub(value_type a, value_type b) { return saturate(std::int64_t{a} - b); }
  value_type mul(value_type a, value_type b);

  std::uint64_t saturations() const { return saturations_; }

private:
  value_type saturate(std::int64_t raw);

  FixedFormat format_;
  std::int64_t max_raw_;
  std::int64_t min_raw_;
  std::int64_t half_;
  std::uint64_t saturations_ = 0;
};

enum class NumericKind { float64, fixed };

struct NumericMode {
  NumericKind kind = NumericKind::float64;
  FixedFormat fixed;

  static NumericMode float64() { return {}; }
  static NumericMode fixed_point(FixedFormat f = {}) { return {NumericKind::fixed, f}; }
};

std::string to_string(NumericKind kind);
NumericKind numeric_kind_from_string(const std::string& name);

}  // namespace cerebloop
