#include "cerebloop/fixed_point.hpp"

#include <cmath>
#include <stdexcept>

namespace cerebloop {

void FixedFormat::validate() const {
  if (int_bits < 1 || frac_bits < 1 || int_bits + frac_bits > 31) {
    throw std::invalid_argument("fixed-point format needs int_bits >= 1, frac_bits >= 1 and at most 31 magnitude bits, got " +
                                std::to_string(int_bits) + "." + std::to_string(frac_bits));
  }
}

double FixedFormat::resolution() const { return std::ldexp(1.0, -frac_bits); }

double FixedFormat::max_value() const {
  return std::ldexp(static_cast<double>((std::int64_t{1} << (int_bits + frac_bits)) - 1), -frac_bits);
}

double FixedFormat::min_value() const { return -std::ldexp(1.0, int_bits); }

FixedArith::FixedArith(FixedFormat format) : format_(format) {
  format_.validate();
  max_raw_ = (std::int64_t{1} << (format_.int_bits + format_.frac_bits)) - 1;
  min_raw_ = -(std::int64_t{1} << (format_.int_bits + format_.frac_bits));
  half_ = std::int64_t{1} << (format_.frac_bits - 1);
}

FixedArith::value_type FixedArith::saturate(std::int64_t raw) {
  if (raw > max_raw_) {
    ++saturations_;
    return static_cast<value_type>(max_raw_);
  }
  if (raw < min_raw_) {
    ++saturations_;
    return static_cast<value_type>(min_raw_);
  }
  return static_cast<value_type>(raw);
}

FixedArith::value_type FixedArith::from_double(double x) {
  if (std::isnan(x)) {
    throw std::domain_error("cannot represent NaN in fixed point");
  }
  const double scaled = std::nearbyint(std::ldexp(x, format_.frac_bits));
  if (scaled > static_cast<double>(max_raw_)) return saturate(max_raw_ + 1);
  if (scaled < static_cast<double>(min_raw_)) return saturate(min_raw_ - 1);
  return static_cast<value_type>(scaled);
}

double FixedArith::to_double(value_type raw) const { return std::ldexp(static_cast<double>(raw), -format_.frac_bits); }

FixedArith::value_type FixedArith::mul(value_type a, value_type b) {
  // Round half up; the arithmetic shift floors, so adding half first rounds.
  const std::int64_t product = std::int64_t{a} * std::int64_t{b};
  return saturate((product + half_) >> format_.frac_bits);
}

std::string to_string(NumericKind kind) { return kind == NumericKind::fixed ? "fixed" : "float"; }

NumericKind numeric_kind_from_string(const std::string& name) {
  if (name == "float" || name == "float64") return NumericKind::float64;
  if (name == "fixed") return NumericKind::fixed;
  throw std::invalid_argument("unknown numeric mode '" + name + "' (expected float|fixed)");
}

}  // namespace cerebloop
