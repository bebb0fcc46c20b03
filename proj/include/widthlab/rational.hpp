// Exact rational arithmetic for width exponents.
//
// Every exponent in the scaling calculus is a rational number, and the
// classification rules compare exponents for exact equality with zero.
// Floating point would turn those comparisons into tolerance games, so the
// symbolic layer works in boost::rational and converts to double only at the
// numerical boundary (hyperparameter evaluation, plotting, fits).
#pragma once

#include <boost/rational.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace widthlab {

using Rat = boost::rational<long long>;

// Convenience constructor: rat(-3, 4) == -3/4.
inline Rat rat(long long num, long long den = 1) { return Rat(num, den); }

// Parses "p/q", "p", or a finite decimal such as "-0.75" into an exact
// rational. Returns nullopt on malformed input (empty string, zero
// denominator, stray characters, overflow).
std::optional<Rat> parse_rational(std::string_view text);

// Formats as "p" when the denominator is 1, otherwise "p/q" in lowest terms.
std::string to_string(const Rat& value);

inline double to_double(const Rat& value) {
  return boost::rational_cast<double>(value);
}

}  // namespace widthlab
