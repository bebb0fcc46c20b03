#include "widthlab/rational.hpp"

#include <cctype>
#include <charconv>
#include <cstdint>

namespace widthlab {

namespace {

// Parses a decimal integer (optionally signed) from [begin, end).
std::optional<long long> parse_ll(const char* begin, const char* end) {
  if (begin == end) return std::nullopt;
  long long value = 0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

}  // namespace

std::optional<Rat> parse_rational(std::string_view text) {
  // Trim surrounding whitespace.
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.size() >= 2 && text.front() == '+') text.remove_prefix(1);  // from_chars rejects '+'
  if (text.empty()) return std::nullopt;

  const char* b = text.data();
  const char* e = text.data() + text.size();

  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    auto num = parse_ll(b, b + slash);
    auto den = parse_ll(b + slash + 1, e);
    if (!num || !den || *den == 0) return std::nullopt;
    return Rat(*num, *den);
  }

  if (auto dot = text.find('.'); dot != std::string_view::npos) {
    std::string_view frac = text.substr(dot + 1);
    if (frac.empty() || frac.size() > 18) return std::nullopt;
    for (char c : frac) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    }
    // Integer part may be empty or just a sign (".5", "-.75").
    std::string_view head = text.substr(0, dot);
    bool negative = false;
    if (!head.empty() && (head.front() == '+' || head.front() == '-')) {
      negative = head.front() == '-';
      head.remove_prefix(1);
    }
    long long int_part = 0;
    if (!head.empty()) {
      auto parsed = parse_ll(head.data(), head.data() + head.size());
      if (!parsed || *parsed < 0) return std::nullopt;
      int_part = *parsed;
    }
    long long frac_part = 0;
    long long scale = 1;
    for (char c : frac) {
      frac_part = frac_part * 10 + (c - '0');
      scale *= 10;
    }
    Rat magnitude = Rat(int_part) + Rat(frac_part, scale);
    return negative ? -magnitude : magnitude;
  }

  auto num = parse_ll(b, e);
  if (!num) return std::nullopt;
  return Rat(*num);
}

std::string to_string(const Rat& value) {
  std::string out = std::to_string(value.numerator());
  if (value.denominator() != 1) {
    out += '/';
    out += std::to_string(value.denominator());
  }
  return out;
}

}  // namespace widthlab
