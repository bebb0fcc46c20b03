#include "widthlab/powerlaw.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace widthlab {

FitOutcome fit_loglog(const std::vector<std::pair<double, double>>& points) {
  FitOutcome out;
  std::vector<std::pair<double, double>> logs;  // (log2 width, log2 value)
  logs.reserve(points.size());
  std::set<double> distinct_widths;
  for (const auto& [width, value] : points) {
    if (!(width > 0.0) || !std::isfinite(width)) {
      throw std::invalid_argument("fit_loglog: widths must be positive and finite");
    }
    if (!(value > 0.0) || !std::isfinite(value)) {
      ++out.n_dropped;
      continue;
    }
    logs.emplace_back(std::log2(width), std::log2(value));
    distinct_widths.insert(width);
  }
  if (logs.size() < 3 || distinct_widths.size() < 3) {
    return out;  // refused; n_dropped already counted
  }

  const double n = static_cast<double>(logs.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (const auto& [x, y] : logs) {
    mean_x += x;
    mean_y += y;
  }
  mean_x /= n;
  mean_y /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : logs) {
    sxx += (x - mean_x) * (x - mean_x);
    sxy += (x - mean_x) * (y - mean_y);
    syy += (y - mean_y) * (y - mean_y);
  }

  PowerLawFit fit;
  fit.n_points = static_cast<int>(logs.size());
  fit.slope = sxy / sxx;
  fit.intercept = mean_y - fit.slope * mean_x;
  const double ss_res = std::max(0.0, syy - fit.slope * sxy);
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  fit.stderr_slope = n > 2.0 ? std::sqrt(ss_res / (n - 2.0) / sxx) : 0.0;
  out.fit = fit;
  return out;
}

PowerLawFit halve_slope(PowerLawFit fit) {
  fit.slope *= 0.5;
  fit.intercept *= 0.5;
  fit.stderr_slope *= 0.5;
  return fit;
}

std::optional<SeedAggregate> aggregate_seeds(
    const std::vector<std::vector<std::pair<double, double>>>& per_seed_points) {
  if (per_seed_points.size() < 2) {
    throw std::invalid_argument("aggregate_seeds: need at least two seeds");
  }
  SeedAggregate agg;
  for (const auto& points : per_seed_points) {
    const FitOutcome outcome = fit_loglog(points);
    if (outcome.refused()) {
      ++agg.n_refused_seeds;
      continue;
    }
    agg.slopes.push_back(outcome.fit->slope);
  }
  if (agg.slopes.size() < 2) {
    return std::nullopt;
  }
  const double n = static_cast<double>(agg.slopes.size());
  for (double s : agg.slopes) agg.mean_slope += s;
  agg.mean_slope /= n;
  double ss = 0.0;
  for (double s : agg.slopes) ss += (s - agg.mean_slope) * (s - agg.mean_slope);
  agg.std_slope = std::sqrt(ss / (n - 1.0));
  return agg;
}

std::string to_string(Verdict v) { return v == Verdict::Match ? "Match" : "Mismatch"; }

Verdict compare_to_theory(const PowerLawFit& fit, const Rat& predicted, double tol) {
  if (!(tol > 0.0)) {
    throw std::invalid_argument("compare_to_theory: tolerance must be positive");
  }
  return std::abs(fit.slope - to_double(predicted)) <= tol ? Verdict::Match : Verdict::Mismatch;
}

}  // namespace widthlab
