// Power-law exponent estimation for width sweeps: ordinary least squares in
// log2-log2 space, per-seed aggregation, and comparison against predicted
// rational exponents.
#pragma once

#include "widthlab/rational.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace widthlab {

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;     // log2(value) at log2(d) = 0
  double stderr_slope = 0.0;  // residual-based OLS standard error
  int n_points = 0;
  double r_squared = 0.0;
};

// fit_loglog drops nonpositive values (a vanished observable underflows to 0
// or noise below it) instead of failing on log(0); if fewer than 3 usable
// points — or fewer than 3 distinct widths — remain, the fit is refused and
// only the drop count is reported.
struct FitOutcome {
  std::optional<PowerLawFit> fit;
  int n_dropped = 0;

  bool refused() const { return !fit.has_value(); }
};

// OLS of log2(value) on log2(width) over (width, value) points. Widths must
// be positive; duplicate widths are allowed (e.g. several seeds fit jointly).
FitOutcome fit_loglog(const std::vector<std::pair<double, double>>& points);

// Variance observables scale with twice the exponent of the quantity itself,
// so their fitted slopes are halved before comparison. Halving in log2 space
// rescales slope, intercept, and stderr alike (fit of the sqrt-series).
PowerLawFit halve_slope(PowerLawFit fit);

// Per-seed fits, then mean and across-seed sample standard deviation of the
// slopes. Seeds whose fit is refused are skipped and counted; returns nullopt
// if fewer than 2 seeds survive.
struct SeedAggregate {
  std::vector<double> slopes;  // one per surviving seed, input order
  double mean_slope = 0.0;
  double std_slope = 0.0;
  int n_refused_seeds = 0;
};
std::optional<SeedAggregate> aggregate_seeds(
    const std::vector<std::vector<std::pair<double, double>>>& per_seed_points);

enum class Verdict { Match, Mismatch };
std::string to_string(Verdict v);

// Match iff |slope - predicted| <= tol (tol > 0 required).
Verdict compare_to_theory(const PowerLawFit& fit, const Rat& predicted, double tol);

}  // namespace widthlab
