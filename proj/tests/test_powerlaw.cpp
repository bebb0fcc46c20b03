#include "doctest.h"

#include "widthlab/powerlaw.hpp"

#include <cmath>
#include <random>
#include <utility>
#include <vector>

using namespace widthlab;

namespace {

using Points = std::vector<std::pair<double, double>>;

Points exact_power(double amplitude, double exponent, const std::vector<double>& widths) {
  Points pts;
  for (double d : widths) pts.emplace_back(d, amplitude * std::pow(d, exponent));
  return pts;
}

const std::vector<double> kWidths = {8, 16, 32, 64, 128, 256};

}  // namespace

TEST_CASE("a pure power law fits with the exact slope and r^2 = 1") {
  // value = 5 * d^{-1} over d = 2^3..2^8.
  const FitOutcome out = fit_loglog(exact_power(5.0, -1.0, kWidths));
  REQUIRE(!out.refused());
  CHECK(out.fit->slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(out.fit->intercept == doctest::Approx(std::log2(5.0)).epsilon(1e-12));
  CHECK(out.fit->stderr_slope == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(out.fit->r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.fit->n_points == 6);
  CHECK(out.n_dropped == 0);
}

TEST_CASE("a constant observable fits slope zero") {
  const FitOutcome out = fit_loglog(exact_power(3.0, 0.0, kWidths));
  REQUIRE(!out.refused());
  CHECK(out.fit->slope == doctest::Approx(0.0).epsilon(1e-12));
  // A constant series has zero total variance; the zero-residual fit counts
  // as perfect.
  CHECK(out.fit->r_squared == 1.0);
}

TEST_CASE("one percent multiplicative noise moves the slope less than 0.05") {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> noise(0.0, 0.01);
  Points pts;
  for (double d : {32, 64, 128, 256, 512, 1024, 2048, 4096}) {
    pts.emplace_back(d, 2.0 * std::pow(d, -0.5) * std::exp(noise(gen)));
  }
  const FitOutcome out = fit_loglog(pts);
  REQUIRE(!out.refused());
  CHECK(std::abs(out.fit->slope - (-0.5)) < 0.05);
  CHECK(out.fit->stderr_slope < 0.02);
  CHECK(out.fit->r_squared > 0.99);
}

TEST_CASE("rescaling all values by a constant shifts only the intercept") {
  const Points base = exact_power(1.0, -0.75, kWidths);
  Points scaled = base;
  for (auto& [d, v] : scaled) v *= 8.0;
  const FitOutcome a = fit_loglog(base);
  const FitOutcome b = fit_loglog(scaled);
  REQUIRE(!a.refused());
  REQUIRE(!b.refused());
  CHECK(b.fit->slope == doctest::Approx(a.fit->slope).epsilon(1e-12));
  CHECK(b.fit->intercept == doctest::Approx(a.fit->intercept + 3.0).epsilon(1e-12));
}

TEST_CASE("duplicate widths from several seeds fit jointly") {
  Points pts = exact_power(1.0, -0.5, kWidths);
  const Points again = exact_power(2.0, -0.5, kWidths);  // second seed, different amplitude
  pts.insert(pts.end(), again.begin(), again.end());
  const FitOutcome out = fit_loglog(pts);
  REQUIRE(!out.refused());
  CHECK(out.fit->n_points == 12);
  CHECK(out.fit->slope == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("nonpositive values are dropped and counted, not fatal") {
  Points pts = exact_power(1.0, -1.0, kWidths);
  pts.emplace_back(512.0, 0.0);
  pts.emplace_back(1024.0, -3.0);
  const FitOutcome out = fit_loglog(pts);
  REQUIRE(!out.refused());
  CHECK(out.n_dropped == 2);
  CHECK(out.fit->n_points == 6);
  CHECK(out.fit->slope == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("fits are refused below three points or three distinct widths") {
  CHECK(fit_loglog({{8.0, 1.0}, {16.0, 0.5}}).refused());
  CHECK(fit_loglog({}).refused());
  // Three points but only two distinct widths.
  CHECK(fit_loglog({{8.0, 1.0}, {8.0, 1.1}, {16.0, 0.5}}).refused());
  // All points nonpositive.
  const FitOutcome all_bad = fit_loglog({{8.0, 0.0}, {16.0, -1.0}, {32.0, 0.0}, {64.0, -2.0}});
  CHECK(all_bad.refused());
  CHECK(all_bad.n_dropped == 4);
  // Exactly three usable points across three widths succeeds.
  CHECK(!fit_loglog({{8.0, 1.0}, {16.0, 0.5}, {32.0, 0.25}}).refused());
}

TEST_CASE("halving a variance fit equals fitting the square roots directly") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> noise(0.0, 0.05);
  Points var_pts;
  Points sqrt_pts;
  for (double d : kWidths) {
    const double variance = 4.0 * std::pow(d, -1.0) * std::exp(noise(gen));
    var_pts.emplace_back(d, variance);
    sqrt_pts.emplace_back(d, std::sqrt(variance));
  }
  const FitOutcome var_fit = fit_loglog(var_pts);
  const FitOutcome sqrt_fit = fit_loglog(sqrt_pts);
  REQUIRE(!var_fit.refused());
  REQUIRE(!sqrt_fit.refused());
  const PowerLawFit halved = halve_slope(*var_fit.fit);
  CHECK(halved.slope == doctest::Approx(sqrt_fit.fit->slope).epsilon(1e-12));
  CHECK(halved.intercept == doctest::Approx(sqrt_fit.fit->intercept).epsilon(1e-12));
  CHECK(halved.stderr_slope == doctest::Approx(sqrt_fit.fit->stderr_slope).epsilon(1e-12));
  CHECK(halved.r_squared == doctest::Approx(var_fit.fit->r_squared).epsilon(1e-12));
}

TEST_CASE("seed aggregation averages per-seed slopes") {
  const std::vector<Points> per_seed = {exact_power(1.0, -1.0, kWidths), exact_power(3.0, -0.5, kWidths)};
  const auto agg = aggregate_seeds(per_seed);
  REQUIRE(agg.has_value());
  REQUIRE(agg->slopes.size() == 2);
  CHECK(agg->slopes[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(agg->slopes[1] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(agg->mean_slope == doctest::Approx(-0.75).epsilon(1e-12));
  // Sample standard deviation of {-1, -1/2} is |0.5|/sqrt(2) * sqrt(2) = 0.3536...
  CHECK(agg->std_slope == doctest::Approx(0.25 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(agg->n_refused_seeds == 0);
}

TEST_CASE("refused seeds are skipped and counted; too few survivors abort") {
  const std::vector<Points> mixed = {exact_power(1.0, -1.0, kWidths),
                                     {{8.0, 0.0}, {16.0, -1.0}, {32.0, 0.0}},  // all dropped
                                     exact_power(1.0, -1.0, kWidths)};
  const auto agg = aggregate_seeds(mixed);
  REQUIRE(agg.has_value());
  CHECK(agg->slopes.size() == 2);
  CHECK(agg->n_refused_seeds == 1);

  const std::vector<Points> lonely = {exact_power(1.0, -1.0, kWidths), {{8.0, 0.0}, {16.0, 0.0}, {32.0, 0.0}}};
  CHECK(!aggregate_seeds(lonely).has_value());
}

TEST_CASE("theory comparison applies the tolerance symmetrically") {
  PowerLawFit fit;
  fit.slope = -0.45;
  CHECK(compare_to_theory(fit, rat(-1, 2), 0.15) == Verdict::Match);
  CHECK(compare_to_theory(fit, rat(-1, 2), 0.04) == Verdict::Mismatch);
  fit.slope = -0.36;
  CHECK(compare_to_theory(fit, rat(-1, 2), 0.15) == Verdict::Match);
  fit.slope = -0.66;
  CHECK(compare_to_theory(fit, rat(-1, 2), 0.15) == Verdict::Mismatch);
  CHECK_THROWS_AS(compare_to_theory(fit, rat(-1, 2), 0.0), std::invalid_argument);
  CHECK(to_string(Verdict::Match) == "Match");
  CHECK(to_string(Verdict::Mismatch) == "Mismatch");
}
