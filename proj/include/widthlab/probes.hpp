// Observables measured on a (possibly trained) network: the init/increment
// output decomposition, per-group weight-increment norms, and the tangent
// kernel at finite width plus its Monte-Carlo infinite-width limit.
#pragma once

#include "widthlab/net.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace widthlab {

// ---------------------------------------------------------------------------
// Output decomposition.
//
// Writing each weight group as init + increment and keeping every activation
// gate phi' at the *current* weights makes the output multilinear in the
// substituted group factors, so it splits exactly into one term per subset of
// moved groups: 4 terms for H = 0, 2^{H+2} for H >= 1.
//
// Term names: "empty" for the all-init term; H = 0 uses "a", "w", "aw";
// H >= 1 joins member groups with '+' ("a", "v1", "a+v1+w", ...).
// ---------------------------------------------------------------------------

struct DecompositionEntry {
  std::vector<std::pair<std::string, double>> terms;  // subset name -> value
  double f = 0.0;                                     // full output at x
  double sum_residual = 0.0;                          // |f - sum of terms|
};

// All subset terms at one input. Throws std::invalid_argument for H > 3
// (2^{H+2} > 32 terms; outside desk scale).
DecompositionEntry decomposition_terms(const NetState& net, const Eigen::VectorXd& x);

struct DecompositionReport {
  std::vector<std::pair<std::string, double>> term_variances;  // subset name -> Var_x
  double var_f = 0.0;                                          // Var_x of the full output
  double max_rel_residual = 0.0;  // max over points of |f - sum| / (1 + |f|)
};

// Unbiased variances of every subset term (and of f itself) over the rows of
// X, computed with batched gated-linear passes.
DecompositionReport decomposition_variances(const NetState& net, const Eigen::MatrixXd& X);

// ---------------------------------------------------------------------------
// Increment norms: how far each weight group has moved from initialization,
// averaged over hidden units. Groups are named "a", "v1".."vH", "w".
//   a: mean over r of |a_r - a_r^(0)|
//   w / v^h: mean over rows r of the Euclidean row norm of the increment.
// ---------------------------------------------------------------------------
std::vector<std::pair<std::string, double>> increment_norms(const NetState& net);

// Unbiased sample variance of a value set (n >= 2).
double data_variance(const std::vector<double>& values);

// ---------------------------------------------------------------------------
// Tangent kernel (H = 0 only).
//
//   kernel(x, x') = eta_hat * sigma^2 * sum_r [ phi(w_r.x) phi(w_r.x')
//                    + phi'(w_r.x) phi'(w_r.x') a_r^2 (x.x') ]
// at the network's current weights. As d grows (with eta_hat sigma^2 d held
// fixed) this concentrates to a deterministic limit kernel, estimated below
// by Monte Carlo over standard-normal (a, w) draws.
// ---------------------------------------------------------------------------

double ntk_kernel(const NetState& net, const Eigen::VectorXd& x, const Eigen::VectorXd& x2, double eta_hat);

struct McEstimate {
  double estimate = 0.0;
  double stderr_of_mean = 0.0;
};

// Limit-kernel entry for one pair. eta_hat_sigma2 is the width-stable
// combination eta_hat * sigma^2 * d. Deterministic given seed.
McEstimate ntk_limit_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& x2, double eta_hat_sigma2,
                            double alpha, int n_mc, std::uint64_t seed);

// Limit-kernel Gram matrix over the rows of `points`, sharing one stream of
// Monte-Carlo draws across all entries (blocked GEMM accumulation, identical
// estimator to ntk_limit_kernel per entry up to summation order).
Eigen::MatrixXd ntk_limit_gram(const Eigen::MatrixXd& points, double eta_hat_sigma2, double alpha, int n_mc,
                               std::uint64_t seed);

}  // namespace widthlab
