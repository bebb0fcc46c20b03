// Discrete-time mean-field machinery for single-hidden-layer networks: the
// hidden units as a particle measure, the measure-level gradient-descent
// transition, exact Wasserstein-2 distances between equal-size measures, and
// the kernel-driven limit dynamics of the output function.
#pragma once

#include "widthlab/dataset.hpp"
#include "widthlab/net.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace widthlab {

// Uniform-mass empirical measure over hidden units: atom r is the pair
// (a_r, w_r) in R^{1+d0}.
struct ParticleMeasure {
  Eigen::VectorXd a;  // d
  Eigen::MatrixXd w;  // d x d0

  int size() const { return static_cast<int>(a.size()); }
  int input_dim() const { return static_cast<int>(w.cols()); }
  bool all_finite() const { return a.allFinite() && w.allFinite(); }
};

// Current weights of a depth_H == 0 network as a particle measure.
// Deeper networks are rejected: no per-unit measure represents them.
ParticleMeasure measure_of(const NetState& net);

// Measure-level prediction f[mu; x] = sigma_star * mean_r a_r phi(w_r . x).
double mf_predict(const ParticleMeasure& mu, const Eigen::VectorXd& x, double sigma_star, double alpha);
Eigen::VectorXd mf_predict_batch(const ParticleMeasure& mu, const Eigen::MatrixXd& X, double sigma_star,
                                 double alpha);

// One full-batch gradient-descent step at the measure level:
//   da_r = -eta_star * sigma_star * mean_i[ dloss_i * phi(w_r . x_i) ]
//   dw_r = -eta_star * sigma_star * mean_i[ dloss_i * a_r * phi'(w_r . x_i) * x_i ]
// with dloss_i evaluated at f[mu; x_i]. Matches the trainer's GD step on a
// width-d net when eta_hat = eta_star * d and sigma = sigma_star / d.
// Requires sigma_star > 0 and eta_star >= 0 (zero rate is the identity).
ParticleMeasure transition_step(const ParticleMeasure& mu, double eta_star, double sigma_star,
                                const Dataset& ds, LossKind kind, double alpha);

// Exact Wasserstein-2 distance between equal-size measures (atom count
// <= 4096): optimal assignment on squared atom distances, then
// sqrt(mean matched squared distance). Unequal sizes are rejected; compare
// across widths by subsampling the larger measure first.
double wasserstein2(const ParticleMeasure& mu_a, const ParticleMeasure& mu_b);

// `count` atoms drawn without replacement (deterministic in seed). Used to
// compare a fine reference measure against a coarser one.
ParticleMeasure subsample_atoms(const ParticleMeasure& mu, int count, std::uint64_t seed);

// Discrete kernel gradient-descent dynamics of the output function:
//   f_{k+1}(c) = f_k(c) - mean_train_i[ dloss(y_i, f_k(i)) * gram(i, c) ]
// where gram has one row per train point and one column per tracked point
// (train points first, then query points). The train block of gram must be
// symmetric and positive semidefinite up to 1e-9 of its trace. Returns the
// full trajectory: row k holds f_k, for k = 0..steps.
Eigen::MatrixXd kernel_dynamics(const Eigen::VectorXd& init_f, const Eigen::MatrixXd& gram,
                                const Eigen::VectorXd& labels, LossKind kind, int steps);

}  // namespace widthlab
