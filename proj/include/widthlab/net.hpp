// Width-parameterized leaky-ReLU multilayer perceptrons in the hat (unit-
// scale) parameterization, with exact batched forward and reverse-mode
// gradient computation.
//
// Model: f(x) = sigma^{H+1} * sum_r hat_a_r * phi(z^H_r(x)), where
// z^0 = hat_w x, z^{h} = hat_v^{h} phi(z^{h-1}), phi(z) = max(z,0) - alpha *
// max(-z,0), no biases, and phi'(0) := 1. All hat weights start i.i.d. with
// unit variance, so width enters only through the dimensions and the sigma
// prefactor — which is exactly what the scaling calculus assumes.
#pragma once

#include "widthlab/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace widthlab {

enum class InitDist { StdNormal, SymmetricUniform };
enum class LossKind { BinaryCrossEntropy };

// One value per hat weight: reused for weights, gradients, increments, and
// optimizer accumulators, which all share the network's shape.
struct WeightSet {
  Eigen::VectorXd a;                // d
  std::vector<Eigen::MatrixXd> v;   // depth_H matrices, each d x d
  Eigen::MatrixXd w;                // d x d0

  static WeightSet zeros(int depth_H, int d, int d0);
  bool all_finite() const;
};

class NetState {
 public:
  NetState(int depth_H, int d, int d0, double alpha, double sigma, WeightSet weights);

  int depth_H() const { return depth_H_; }
  int width_d() const { return width_d_; }
  int d0() const { return d0_; }
  double alpha() const { return alpha_; }
  // The geometric-mean scale sigma; the output carries sigma^{H+1}.
  double sigma_product() const { return sigma_; }
  double output_scale() const;  // sigma^{H+1}

  WeightSet& weights() { return weights_; }
  const WeightSet& weights() const { return weights_; }
  // Frozen copy of the weights at construction (step 0).
  const WeightSet& init_snapshot() const { return init_; }

 private:
  int depth_H_;
  int width_d_;
  int d0_;
  double alpha_;
  double sigma_;
  WeightSet weights_;
  WeightSet init_;
};

// Fresh network with i.i.d. unit-variance hat weights from dist.
NetState init_network(int depth_H, int d, int d0, double alpha, double sigma, std::uint64_t seed,
                      InitDist dist = InitDist::StdNormal);

// phi and phi' applied elementwise (phi'(0) = 1).
double leaky_relu(double z, double alpha);
double leaky_relu_grad(double z, double alpha);

struct ForwardResult {
  double f = 0.0;
  std::vector<Eigen::VectorXd> preacts;  // preacts[h] = z^h, h = 0..depth_H
};
ForwardResult forward(const NetState& net, const Eigen::VectorXd& x);

struct BatchForwardResult {
  Eigen::VectorXd f;                     // one output per row of X
  std::vector<Eigen::MatrixXd> preacts;  // preacts[h] is n x d
};
BatchForwardResult forward_batch(const NetState& net, const Eigen::MatrixXd& X);

// Binary cross-entropy on the logit z with label y in {0, 1}, overflow-safe.
double loss(LossKind kind, double y, double z);
double dloss(LossKind kind, double y, double z);

// Exact reverse-mode gradients of mean_{i in batch} loss(y_i, f(x_i)) with
// respect to every hat weight (the sigma^{H+1} factor is included).
WeightSet gradients(const NetState& net, const Dataset& ds, const std::vector<int>& batch, LossKind kind);

// Mean loss and accuracy (threshold at logit 0) over a whole dataset.
struct EvalResult {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};
EvalResult evaluate(const NetState& net, const Dataset& ds, LossKind kind);

// JSON checkpoint: dims, alpha, sigma, weights, and the init snapshot.
void save_checkpoint(const NetState& net, std::ostream& out);
NetState load_checkpoint(std::istream& in);

}  // namespace widthlab
