// Hyperparameter scaling and training loops.
//
// A run is specified by width-independent reference values (learning rates,
// init scale, step count — all quoted at a reference width d*) plus a
// Scaling; this module evaluates the width-d hyperparameters and runs
// gradient descent or RMSProp on the hat weights, recording losses and
// scheduled probe observables.
#pragma once

#include "widthlab/dataset.hpp"
#include "widthlab/net.hpp"
#include "widthlab/scaling.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace widthlab {

struct ReferenceConfig {
  int d_star = 128;      // reference width the starred values are quoted at
  int input_dim = 20;    // d0 of the nets this config will train
  double eta_star_a = 0.02;
  double eta_star_v = 0.02;  // applied to every hidden-to-hidden layer
  double eta_star_w = 0.02;
  // Product init scale at d*; unset derives the 1/sqrt(fan-in) default
  // sigma*^{H+1} = (d*)^{-(H+1)/2} * d0^{-1/2}.
  std::optional<double> sigma_star;
  double beta = 0.99;    // RMSProp decay
  // RMSProp denominator guard (inside the sqrt).  Kept far below any real
  // squared-gradient scale: sqrt(eps) floors the RMS, and a floor near the
  // hat-gradient magnitude would damp updates at large width where those
  // gradients are tiny, distorting the very scaling behavior under study.
  double eps = 1e-30;
  int steps = 50;
  int batch_size = 0;    // 0 = full batch
};

// Reference values matching each optimizer's default regime.
ReferenceConfig reference_defaults(Optimizer opt);

// Per-group init scales at the reference width: sigma_w* = d0^{-1/2},
// sigma_v* = (d*)^{-1/2}, and sigma_a* absorbing the rest of the product
// sigma*^{H+1} = sigma_a* * prod_h sigma_v* * sigma_w*.
struct GroupScales {
  double sigma_a = 0.0;
  double sigma_v = 0.0;  // same for every hidden-to-hidden layer
  double sigma_w = 0.0;
};
GroupScales reference_group_scales(const ReferenceConfig& ref, int depth_H);

// Resolved sigma* (explicit value or the fan-in default).
double sigma_star_of(const ReferenceConfig& ref, int depth_H);

struct ScaledHyperparams {
  double sigma = 0.0;             // product scale at width d
  double eta_hat_a = 0.0;
  std::vector<double> eta_hat_v;  // one per hidden-to-hidden layer
  double eta_hat_w = 0.0;
};

// SM-recipe evaluation: sigma(d) = sigma* (d/d*)^{q_sigma} and
// eta_hat_theta(d) = eta_hat_theta* (d/d*)^{qt_theta}, where the reference
// effective rates come from the raw reference rates via eta_hat = eta /
// sigma_theta*^2 (gradient descent) or eta_hat = eta / sigma_theta*
// (RMSProp). At d = d* the reference values are returned exactly.
ScaledHyperparams scale_hyperparams(const ReferenceConfig& ref, const Scaling& s, int d);

// One plain gradient-descent step on the hat weights.
void gd_step(NetState& net, const WeightSet& grads, const ScaledHyperparams& hp);

// One RMSProp step: accum <- beta * accum + g * g (unnormalized sum, no bias
// correction), then theta <- theta - eta_hat * g / sqrt(accum + eps).
void rmsprop_step(NetState& net, const WeightSet& grads, WeightSet& accum, const ScaledHyperparams& hp,
                  double beta, double eps);

struct ProbeSchedule {
  std::vector<int> at_steps;            // steps to probe; 0 = before any update
  bool decomposition_variances = false;
  bool increment_norms = false;
  const Dataset* eval_points = nullptr;  // defaults to the test set
};

struct StepMetrics {
  int step = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
};

struct DecompVarianceRow {
  int step = 0;
  std::string term;
  double variance = 0.0;
};

struct IncrementNormRow {
  int step = 0;
  std::string group;
  double avg_norm = 0.0;
};

struct TrainRecord {
  std::vector<StepMetrics> metrics;  // one entry per step 0..steps (or halt)
  std::vector<DecompVarianceRow> decomposition_rows;
  std::vector<IncrementNormRow> increment_rows;
  bool diverged = false;
  int halt_step = -1;               // step whose update went non-finite
  // Output statistics over the probe eval points at the last completed step.
  double final_mean_abs_f = 0.0;
  double final_var_f = 0.0;
};

// Runs ref.steps optimizer steps of s.optimizer on net (mutated in place),
// evaluating train/test metrics every step and probes on schedule. Halts
// early (flagging diverged) when the loss or weights go non-finite.
TrainRecord train(NetState& net, const Dataset& ds_train, const Dataset& ds_test, const ReferenceConfig& ref,
                  const Scaling& s, const ProbeSchedule& probes = {}, LossKind kind = LossKind::BinaryCrossEntropy,
                  std::uint64_t batch_seed = 0);

}  // namespace widthlab
