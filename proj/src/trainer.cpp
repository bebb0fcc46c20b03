#include "widthlab/trainer.hpp"

#include "widthlab/probes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace widthlab {

ReferenceConfig reference_defaults(Optimizer opt) {
  ReferenceConfig ref;
  if (opt == Optimizer::RMSProp) {
    ref.eta_star_a = 2e-4;
    ref.eta_star_v = 2e-4;
    ref.eta_star_w = 2e-4;
  }
  return ref;
}

double sigma_star_of(const ReferenceConfig& ref, int depth_H) {
  if (ref.sigma_star) return *ref.sigma_star;
  // 1/sqrt(fan-in) at the reference width for every layer:
  // sigma*^{H+1} = (d*)^{-(H+1)/2} d0^{-1/2}.
  const double product =
      std::pow(static_cast<double>(ref.d_star), -(depth_H + 1) / 2.0) / std::sqrt(static_cast<double>(ref.input_dim));
  return std::pow(product, 1.0 / (depth_H + 1));
}

GroupScales reference_group_scales(const ReferenceConfig& ref, int depth_H) {
  GroupScales gs;
  gs.sigma_w = 1.0 / std::sqrt(static_cast<double>(ref.input_dim));
  gs.sigma_v = 1.0 / std::sqrt(static_cast<double>(ref.d_star));
  const double product = std::pow(sigma_star_of(ref, depth_H), depth_H + 1);
  gs.sigma_a = product / (gs.sigma_w * std::pow(gs.sigma_v, depth_H));
  return gs;
}

ScaledHyperparams scale_hyperparams(const ReferenceConfig& ref, const Scaling& s, int d) {
  s.validate();
  if (d < 1) throw std::invalid_argument("scale_hyperparams: d must be >= 1");
  if (ref.d_star < 1 || ref.input_dim < 1) throw std::invalid_argument("scale_hyperparams: bad reference dims");

  const double ratio = static_cast<double>(d) / static_cast<double>(ref.d_star);
  const GroupScales gs = reference_group_scales(ref, s.depth_H);

  // Reference effective rates from the raw reference rates.
  const bool rms = s.optimizer == Optimizer::RMSProp;
  auto eta_hat_star = [&](double eta_star, double sigma_group) {
    return rms ? eta_star / sigma_group : eta_star / (sigma_group * sigma_group);
  };

  ScaledHyperparams hp;
  hp.sigma = sigma_star_of(ref, s.depth_H) * std::pow(ratio, to_double(s.q_sigma));
  hp.eta_hat_a = eta_hat_star(ref.eta_star_a, gs.sigma_a) * std::pow(ratio, to_double(s.qt_a));
  hp.eta_hat_w = eta_hat_star(ref.eta_star_w, gs.sigma_w) * std::pow(ratio, to_double(s.qt_w));
  hp.eta_hat_v.reserve(s.qt_v.size());
  for (const Rat& qv : s.qt_v) {
    hp.eta_hat_v.push_back(eta_hat_star(ref.eta_star_v, gs.sigma_v) * std::pow(ratio, to_double(qv)));
  }
  return hp;
}

void gd_step(NetState& net, const WeightSet& grads, const ScaledHyperparams& hp) {
  WeightSet& w = net.weights();
  w.a -= hp.eta_hat_a * grads.a;
  for (std::size_t h = 0; h < w.v.size(); ++h) w.v[h] -= hp.eta_hat_v[h] * grads.v[h];
  w.w -= hp.eta_hat_w * grads.w;
}

void rmsprop_step(NetState& net, const WeightSet& grads, WeightSet& accum, const ScaledHyperparams& hp,
                  double beta, double eps) {
  WeightSet& w = net.weights();
  accum.a = beta * accum.a + grads.a.cwiseProduct(grads.a);
  w.a.array() -= hp.eta_hat_a * grads.a.array() / (accum.a.array() + eps).sqrt();
  for (std::size_t h = 0; h < w.v.size(); ++h) {
    accum.v[h] = beta * accum.v[h] + grads.v[h].cwiseProduct(grads.v[h]);
    w.v[h].array() -= hp.eta_hat_v[h] * grads.v[h].array() / (accum.v[h].array() + eps).sqrt();
  }
  accum.w = beta * accum.w + grads.w.cwiseProduct(grads.w);
  w.w.array() -= hp.eta_hat_w * grads.w.array() / (accum.w.array() + eps).sqrt();
}

namespace {

void run_probes(const NetState& net, const Dataset& eval_points, const ProbeSchedule& probes, int step,
                TrainRecord& record) {
  if (probes.decomposition_variances) {
    DecompositionReport rep = decomposition_variances(net, eval_points.inputs);
    for (const auto& [term, variance] : rep.term_variances) {
      record.decomposition_rows.push_back({step, term, variance});
    }
    record.decomposition_rows.push_back({step, "f", rep.var_f});
  }
  if (probes.increment_norms) {
    for (const auto& [group, avg] : increment_norms(net)) {
      record.increment_rows.push_back({step, group, avg});
    }
  }
}

}  // namespace

TrainRecord train(NetState& net, const Dataset& ds_train, const Dataset& ds_test, const ReferenceConfig& ref,
                  const Scaling& s, const ProbeSchedule& probes, LossKind kind, std::uint64_t batch_seed) {
  s.validate();
  if (net.depth_H() != s.depth_H) throw std::invalid_argument("train: net depth does not match scaling depth");
  if (ds_train.d0 != net.d0() || ds_test.d0 != net.d0()) throw std::invalid_argument("train: d0 mismatch");

  const ScaledHyperparams hp = scale_hyperparams(ref, s, net.width_d());
  const Dataset& eval_points = probes.eval_points ? *probes.eval_points : ds_test;
  const int n = ds_train.n();
  const int batch_size = (ref.batch_size <= 0 || ref.batch_size >= n) ? n : ref.batch_size;
  const int batches_per_epoch = (n + batch_size - 1) / batch_size;

  TrainRecord record;
  auto scheduled = [&](int step) {
    return std::find(probes.at_steps.begin(), probes.at_steps.end(), step) != probes.at_steps.end();
  };
  auto push_metrics = [&](int step) {
    EvalResult tr = evaluate(net, ds_train, kind);
    EvalResult te = evaluate(net, ds_test, kind);
    record.metrics.push_back({step, tr.mean_loss, te.mean_loss, te.accuracy});
    return std::isfinite(tr.mean_loss) && net.weights().all_finite();
  };

  push_metrics(0);
  if (scheduled(0)) run_probes(net, eval_points, probes, 0, record);

  WeightSet accum = WeightSet::zeros(net.depth_H(), net.width_d(), net.d0());
  std::vector<std::vector<int>> epoch_batches;
  int current_epoch = -1;

  for (int k = 1; k <= ref.steps; ++k) {
    const int epoch = (k - 1) / batches_per_epoch;
    if (epoch != current_epoch) {
      epoch_batches = batch_iter(ds_train, batch_size, batch_seed, epoch);
      current_epoch = epoch;
    }
    const std::vector<int>& batch = epoch_batches[static_cast<std::size_t>((k - 1) % batches_per_epoch)];

    WeightSet grads = gradients(net, ds_train, batch, kind);
    if (s.optimizer == Optimizer::GradientDescent) {
      gd_step(net, grads, hp);
    } else {
      rmsprop_step(net, grads, accum, hp, ref.beta, ref.eps);
    }

    const bool finite = push_metrics(k);
    if (!finite) {
      record.diverged = true;
      record.halt_step = k;
      break;
    }
    if (scheduled(k)) run_probes(net, eval_points, probes, k, record);
  }

  // Output statistics at the last completed state (used by divergence and
  // variance-exponent sweeps). Guard against overflowing nets.
  if (net.weights().all_finite()) {
    Eigen::VectorXd f = forward_batch(net, eval_points.inputs).f;
    record.final_mean_abs_f = f.array().abs().mean();
    record.final_var_f = (f.array() - f.mean()).square().sum() / std::max<Eigen::Index>(1, f.size() - 1);
  } else {
    record.final_mean_abs_f = std::numeric_limits<double>::infinity();
    record.final_var_f = std::numeric_limits<double>::infinity();
  }
  return record;
}

}  // namespace widthlab
