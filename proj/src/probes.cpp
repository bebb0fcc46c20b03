#include "widthlab/probes.hpp"

#include "widthlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace widthlab {

namespace {

// Moved-weight groups in report order: output weights, hidden-to-hidden
// matrices from the input side up, then input weights.
std::vector<std::string> group_names(int depth_H) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(depth_H) + 2);
  names.emplace_back("a");
  for (int h = 1; h <= depth_H; ++h) names.push_back("v" + std::to_string(h));
  names.emplace_back("w");
  return names;
}

std::string subset_name(const std::vector<std::string>& groups, unsigned mask) {
  if (mask == 0) return "empty";
  // Two groups keep the compact names ("a", "w", "aw"); deeper nets join
  // members with '+' so "v11" can never be misread.
  const bool compact = groups.size() == 2;
  std::string out;
  for (std::size_t j = 0; j < groups.size(); ++j) {
    if (!((mask >> j) & 1u)) continue;
    if (!out.empty() && !compact) out += '+';
    out += groups[j];
  }
  return out;
}

struct GroupParts {
  Eigen::VectorXd a_init, a_delta;
  std::vector<Eigen::MatrixXd> v_init, v_delta;
  Eigen::MatrixXd w_init, w_delta;
};

GroupParts split_groups(const NetState& net) {
  const WeightSet& cur = net.weights();
  const WeightSet& ini = net.init_snapshot();
  GroupParts parts;
  parts.a_init = ini.a;
  parts.a_delta = cur.a - ini.a;
  parts.w_init = ini.w;
  parts.w_delta = cur.w - ini.w;
  parts.v_init.reserve(cur.v.size());
  parts.v_delta.reserve(cur.v.size());
  for (std::size_t h = 0; h < cur.v.size(); ++h) {
    parts.v_init.push_back(ini.v[h]);
    parts.v_delta.push_back(cur.v[h] - ini.v[h]);
  }
  return parts;
}

void check_decomposable(const NetState& net, const Eigen::MatrixXd& X) {
  if (net.depth_H() > 3) {
    throw std::invalid_argument("decomposition supports depth_H <= 3 (term count doubles per layer)");
  }
  if (X.cols() != net.d0()) {
    throw std::invalid_argument("decomposition: input column count does not match the network input dim");
  }
  if (X.rows() < 1) {
    throw std::invalid_argument("decomposition: need at least one input row");
  }
}

// Values of every subset term at every row of X, in mask order (bit j set
// means group j contributes its increment instead of its init value). All
// activation gates are phi' at the *current* preactivations, which is what
// makes the terms sum exactly to the full output: phi(z) = phi'(z) * z.
std::vector<Eigen::VectorXd> subset_values(const NetState& net, const Eigen::MatrixXd& X,
                                           std::vector<std::string>* names_out) {
  check_decomposable(net, X);
  const int H = net.depth_H();
  const double alpha = net.alpha();
  const double scale = net.output_scale();
  const auto dphi = [alpha](double z) { return leaky_relu_grad(z, alpha); };

  const BatchForwardResult fwd = forward_batch(net, X);
  std::vector<Eigen::MatrixXd> gates;
  gates.reserve(fwd.preacts.size());
  for (const Eigen::MatrixXd& pre : fwd.preacts) gates.push_back(pre.unaryExpr(dphi));

  const GroupParts parts = split_groups(net);
  const std::vector<std::string> groups = group_names(H);
  const unsigned n_subsets = 1u << groups.size();
  if (names_out != nullptr) {
    names_out->clear();
    for (unsigned mask = 0; mask < n_subsets; ++mask) names_out->push_back(subset_name(groups, mask));
  }

  std::vector<Eigen::VectorXd> values;
  values.reserve(n_subsets);
  for (unsigned mask = 0; mask < n_subsets; ++mask) {
    const bool a_moved = (mask & 1u) != 0;
    const bool w_moved = ((mask >> (groups.size() - 1)) & 1u) != 0;
    Eigen::MatrixXd signal =
        (X * (w_moved ? parts.w_delta : parts.w_init).transpose()).cwiseProduct(gates[0]);
    for (int h = 1; h <= H; ++h) {
      const bool v_moved = ((mask >> h) & 1u) != 0;
      const Eigen::MatrixXd& vmat = v_moved ? parts.v_delta[h - 1] : parts.v_init[h - 1];
      signal = (signal * vmat.transpose()).cwiseProduct(gates[h]);
    }
    values.emplace_back(scale * (signal * (a_moved ? parts.a_delta : parts.a_init)));
  }
  return values;
}

}  // namespace

DecompositionEntry decomposition_terms(const NetState& net, const Eigen::VectorXd& x) {
  std::vector<std::string> names;
  const std::vector<Eigen::VectorXd> values = subset_values(net, x.transpose(), &names);
  DecompositionEntry entry;
  entry.f = forward(net, x).f;
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    entry.terms.emplace_back(names[i], values[i](0));
    total += values[i](0);
  }
  entry.sum_residual = std::abs(entry.f - total);
  return entry;
}

DecompositionReport decomposition_variances(const NetState& net, const Eigen::MatrixXd& X) {
  if (X.rows() < 2) {
    throw std::invalid_argument("decomposition_variances: need at least two input rows");
  }
  std::vector<std::string> names;
  const std::vector<Eigen::VectorXd> values = subset_values(net, X, &names);

  DecompositionReport report;
  Eigen::VectorXd total = Eigen::VectorXd::Zero(X.rows());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::vector<double> column(values[i].data(), values[i].data() + values[i].size());
    report.term_variances.emplace_back(names[i], data_variance(column));
    total += values[i];
  }

  const Eigen::VectorXd f = forward_batch(net, X).f;
  const std::vector<double> f_column(f.data(), f.data() + f.size());
  report.var_f = data_variance(f_column);
  report.max_rel_residual = ((f - total).cwiseAbs().array() / (1.0 + f.cwiseAbs().array())).maxCoeff();
  return report;
}

std::vector<std::pair<std::string, double>> increment_norms(const NetState& net) {
  const WeightSet& cur = net.weights();
  const WeightSet& ini = net.init_snapshot();
  std::vector<std::pair<std::string, double>> out;
  out.emplace_back("a", (cur.a - ini.a).cwiseAbs().mean());
  for (int h = 0; h < net.depth_H(); ++h) {
    out.emplace_back("v" + std::to_string(h + 1), (cur.v[h] - ini.v[h]).rowwise().norm().mean());
  }
  out.emplace_back("w", (cur.w - ini.w).rowwise().norm().mean());
  return out;
}

double data_variance(const std::vector<double>& values) {
  if (values.size() < 2) {
    throw std::invalid_argument("data_variance: need at least two values");
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(values.size() - 1);
}

double ntk_kernel(const NetState& net, const Eigen::VectorXd& x, const Eigen::VectorXd& x2,
                  double eta_hat) {
  if (net.depth_H() != 0) {
    throw std::invalid_argument("ntk_kernel is defined for depth_H == 0 networks");
  }
  if (x.size() != net.d0() || x2.size() != net.d0()) {
    throw std::invalid_argument("ntk_kernel: input dimension mismatch");
  }
  const double alpha = net.alpha();
  const auto phi = [alpha](double z) { return leaky_relu(z, alpha); };
  const auto dphi = [alpha](double z) { return leaky_relu_grad(z, alpha); };

  const Eigen::VectorXd p = net.weights().w * x;
  const Eigen::VectorXd p2 = net.weights().w * x2;
  const Eigen::VectorXd a2 = net.weights().a.cwiseAbs2();
  const double output_part = p.unaryExpr(phi).dot(p2.unaryExpr(phi));
  const double input_part =
      (p.unaryExpr(dphi).cwiseProduct(p2.unaryExpr(dphi)).cwiseProduct(a2)).sum() * x.dot(x2);
  const double sigma = net.sigma_product();
  return eta_hat * sigma * sigma * (output_part + input_part);
}

McEstimate ntk_limit_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& x2, double eta_hat_sigma2,
                            double alpha, int n_mc, std::uint64_t seed) {
  if (n_mc < 2) {
    throw std::invalid_argument("ntk_limit_kernel: need at least two Monte-Carlo draws");
  }
  if (x.size() != x2.size() || x.size() < 1) {
    throw std::invalid_argument("ntk_limit_kernel: inputs must share a positive dimension");
  }
  const auto phi = [alpha](double z) { return leaky_relu(z, alpha); };
  const auto dphi = [alpha](double z) { return leaky_relu_grad(z, alpha); };
  const int d0 = static_cast<int>(x.size());
  const double xdot = x.dot(x2);

  Rng rng(seed);
  constexpr int kBlock = 4096;
  Eigen::VectorXd a_blk(kBlock);
  Eigen::MatrixXd w_blk(kBlock, d0);
  double sum = 0.0;
  double sum_sq = 0.0;
  int remaining = n_mc;
  while (remaining > 0) {
    const int b = std::min(remaining, kBlock);
    // Draw order (output weight, then the input row) matches the elementwise
    // estimator so results are reproducible across block sizes.
    for (int i = 0; i < b; ++i) {
      a_blk(i) = rng.normal();
      for (int k = 0; k < d0; ++k) w_blk(i, k) = rng.normal();
    }
    const Eigen::VectorXd p = w_blk.topRows(b) * x;
    const Eigen::VectorXd p2 = w_blk.topRows(b) * x2;
    const Eigen::ArrayXd m = p.unaryExpr(phi).array() * p2.unaryExpr(phi).array() +
                             p.unaryExpr(dphi).array() * p2.unaryExpr(dphi).array() *
                                 a_blk.head(b).cwiseAbs2().array() * xdot;
    sum += m.sum();
    sum_sq += m.square().sum();
    remaining -= b;
  }

  const double n = static_cast<double>(n_mc);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  McEstimate out;
  out.estimate = eta_hat_sigma2 * mean;
  out.stderr_of_mean = eta_hat_sigma2 * std::sqrt(var / n);
  return out;
}

Eigen::MatrixXd ntk_limit_gram(const Eigen::MatrixXd& points, double eta_hat_sigma2, double alpha,
                               int n_mc, std::uint64_t seed) {
  if (n_mc < 1) {
    throw std::invalid_argument("ntk_limit_gram: need at least one Monte-Carlo draw");
  }
  if (points.rows() < 1 || points.cols() < 1) {
    throw std::invalid_argument("ntk_limit_gram: points must be a nonempty matrix");
  }
  const auto phi = [alpha](double z) { return leaky_relu(z, alpha); };
  const auto dphi = [alpha](double z) { return leaky_relu_grad(z, alpha); };
  const int m = static_cast<int>(points.rows());
  const int d0 = static_cast<int>(points.cols());
  const Eigen::MatrixXd dots = points * points.transpose();

  Rng rng(seed);
  constexpr int kBlock = 8192;
  Eigen::VectorXd a_blk(kBlock);
  Eigen::MatrixXd w_blk(kBlock, d0);
  Eigen::MatrixXd accum = Eigen::MatrixXd::Zero(m, m);
  int remaining = n_mc;
  while (remaining > 0) {
    const int b = std::min(remaining, kBlock);
    for (int i = 0; i < b; ++i) {
      a_blk(i) = rng.normal();
      for (int k = 0; k < d0; ++k) w_blk(i, k) = rng.normal();
    }
    const Eigen::MatrixXd pre = points * w_blk.topRows(b).transpose();  // m x b
    const Eigen::MatrixXd act = pre.unaryExpr(phi);
    const Eigen::MatrixXd gate = pre.unaryExpr(dphi);
    const Eigen::MatrixXd gate_a2 =
        gate.array().rowwise() * a_blk.head(b).cwiseAbs2().transpose().array();
    accum.noalias() += act * act.transpose();
    accum.noalias() += (gate_a2 * gate.transpose()).cwiseProduct(dots);
    remaining -= b;
  }
  return (eta_hat_sigma2 / static_cast<double>(n_mc)) * accum;
}

}  // namespace widthlab
