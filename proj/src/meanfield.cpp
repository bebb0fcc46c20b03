#include "widthlab/meanfield.hpp"

#include "widthlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace widthlab {

namespace {

// Exact minimum-cost perfect matching on a square cost matrix via shortest
// augmenting paths with dual potentials (O(n^3)). Returns the matched column
// for each row.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), min_to(n + 1);
  std::vector<int> matched_row(n + 1, 0), parent(n + 1, 0);

  for (int i = 1; i <= n; ++i) {
    matched_row[0] = i;
    int j0 = 0;
    std::fill(min_to.begin(), min_to.end(), kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = matched_row[j0];
      int j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (reduced < min_to[j]) {
          min_to[j] = reduced;
          parent[j] = j0;
        }
        if (min_to[j] < delta) {
          delta = min_to[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[matched_row[j]] += delta;
          v[j] -= delta;
        } else {
          min_to[j] -= delta;
        }
      }
      j0 = j1;
    } while (matched_row[j0] != 0);
    do {
      const int j1 = parent[j0];
      matched_row[j0] = matched_row[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (matched_row[j] != 0) row_to_col[matched_row[j] - 1] = j - 1;
  }
  return row_to_col;
}

void check_measure(const ParticleMeasure& mu, const char* where) {
  if (mu.size() < 1 || mu.w.rows() != mu.a.size()) {
    throw std::invalid_argument(std::string(where) + ": measure needs matching a/w atom counts >= 1");
  }
  if (!mu.all_finite()) {
    throw std::invalid_argument(std::string(where) + ": measure has non-finite atoms");
  }
}

}  // namespace

ParticleMeasure measure_of(const NetState& net) {
  if (net.depth_H() != 0) {
    throw std::invalid_argument("measure_of: only depth_H == 0 networks define a per-unit measure");
  }
  ParticleMeasure mu;
  mu.a = net.weights().a;
  mu.w = net.weights().w;
  return mu;
}

Eigen::VectorXd mf_predict_batch(const ParticleMeasure& mu, const Eigen::MatrixXd& X, double sigma_star,
                                 double alpha) {
  check_measure(mu, "mf_predict");
  if (X.cols() != mu.input_dim()) {
    throw std::invalid_argument("mf_predict: input dimension mismatch");
  }
  const auto phi = [alpha](double z) { return leaky_relu(z, alpha); };
  const Eigen::MatrixXd acts = (X * mu.w.transpose()).unaryExpr(phi);
  return (sigma_star / static_cast<double>(mu.size())) * (acts * mu.a);
}

double mf_predict(const ParticleMeasure& mu, const Eigen::VectorXd& x, double sigma_star, double alpha) {
  return mf_predict_batch(mu, x.transpose(), sigma_star, alpha)(0);
}

ParticleMeasure transition_step(const ParticleMeasure& mu, double eta_star, double sigma_star,
                                const Dataset& ds, LossKind kind, double alpha) {
  check_measure(mu, "transition_step");
  if (sigma_star <= 0.0 || eta_star < 0.0) {
    throw std::invalid_argument("transition_step: need sigma_star > 0 and eta_star >= 0");
  }
  if (ds.d0 != mu.input_dim()) {
    throw std::invalid_argument("transition_step: dataset dimension does not match the measure");
  }
  const auto phi = [alpha](double z) { return leaky_relu(z, alpha); };
  const auto dphi = [alpha](double z) { return leaky_relu_grad(z, alpha); };

  const Eigen::MatrixXd pre = ds.inputs * mu.w.transpose();  // n x d
  const Eigen::MatrixXd acts = pre.unaryExpr(phi);
  const Eigen::VectorXd f = (sigma_star / static_cast<double>(mu.size())) * (acts * mu.a);

  Eigen::VectorXd g(ds.n());
  for (int i = 0; i < ds.n(); ++i) g(i) = dloss(kind, ds.labels[i], f(i));

  const double step_scale = eta_star * sigma_star / static_cast<double>(ds.n());
  ParticleMeasure next;
  next.a = mu.a - step_scale * (acts.transpose() * g);
  const Eigen::MatrixXd gated = pre.unaryExpr(dphi).array().colwise() * g.array();  // n x d
  next.w = mu.w - step_scale * (mu.a.asDiagonal() * (gated.transpose() * ds.inputs));
  return next;
}

double wasserstein2(const ParticleMeasure& mu_a, const ParticleMeasure& mu_b) {
  check_measure(mu_a, "wasserstein2");
  check_measure(mu_b, "wasserstein2");
  if (mu_a.size() != mu_b.size()) {
    throw std::invalid_argument("wasserstein2: atom counts differ (subsample the finer measure first)");
  }
  if (mu_a.input_dim() != mu_b.input_dim()) {
    throw std::invalid_argument("wasserstein2: atom dimensions differ");
  }
  const int n = mu_a.size();
  if (n > 4096) {
    throw std::invalid_argument("wasserstein2: exact assignment supports at most 4096 atoms");
  }

  Eigen::MatrixXd pa(n, mu_a.input_dim() + 1);
  pa << mu_a.a, mu_a.w;
  Eigen::MatrixXd pb(n, mu_b.input_dim() + 1);
  pb << mu_b.a, mu_b.w;

  const Eigen::VectorXd na = pa.rowwise().squaredNorm();
  const Eigen::VectorXd nb = pb.rowwise().squaredNorm();
  Eigen::MatrixXd cost = (-2.0 * (pa * pb.transpose())).colwise() + na;
  cost.rowwise() += nb.transpose();
  cost = cost.cwiseMax(0.0);  // guard tiny negative round-off

  const std::vector<int> row_to_col = solve_assignment(cost);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += cost(i, row_to_col[i]);
  return std::sqrt(total / static_cast<double>(n));
}

ParticleMeasure subsample_atoms(const ParticleMeasure& mu, int count, std::uint64_t seed) {
  check_measure(mu, "subsample_atoms");
  if (count < 1 || count > mu.size()) {
    throw std::invalid_argument("subsample_atoms: count must lie in [1, atom count]");
  }
  std::vector<int> idx(static_cast<std::size_t>(mu.size()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(mu.size() - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  ParticleMeasure out;
  out.a.resize(count);
  out.w.resize(count, mu.input_dim());
  for (int i = 0; i < count; ++i) {
    out.a(i) = mu.a(idx[static_cast<std::size_t>(i)]);
    out.w.row(i) = mu.w.row(idx[static_cast<std::size_t>(i)]);
  }
  return out;
}

Eigen::MatrixXd kernel_dynamics(const Eigen::VectorXd& init_f, const Eigen::MatrixXd& gram,
                                const Eigen::VectorXd& labels, LossKind kind, int steps) {
  const int n_train = static_cast<int>(gram.rows());
  const int n_total = static_cast<int>(gram.cols());
  if (n_train < 1 || n_total < n_train) {
    throw std::invalid_argument("kernel_dynamics: gram must be n_train x (n_train + n_query)");
  }
  if (static_cast<int>(labels.size()) != n_train || init_f.size() != n_total) {
    throw std::invalid_argument("kernel_dynamics: labels/init_f sizes do not match gram");
  }
  if (steps < 0) {
    throw std::invalid_argument("kernel_dynamics: steps must be >= 0");
  }

  // The train block must be a kernel matrix: symmetric, PSD up to round-off.
  const Eigen::MatrixXd train_block = gram.leftCols(n_train);
  const double trace = train_block.trace();
  const double tol = 1e-9 * std::max(1.0, std::abs(trace));
  if ((train_block - train_block.transpose()).cwiseAbs().maxCoeff() > tol) {
    throw std::invalid_argument("kernel_dynamics: train block of gram is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      0.5 * (train_block + train_block.transpose()), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -tol) {
    throw std::invalid_argument("kernel_dynamics: train block of gram is not positive semidefinite");
  }

  Eigen::MatrixXd trajectory(steps + 1, n_total);
  Eigen::VectorXd f = init_f;
  trajectory.row(0) = f.transpose();
  Eigen::VectorXd g(n_train);
  for (int k = 1; k <= steps; ++k) {
    for (int i = 0; i < n_train; ++i) g(i) = dloss(kind, labels(i), f(i));
    f -= (gram.transpose() * g) / static_cast<double>(n_train);
    trajectory.row(k) = f.transpose();
  }
  return trajectory;
}

}  // namespace widthlab
