#include "widthlab/net.hpp"

#include "widthlab/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace widthlab {

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows, Eigen::Index want_rows, Eigen::Index want_cols) {
  Eigen::MatrixXd m(want_rows, want_cols);
  if (static_cast<Eigen::Index>(rows.size()) != want_rows) throw std::invalid_argument("checkpoint: bad row count");
  for (Eigen::Index i = 0; i < want_rows; ++i) {
    const json& row = rows[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != want_cols) throw std::invalid_argument("checkpoint: bad col count");
    for (Eigen::Index j = 0; j < want_cols; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

json weights_to_json(const WeightSet& ws) {
  json out;
  out["a"] = std::vector<double>(ws.a.data(), ws.a.data() + ws.a.size());
  json vs = json::array();
  for (const auto& v : ws.v) vs.push_back(matrix_to_json(v));
  out["v"] = std::move(vs);
  out["w"] = matrix_to_json(ws.w);
  return out;
}

WeightSet weights_from_json(const json& j, int depth_H, int d, int d0) {
  WeightSet ws;
  const auto& a = j.at("a");
  if (static_cast<int>(a.size()) != d) throw std::invalid_argument("checkpoint: bad hat_a length");
  ws.a.resize(d);
  for (int i = 0; i < d; ++i) ws.a[i] = a[static_cast<std::size_t>(i)].get<double>();
  const auto& vs = j.at("v");
  if (static_cast<int>(vs.size()) != depth_H) throw std::invalid_argument("checkpoint: bad hat_v count");
  ws.v.reserve(static_cast<std::size_t>(depth_H));
  for (int h = 0; h < depth_H; ++h) ws.v.push_back(matrix_from_json(vs[static_cast<std::size_t>(h)], d, d));
  ws.w = matrix_from_json(j.at("w"), d, d0);
  return ws;
}

}  // namespace

WeightSet WeightSet::zeros(int depth_H, int d, int d0) {
  WeightSet ws;
  ws.a = Eigen::VectorXd::Zero(d);
  ws.v.assign(static_cast<std::size_t>(depth_H), Eigen::MatrixXd::Zero(d, d));
  ws.w = Eigen::MatrixXd::Zero(d, d0);
  return ws;
}

bool WeightSet::all_finite() const {
  if (!a.allFinite() || !w.allFinite()) return false;
  for (const auto& m : v) {
    if (!m.allFinite()) return false;
  }
  return true;
}

NetState::NetState(int depth_H, int d, int d0, double alpha, double sigma, WeightSet weights)
    : depth_H_(depth_H), width_d_(d), d0_(d0), alpha_(alpha), sigma_(sigma), weights_(std::move(weights)), init_(weights_) {
  if (depth_H < 0) throw std::invalid_argument("NetState: depth_H must be >= 0");
  if (d < 1 || d0 < 1) throw std::invalid_argument("NetState: dimensions must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("NetState: alpha must lie in (0, 1)");
  if (!(sigma > 0.0)) throw std::invalid_argument("NetState: sigma must be positive");
  if (weights_.a.size() != d || weights_.w.rows() != d || weights_.w.cols() != d0 ||
      static_cast<int>(weights_.v.size()) != depth_H) {
    throw std::invalid_argument("NetState: weight shapes inconsistent with dimensions");
  }
  for (const auto& m : weights_.v) {
    if (m.rows() != d || m.cols() != d) throw std::invalid_argument("NetState: hat_v shape mismatch");
  }
  if (!weights_.all_finite()) throw std::invalid_argument("NetState: non-finite weight");
}

double NetState::output_scale() const { return std::pow(sigma_, depth_H_ + 1); }

NetState init_network(int depth_H, int d, int d0, double alpha, double sigma, std::uint64_t seed, InitDist dist) {
  WeightSet ws = WeightSet::zeros(depth_H, d, d0);
  Rng rng(mix_seed(seed, 0xacce));
  auto draw = [&]() { return dist == InitDist::StdNormal ? rng.normal() : rng.symmetric_uniform(); };
  // Draw order is part of the contract: output weight then input row, one
  // unit at a time, so the first d units of a wider net replicate a narrower
  // one at the same seed (the coupling used by the measure-convergence
  // probes). Hidden-to-hidden matrices follow after all units.
  for (int r = 0; r < d; ++r) {
    ws.a[r] = draw();
    for (int j = 0; j < d0; ++j) ws.w(r, j) = draw();
  }
  for (int h = 0; h < depth_H; ++h) {
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) ws.v[static_cast<std::size_t>(h)](r, c) = draw();
    }
  }
  return NetState(depth_H, d, d0, alpha, sigma, std::move(ws));
}

double leaky_relu(double z, double alpha) { return z >= 0.0 ? z : alpha * z; }
double leaky_relu_grad(double z, double alpha) { return z >= 0.0 ? 1.0 : alpha; }

ForwardResult forward(const NetState& net, const Eigen::VectorXd& x) {
  if (x.size() != net.d0()) throw std::invalid_argument("forward: input dimension mismatch");
  ForwardResult out;
  out.preacts.reserve(static_cast<std::size_t>(net.depth_H()) + 1);
  const double alpha = net.alpha();
  Eigen::VectorXd z = net.weights().w * x;
  out.preacts.push_back(z);
  for (int h = 0; h < net.depth_H(); ++h) {
    Eigen::VectorXd act = z.unaryExpr([alpha](double v) { return leaky_relu(v, alpha); });
    z = net.weights().v[static_cast<std::size_t>(h)] * act;
    out.preacts.push_back(z);
  }
  const Eigen::VectorXd top = z.unaryExpr([alpha](double v) { return leaky_relu(v, alpha); });
  out.f = net.output_scale() * net.weights().a.dot(top);
  return out;
}

BatchForwardResult forward_batch(const NetState& net, const Eigen::MatrixXd& X) {
  if (X.cols() != net.d0()) throw std::invalid_argument("forward_batch: input dimension mismatch");
  BatchForwardResult out;
  out.preacts.reserve(static_cast<std::size_t>(net.depth_H()) + 1);
  const double alpha = net.alpha();
  Eigen::MatrixXd z = X * net.weights().w.transpose();  // n x d
  out.preacts.push_back(z);
  for (int h = 0; h < net.depth_H(); ++h) {
    Eigen::MatrixXd act = z.unaryExpr([alpha](double v) { return leaky_relu(v, alpha); });
    z = act * net.weights().v[static_cast<std::size_t>(h)].transpose();
    out.preacts.push_back(z);
  }
  const Eigen::MatrixXd top = z.unaryExpr([alpha](double v) { return leaky_relu(v, alpha); });
  out.f = net.output_scale() * (top * net.weights().a);
  return out;
}

double loss(LossKind kind, double y, double z) {
  (void)kind;
  // softplus(z) - y z, with softplus(z) = max(z, 0) + log1p(exp(-|z|)).
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y * z;
}

double dloss(LossKind kind, double y, double z) {
  (void)kind;
  // logistic(z) - y, overflow-safe on both tails.
  double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return p - y;
}

WeightSet gradients(const NetState& net, const Dataset& ds, const std::vector<int>& batch, LossKind kind) {
  if (batch.empty()) throw std::invalid_argument("gradients: empty batch");
  const int m = static_cast<int>(batch.size());
  const int H = net.depth_H();
  const double alpha = net.alpha();

  Eigen::MatrixXd X(m, net.d0());
  Eigen::VectorXd y(m);
  for (int i = 0; i < m; ++i) {
    X.row(i) = ds.inputs.row(batch[static_cast<std::size_t>(i)]);
    y[i] = ds.labels[batch[static_cast<std::size_t>(i)]];
  }

  // Forward pass, keeping activations per layer.
  std::vector<Eigen::MatrixXd> preacts;
  std::vector<Eigen::MatrixXd> acts;  // acts[h] = phi(preacts[h]), n x d
  preacts.reserve(static_cast<std::size_t>(H) + 1);
  acts.reserve(static_cast<std::size_t>(H) + 1);
  Eigen::MatrixXd z = X * net.weights().w.transpose();
  preacts.push_back(z);
  acts.push_back(z.unaryExpr([alpha](double v) { return leaky_relu(v, alpha); }));
  for (int h = 0; h < H; ++h) {
    z = acts.back() * net.weights().v[static_cast<std::size_t>(h)].transpose();
    preacts.push_back(z);
    acts.push_back(z.unaryExpr([alpha](double v) { return leaky_relu(v, alpha); }));
  }
  const double scale = net.output_scale();
  Eigen::VectorXd f = scale * (acts.back() * net.weights().a);

  // Batch-mean loss: each sample contributes dloss/m.
  Eigen::VectorXd g(m);
  for (int i = 0; i < m; ++i) g[i] = dloss(kind, y[i], f[i]) / m;

  WeightSet grad = WeightSet::zeros(H, net.width_d(), net.d0());
  grad.a = scale * (acts.back().transpose() * g);

  // Backprop through the top activation: upstream(i, r) = d loss / d preacts^H(i, r).
  Eigen::MatrixXd gate = preacts.back().unaryExpr([alpha](double v) { return leaky_relu_grad(v, alpha); });
  Eigen::MatrixXd upstream = (scale * g) * net.weights().a.transpose();  // m x d
  upstream.array() *= gate.array();

  for (int h = H - 1; h >= 0; --h) {
    grad.v[static_cast<std::size_t>(h)] = upstream.transpose() * acts[static_cast<std::size_t>(h)];
    gate = preacts[static_cast<std::size_t>(h)].unaryExpr([alpha](double v) { return leaky_relu_grad(v, alpha); });
    upstream = upstream * net.weights().v[static_cast<std::size_t>(h)];
    upstream.array() *= gate.array();
  }
  grad.w = upstream.transpose() * X;
  return grad;
}

EvalResult evaluate(const NetState& net, const Dataset& ds, LossKind kind) {
  BatchForwardResult fwd = forward_batch(net, ds.inputs);
  EvalResult out;
  double correct = 0.0;
  for (int i = 0; i < ds.n(); ++i) {
    out.mean_loss += loss(kind, ds.labels[i], fwd.f[i]);
    const double predicted = fwd.f[i] > 0.0 ? 1.0 : 0.0;
    if (predicted == ds.labels[i]) correct += 1.0;
  }
  out.mean_loss /= ds.n();
  out.accuracy = correct / ds.n();
  return out;
}

void save_checkpoint(const NetState& net, std::ostream& out) {
  json j;
  j["depth_H"] = net.depth_H();
  j["width_d"] = net.width_d();
  j["d0"] = net.d0();
  j["alpha"] = net.alpha();
  j["sigma"] = net.sigma_product();
  j["weights"] = weights_to_json(net.weights());
  j["init"] = weights_to_json(net.init_snapshot());
  out << j.dump(2) << "\n";
}

NetState load_checkpoint(std::istream& in) {
  json j = json::parse(in);
  const int H = j.at("depth_H").get<int>();
  const int d = j.at("width_d").get<int>();
  const int d0 = j.at("d0").get<int>();
  const double alpha = j.at("alpha").get<double>();
  const double sigma = j.at("sigma").get<double>();
  NetState net(H, d, d0, alpha, sigma, weights_from_json(j.at("init"), H, d, d0));
  net.weights() = weights_from_json(j.at("weights"), H, d, d0);
  if (!net.weights().all_finite()) throw std::invalid_argument("checkpoint: non-finite weight");
  return net;
}

}  // namespace widthlab
