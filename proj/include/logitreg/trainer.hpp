#pragma once

// Full-batch training of linear classifiers under the logit-regularized loss.
//
// Binary models have weights S (no bias) and signed logits z_i = y_i S^T x_i.
// K-class models have W (K x d) and an optional bias b. Both are flattened
// into one parameter vector so gradient descent and Adam share one loop.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "logitreg/datagen.hpp"
#include "logitreg/errors.hpp"
#include "logitreg/losses.hpp"
#include "logitreg/rng.hpp"

namespace logitreg {

enum class Optimizer { gd, adam };

/// fixed: use learning_rate as given. capped: use min(learning_rate, 1/L)
/// where L bounds the Hessian of the training objective.
enum class StepPolicy { fixed, capped };

struct InitSpec {
  enum class Kind { zeros, gaussian };
  Kind kind = Kind::zeros;
  double scale = 0.0;
  std::uint64_t seed = 0;
};

struct TrainConfig {
  Optimizer optimizer = Optimizer::gd;
  double learning_rate = 0.1;
  std::int64_t epochs = 20000;
  InitSpec init;
  std::int64_t log_every = 100;
  LossSpec loss;
  bool use_bias = false;  // multiclass only
  std::vector<std::int64_t> snapshot_epochs;
  StepPolicy step_policy = StepPolicy::fixed;
  double early_stop_grad_norm = 0.0;  // 0 disables

  // Adam constants.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    loss.validate();
    if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be > 0");
    if (epochs < 1) throw ContractError("epochs must be >= 1");
    if (log_every < 1) throw ContractError("log_every must be >= 1");
    if (init.kind == InitSpec::Kind::gaussian && !(init.scale >= 0.0))
      throw ContractError("init scale must be >= 0");
  }
};

struct ModelParams {
  bool multiclass = false;
  Eigen::VectorXd S;  // binary weights, length d
  Eigen::MatrixXd W;  // K x d
  Eigen::VectorXd b;  // length K

  double weight_norm() const { return multiclass ? W.norm() : S.norm(); }
};

struct TraceRow {
  std::int64_t epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double cos_sim = 0.0;
  double weight_norm = 0.0;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  std::vector<std::pair<std::int64_t, ModelParams>> snapshots;
  double learning_rate_used = 0.0;
  double final_grad_norm = 0.0;
  std::int64_t epochs_run = 0;
  bool early_stopped = false;

  const TraceRow& final_row() const { return rows.back(); }
};

struct TrainResult {
  ModelParams params;
  TrainTrace trace;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

namespace detail {

inline void check_pair(const Dataset& a, const Dataset& b) {
  if (a.dim() != b.dim()) throw ContractError("train and test dimensions differ");
  if (a.scheme != b.scheme || a.num_classes != b.num_classes)
    throw ContractError("train and test label schemes differ");
}

/// Largest eigenvalue of A^T A / n by power iteration from a fixed start.
inline double gram_top_eigenvalue(const Eigen::MatrixXd& a, int iterations = 200) {
  if (a.size() == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(a.cols()).normalized();
  double ev = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd w = a.transpose() * (a * v);
    const double nrm = w.norm();
    if (nrm == 0.0) return 0.0;
    ev = nrm;
    v = w / nrm;
  }
  return ev / static_cast<double>(a.rows());
}

// Binary objective over signed features.
class BinaryObjective {
 public:
  BinaryObjective(const Dataset& data, const LossSpec& loss)
      : x_(signed_features(data)), loss_(loss) {}

  Eigen::Index dim() const { return x_.cols(); }

  double value_grad(const Eigen::VectorXd& s, Eigen::VectorXd* grad) const {
    const Eigen::VectorXd z = x_ * s;
    const double n = static_cast<double>(z.size());
    double total = 0.0;
    Eigen::VectorXd g(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (!std::isfinite(z[i])) return std::numeric_limits<double>::quiet_NaN();
      total += per_sample_loss(z[i], loss_);
      g[i] = per_sample_grad(z[i], loss_) / n;
    }
    const double gamma = loss_.weight_decay_gamma;
    if (grad) {
      grad->noalias() = x_.transpose() * g;
      if (gamma > 0.0) *grad += gamma * s;
    }
    return total / n + 0.5 * gamma * s.squaredNorm();
  }

  double hessian_bound() const {
    return per_sample_hess_bound(loss_) * gram_top_eigenvalue(x_) + loss_.weight_decay_gamma;
  }

 private:
  Eigen::MatrixXd x_;
  LossSpec loss_;
};

// K-class objective; theta = [vec(W) (column-major K x d); b].
class MulticlassObjective {
 public:
  MulticlassObjective(const Dataset& data, const LossSpec& loss, bool use_bias)
      : x_(data.features), labels_(data.labels), loss_(loss), k_(data.num_classes),
        use_bias_(use_bias) {}

  Eigen::Index dim() const { return k_ * x_.cols() + k_; }
  int classes() const { return k_; }
  Eigen::Index features() const { return x_.cols(); }

  double value_grad(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
    const Eigen::Index d = x_.cols();
    Eigen::Map<const Eigen::MatrixXd> w(theta.data(), k_, d);
    const Eigen::VectorXd b = theta.tail(k_);
    Eigen::MatrixXd z = x_ * w.transpose();  // N x K
    z.rowwise() += b.transpose();
    const double n = static_cast<double>(z.rows());
    Eigen::MatrixXd g(z.rows(), k_);
    Eigen::VectorXd zi(k_), gi(k_);
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      zi = z.row(i).transpose();
      if (!zi.allFinite()) return std::numeric_limits<double>::quiet_NaN();
      total += per_sample_loss_mc(zi, labels_[i], loss_);
      per_sample_grad_mc(zi, labels_[i], loss_, gi);
      g.row(i) = gi.transpose() / n;
    }
    const double gamma = loss_.weight_decay_gamma;
    if (grad) {
      grad->resize(dim());
      Eigen::Map<Eigen::MatrixXd> gw(grad->data(), k_, d);
      gw.noalias() = g.transpose() * x_;
      if (gamma > 0.0) gw += gamma * w;
      if (use_bias_)
        grad->tail(k_) = g.colwise().sum().transpose();
      else
        grad->tail(k_).setZero();
    }
    return total / n + 0.5 * gamma * w.squaredNorm();
  }

  double hessian_bound() const {
    // Softmax Hessian diag(p) - p p^T has spectral norm <= 1/2.
    const double reg = loss_.kind == RegularizerKind::quadratic ? 2.0 : 0.5;
    const double curv = 0.5 * (1.0 - loss_.alpha) + loss_.alpha * reg;
    Eigen::MatrixXd aug(x_.rows(), x_.cols() + (use_bias_ ? 1 : 0));
    aug.leftCols(x_.cols()) = x_;
    if (use_bias_) aug.col(x_.cols()).setOnes();
    return curv * gram_top_eigenvalue(aug) + loss_.weight_decay_gamma;
  }

 private:
  Eigen::MatrixXd x_;
  std::vector<int> labels_;
  LossSpec loss_;
  int k_;
  bool use_bias_;
};

inline ModelParams unpack(const Eigen::VectorXd& theta, bool multiclass, int k, Eigen::Index d) {
  ModelParams p;
  p.multiclass = multiclass;
  if (!multiclass) {
    p.S = theta;
  } else {
    p.W = Eigen::Map<const Eigen::MatrixXd>(theta.data(), k, d);
    p.b = theta.tail(k);
  }
  return p;
}

}  // namespace detail

/// Binary accuracy counts signed logit > 0 (zero is wrong); K-class accuracy
/// uses argmax with ties going to the lowest class index.
inline Evaluation evaluate(const ModelParams& params, const Dataset& data, const LossSpec& loss) {
  if (data.size() == 0) throw ContractError("cannot evaluate on an empty dataset");
  const double n = static_cast<double>(data.size());
  Evaluation ev;
  if (!params.multiclass) {
    if (!data.is_binary()) throw ContractError("binary params on a class-index dataset");
    if (params.S.size() != data.dim()) throw ContractError("weight length != feature dimension");
    const Eigen::VectorXd z = data.features * params.S;
    double total = 0.0;
    std::int64_t correct = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double s = data.labels[i] * z[i];
      total += per_sample_loss(s, loss);
      if (s > 0.0) ++correct;
    }
    ev.loss = total / n + 0.5 * loss.weight_decay_gamma * params.S.squaredNorm();
    ev.accuracy = static_cast<double>(correct) / n;
    return ev;
  }
  if (data.is_binary()) throw ContractError("multiclass params on a signed-binary dataset");
  if (params.W.cols() != data.dim() || params.W.rows() != data.num_classes)
    throw ContractError("weight matrix shape does not match dataset");
  Eigen::MatrixXd z = data.features * params.W.transpose();
  z.rowwise() += params.b.transpose();
  LossSpec spec = loss;
  spec.num_classes = data.num_classes;
  double total = 0.0;
  std::int64_t correct = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Eigen::VectorXd zi = z.row(i).transpose();
    total += per_sample_loss_mc(zi, data.labels[i], spec);
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < zi.size(); ++k)
      if (zi[k] > zi[best]) best = k;
    if (best == data.labels[i]) ++correct;
  }
  ev.loss = total / n + 0.5 * loss.weight_decay_gamma * params.W.squaredNorm();
  ev.accuracy = static_cast<double>(correct) / n;
  return ev;
}

/// Binary: signed cosine between S and the single reference column.
/// K-class: fraction of ||W||_F carried by the reference subspace.
inline double alignment(const ModelParams& params, const Eigen::MatrixXd& reference) {
  if (!params.multiclass) {
    const double n = params.S.norm();
    if (n == 0.0 || reference.cols() == 0) return 0.0;
    return reference.col(0).dot(params.S) / n;
  }
  const double n = params.W.norm();
  if (n == 0.0 || reference.cols() == 0) return 0.0;
  return (params.W * reference).norm() / n;
}

/// Full-batch training. `reference` defaults to the training set's signal
/// basis and only feeds the cos_sim column of the trace.
inline TrainResult train(const Dataset& train_data, const Dataset& test_data,
                         const TrainConfig& cfg,
                         std::optional<Eigen::MatrixXd> reference = std::nullopt) {
  cfg.validate();
  train_data.validate();
  test_data.validate();
  detail::check_pair(train_data, test_data);
  if (train_data.size() == 0) throw ContractError("empty training set");

  const bool multiclass = !train_data.is_binary();
  LossSpec loss = cfg.loss;
  loss.num_classes = train_data.num_classes;
  const Eigen::Index d = train_data.dim();
  const int k = train_data.num_classes;
  const Eigen::MatrixXd ref = reference ? *reference : train_data.signal_basis;
  if (ref.rows() != d && ref.size() != 0) throw ContractError("reference has wrong dimension");

  std::optional<detail::BinaryObjective> bin;
  std::optional<detail::MulticlassObjective> mc;
  if (multiclass)
    mc.emplace(train_data, loss, cfg.use_bias);
  else
    bin.emplace(train_data, loss);
  auto value_grad = [&](const Eigen::VectorXd& th, Eigen::VectorXd* g) {
    return multiclass ? mc->value_grad(th, g) : bin->value_grad(th, g);
  };
  const Eigen::Index p = multiclass ? mc->dim() : bin->dim();

  double eta = cfg.learning_rate;
  if (cfg.step_policy == StepPolicy::capped) {
    const double l = multiclass ? mc->hessian_bound() : bin->hessian_bound();
    if (l > 0.0) eta = std::min(eta, 1.0 / l);
  }

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  if (cfg.init.kind == InitSpec::Kind::gaussian) {
    auto eng = make_engine(cfg.init.seed, Stream::init);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Eigen::Index i = 0; i < p; ++i) theta[i] = cfg.init.scale * nd(eng);
    if (multiclass && !cfg.use_bias) theta.tail(k).setZero();
  }

  TrainResult result;
  result.trace.learning_rate_used = eta;
  std::vector<std::int64_t> snaps = cfg.snapshot_epochs;
  std::sort(snaps.begin(), snaps.end());

  auto log_row = [&](std::int64_t epoch, double train_obj) {
    const ModelParams mp = detail::unpack(theta, multiclass, k, d);
    const Evaluation tr = evaluate(mp, train_data, loss);
    TraceRow row;
    row.epoch = epoch;
    row.train_loss = train_obj;
    row.train_acc = tr.accuracy;
    if (test_data.size() > 0) {
      const Evaluation te = evaluate(mp, test_data, loss);
      row.test_loss = te.loss;
      row.test_acc = te.accuracy;
    } else {
      row.test_loss = std::numeric_limits<double>::quiet_NaN();
      row.test_acc = std::numeric_limits<double>::quiet_NaN();
    }
    row.cos_sim = alignment(mp, ref);
    row.weight_norm = mp.weight_norm();
    result.trace.rows.push_back(row);
  };
  auto maybe_snapshot = [&](std::int64_t epoch) {
    if (std::binary_search(snaps.begin(), snaps.end(), epoch))
      result.trace.snapshots.emplace_back(epoch, detail::unpack(theta, multiclass, k, d));
  };

  Eigen::VectorXd grad(p);
  Eigen::VectorXd m1, m2;
  if (cfg.optimizer == Optimizer::adam) {
    m1 = Eigen::VectorXd::Zero(p);
    m2 = Eigen::VectorXd::Zero(p);
  }
  double obj = value_grad(theta, &grad);
  if (!std::isfinite(obj)) throw DivergedAtEpoch(0, "non-finite initial loss");
  log_row(0, obj);
  maybe_snapshot(0);

  double b1t = 1.0, b2t = 1.0;
  std::int64_t epoch = 0;
  while (epoch < cfg.epochs) {
    if (cfg.early_stop_grad_norm > 0.0 && grad.norm() <= cfg.early_stop_grad_norm) {
      result.trace.early_stopped = true;
      break;
    }
    if (cfg.optimizer == Optimizer::gd) {
      theta.noalias() -= eta * grad;
    } else {
      b1t *= cfg.beta1;
      b2t *= cfg.beta2;
      m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad;
      m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 / (1.0 - b1t);
      const double c2 = 1.0 / (1.0 - b2t);
      theta.array() -= eta * (m1.array() * c1) / ((m2.array() * c2).sqrt() + cfg.adam_eps);
    }
    ++epoch;
    obj = value_grad(theta, &grad);
    if (!std::isfinite(obj) || !grad.allFinite())
      throw DivergedAtEpoch(epoch, "loss became non-finite");
    if (epoch % cfg.log_every == 0 || epoch == cfg.epochs) log_row(epoch, obj);
    maybe_snapshot(epoch);
  }
  if (result.trace.rows.back().epoch != epoch) log_row(epoch, obj);

  result.trace.epochs_run = epoch;
  result.trace.final_grad_norm = grad.norm();
  result.params = detail::unpack(theta, multiclass, k, d);
  return result;
}

/// Gradient of the mean training objective at `params`; exposed for checks.
inline ModelParams objective_gradient(const ModelParams& params, const Dataset& data,
                                      const LossSpec& loss, bool use_bias = true) {
  LossSpec spec = loss;
  spec.num_classes = data.num_classes;
  Eigen::VectorXd grad;
  if (!params.multiclass) {
    detail::BinaryObjective obj(data, spec);
    obj.value_grad(params.S, &grad);
    return detail::unpack(grad, false, 2, data.dim());
  }
  detail::MulticlassObjective obj(data, spec, use_bias);
  Eigen::VectorXd theta(obj.dim());
  Eigen::Map<Eigen::MatrixXd>(theta.data(), data.num_classes, data.dim()) = params.W;
  theta.tail(data.num_classes) = params.b;
  obj.value_grad(theta, &grad);
  return detail::unpack(grad, true, data.num_classes, data.dim());
}

/// Mean training objective (per-sample loss plus gamma/2 ||weights||^2).
inline double objective_value(const ModelParams& params, const Dataset& data,
                              const LossSpec& loss) {
  return evaluate(params, data, loss).loss;
}

}  // namespace logitreg
