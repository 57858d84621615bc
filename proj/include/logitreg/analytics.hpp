#pragma once

// Closed-form oracles and measurements on trained models and datasets.
// Statistics use divisor N throughout.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "logitreg/datagen.hpp"
#include "logitreg/errors.hpp"
#include "logitreg/losses.hpp"
#include "logitreg/quadrature.hpp"
#include "logitreg/trainer.hpp"

namespace logitreg {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() == 0) throw ContractError("statistics of an empty vector");
  const double m = v.mean();
  const double var = (v.array() - m).square().mean();
  return {m, std::sqrt(std::max(var, 0.0))};
}

/// Signed logits y_i S^T x_i.
inline Eigen::VectorXd signed_logits(const Eigen::VectorXd& S, const Dataset& data) {
  if (S.size() != data.dim()) throw ContractError("weight length != feature dimension");
  return signed_features(data) * S;
}

/// Fisher direction normalize((Sigma + eps I)^{-1} mu) of the signed inputs.
inline Eigen::VectorXd lda_direction(const Dataset& data) {
  if (data.size() < 2) throw ContractError("lda_direction needs at least two samples");
  const Eigen::MatrixXd x = signed_features(data);
  const Eigen::VectorXd mu = x.colwise().mean().transpose();
  const Eigen::MatrixXd xc = x.rowwise() - mu.transpose();
  Eigen::MatrixXd sigma = (xc.transpose() * xc) / static_cast<double>(x.rows());
  const double ridge = 1e-10 * sigma.trace() / static_cast<double>(sigma.rows());
  sigma.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw RankDeficient("covariance is not positive definite");
  Eigen::VectorXd s = llt.solve(mu);
  const double n = s.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw RankDeficient("degenerate Fisher direction");
  return s / n;
}

/// r = std(z) / mean(z) over the signed logits.
inline double coefficient_of_variation(const Eigen::VectorXd& S, const Dataset& data) {
  const MeanStd st = mean_std(signed_logits(S, data));
  if (!(st.mean > 0.0)) throw SignError("mean signed logit is not positive");
  return st.std / st.mean;
}

inline MeanStd logit_stats(const ModelParams& params, const Dataset& data) {
  if (params.multiclass) throw ContractError("logit_stats needs a binary model");
  return mean_std(signed_logits(params.S, data));
}

/// Test accuracy of a direction at cosine rho with the signal axis.
inline double closed_form_accuracy(double rho, double mu_f, double sigma_f, double sigma_n) {
  if (!(rho >= -1.0 && rho <= 1.0)) throw DomainError("rho must lie in [-1, 1]");
  const double num = rho * mu_f;
  const double var = rho * rho * sigma_f * sigma_f + (1.0 - rho * rho) * sigma_n * sigma_n;
  if (var == 0.0) {
    if (num == 0.0) throw IndeterminateAccuracy("zero signal and zero spread");
    return num > 0.0 ? 1.0 : 0.0;
  }
  return 0.5 * (1.0 + std::erf(num / std::sqrt(2.0 * var)));
}

inline double rho_min_predicted(double C, double sigma_n) {
  if (sigma_n < 0.0) throw DomainError("sigma_n must be >= 0");
  if (sigma_n == 0.0) return C > 0.0 ? 0.0 : 1.0;
  const double q = C / sigma_n;
  return 1.0 / std::sqrt(1.0 + q * q);
}

struct AlignmentFit {
  double c_squared = 0.0;  // slope of 1/cos^2 against 1/sigma_n^2
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Unconstrained least squares of 1/cos^2 theta on 1/sigma_n^2.
inline AlignmentFit fit_alignment_scaling(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw ContractError("alignment fit needs at least two points");
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [sn, c] = points[static_cast<std::size_t>(i)];
    if (!(sn > 0.0)) throw ContractError("sigma_n must be > 0");
    if (!(c > 0.0 && c <= 1.0)) throw ContractError("cosine must lie in (0, 1]");
    x[i] = 1.0 / (sn * sn);
    y[i] = 1.0 / (c * c);
  }
  const double mx = x.mean(), my = y.mean();
  const double sxx = (x.array() - mx).square().sum();
  if (!(sxx > 1e-14 * (1.0 + mx * mx))) throw ContractError("sigma_n values have no spread");
  const double sxy = ((x.array() - mx) * (y.array() - my)).sum();
  AlignmentFit fit;
  fit.c_squared = sxy / sxx;
  fit.intercept = my - fit.c_squared * mx;
  const double sst = (y.array() - my).square().sum();
  const double sse = (y.array() - fit.intercept - fit.c_squared * x.array()).square().sum();
  fit.r2 = sst > 0.0 ? 1.0 - sse / sst : 1.0;
  return fit;
}

struct QuadraticSolution {
  Eigen::VectorXd S;          // argmin of mean (S^T x - a)^2
  double g_star = 0.0;        // a mu / (mu^2 + sigma^2) along S / |S|
  double L_min = 0.0;         // a^2 sigma^2 / (mu^2 + sigma^2)
  double mean = 0.0;          // logit moments along the unit direction
  double std = 0.0;
  double loss_at_solution = 0.0;
};

/// Exact minimizer of the mean squared logit deviation from target a.
inline QuadraticSolution quadratic_minimizer(const Dataset& data, double a) {
  const Eigen::MatrixXd x = signed_features(data);
  if (x.rows() < x.cols()) throw RankDeficient("N < d: X^T X is singular");
  const Eigen::MatrixXd gram = x.transpose() * x;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw RankDeficient("X^T X is not positive definite");
  const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
  if (diag.minCoeff() <= 1e-10 * diag.maxCoeff()) throw RankDeficient("X^T X is numerically singular");
  QuadraticSolution sol;
  sol.S = llt.solve(a * x.transpose() * Eigen::VectorXd::Ones(x.rows()));
  const Eigen::VectorXd z = x * sol.S;
  sol.loss_at_solution = (z.array() - a).square().mean();
  const double norm = sol.S.norm();
  if (norm > 0.0) {
    const MeanStd st = mean_std(z / norm);
    sol.mean = st.mean;
    sol.std = st.std;
    const double m2 = st.mean * st.mean + st.std * st.std;
    sol.g_star = a * st.mean / m2;
    sol.L_min = a * a * st.std * st.std / m2;
  } else {
    sol.L_min = a * a;
  }
  return sol;
}

/// First logged epoch with test accuracy >= threshold.
inline std::optional<std::int64_t> grokking_time(const TrainTrace& trace, double threshold) {
  if (trace.rows.empty()) throw ContractError("empty trace");
  if (!(threshold > 0.5 && threshold <= 1.0)) throw ContractError("threshold must lie in (0.5, 1]");
  for (const auto& row : trace.rows)
    if (row.test_acc >= threshold) return row.epoch;
  return std::nullopt;
}

/// Peak test loss exceeds both the first and the last logged value by >= 5%.
inline bool non_monotone_test_loss(const TrainTrace& trace, double prominence = 0.05) {
  if (trace.rows.empty()) throw ContractError("empty trace");
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& row : trace.rows) peak = std::max(peak, row.test_loss);
  const double first = trace.rows.front().test_loss;
  const double last = trace.rows.back().test_loss;
  return peak >= (1.0 + prominence) * first && peak >= (1.0 + prominence) * last;
}

struct FeatureGeometry {
  Eigen::MatrixXd signal_basis;  // Q1, d x rank
  Eigen::MatrixXd orth_basis;    // Q2, d x (d - rank)
  Eigen::MatrixXd class_means;   // K x d
  double sigma_f_eff = 0.0;
  double sigma_n_eff = 0.0;
  double sigma_f_raw = 0.0;  // before division by the mean centroid distance
  double sigma_n_raw = 0.0;
  double mean_pairwise_distance = 0.0;
};

/// Splits class-conditional spread into the span of the centroid differences
/// and its orthogonal complement.
inline FeatureGeometry feature_geometry(const Eigen::MatrixXd& features,
                                        const std::vector<int>& labels) {
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw ContractError("feature rows and label count differ");
  int K = 0;
  for (int y : labels) {
    if (y < 0) throw ContractError("labels must be class indices");
    K = std::max(K, y + 1);
  }
  if (K < 2) throw ContractError("need at least two classes");
  const Eigen::Index d = features.cols();
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < labels.size(); ++i)
    members[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
  for (const auto& m : members)
    if (m.size() < 2) throw ContractError("every class needs at least two samples");

  FeatureGeometry g;
  g.class_means = Eigen::MatrixXd::Zero(K, d);
  for (int c = 0; c < K; ++c) {
    for (Eigen::Index i : members[static_cast<std::size_t>(c)]) g.class_means.row(c) += features.row(i);
    g.class_means.row(c) /= static_cast<double>(members[static_cast<std::size_t>(c)].size());
  }

  Eigen::MatrixXd diffs(d, K - 1);
  for (int c = 1; c < K; ++c) diffs.col(c - 1) = (g.class_means.row(c) - g.class_means.row(0)).transpose();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(diffs);
  qr.setThreshold(1e-10);
  const Eigen::Index rank = qr.rank();
  if (rank == 0) throw DegenerateSignalSubspace("class means coincide");
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  g.signal_basis = q.leftCols(rank);
  g.orth_basis = q.rightCols(d - rank);

  double dist = 0.0;
  int pairs = 0;
  for (int a = 0; a < K; ++a)
    for (int b = a + 1; b < K; ++b, ++pairs) dist += (g.class_means.row(a) - g.class_means.row(b)).norm();
  g.mean_pairwise_distance = dist / pairs;

  double sf = 0.0, sn = 0.0;
  for (int c = 0; c < K; ++c) {
    const auto& m = members[static_cast<std::size_t>(c)];
    Eigen::MatrixXd xc(static_cast<Eigen::Index>(m.size()), d);
    for (std::size_t r = 0; r < m.size(); ++r)
      xc.row(static_cast<Eigen::Index>(r)) = features.row(m[r]) - g.class_means.row(c);
    const double nc = static_cast<double>(m.size());
    const double total = xc.squaredNorm() / nc;
    const double in_signal = (xc * g.signal_basis).squaredNorm() / nc;
    const double in_orth = std::max(total - in_signal, 0.0);
    sf += std::sqrt(in_signal / static_cast<double>(rank));
    if (d > rank) sn += std::sqrt(in_orth / static_cast<double>(d - rank));
  }
  g.sigma_f_raw = sf / K;
  g.sigma_n_raw = sn / K;
  g.sigma_f_eff = g.sigma_f_raw / g.mean_pairwise_distance;
  g.sigma_n_eff = g.sigma_n_raw / g.mean_pairwise_distance;
  return g;
}

inline std::vector<int> class_indices(const Dataset& data) {
  if (!data.is_binary()) return data.labels;
  std::vector<int> out(data.labels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = data.labels[i] > 0 ? 1 : 0;
  return out;
}

inline FeatureGeometry feature_geometry(const Dataset& data) {
  return feature_geometry(data.features, class_indices(data));
}

/// x' = (I - P) x + gamma P x with P the projector onto the orthogonal basis.
inline Eigen::MatrixXd rescale_orthogonal(const Eigen::MatrixXd& features,
                                          const FeatureGeometry& geometry, double gamma) {
  if (!(gamma >= 0.0)) throw DomainError("gamma must be >= 0");
  if (features.cols() != geometry.signal_basis.rows())
    throw ContractError("feature dimension does not match geometry");
  if (gamma == 1.0) return features;
  const Eigen::MatrixXd& q1 = geometry.signal_basis;
  return gamma * features + (1.0 - gamma) * ((features * q1) * q1.transpose());
}

/// Coordinates of every sample in the plane of two logit differences.
inline Eigen::MatrixXd simplex_projection(const ModelParams& params, const Dataset& data,
                                          const std::array<int, 3>& classes) {
  if (!params.multiclass) throw ContractError("simplex_projection needs a multiclass model");
  const auto K = params.W.rows();
  if (K < 3) throw ContractError("simplex_projection needs K >= 3");
  if (params.W.cols() != data.dim()) throw ContractError("weight matrix shape does not match dataset");
  const auto [c1, c2, c3] = classes;
  for (int c : classes)
    if (c < 0 || c >= K) throw ContractError("class index out of range");
  if (c1 == c2 || c1 == c3 || c2 == c3) throw ContractError("classes must be distinct");
  Eigen::MatrixXd dirs(data.dim(), 2);
  dirs.col(0) = (params.W.row(c1) - params.W.row(c2)).transpose();
  dirs.col(1) = (params.W.row(c1) - params.W.row(c3)).transpose();
  Eigen::MatrixXd out = data.features * dirs;
  out.col(0).array() += params.b[c1] - params.b[c2];
  out.col(1).array() += params.b[c1] - params.b[c3];
  return out;
}

/// Largest distance of a point to its class centroid, over the listed classes.
inline double cluster_radius(const Eigen::MatrixXd& points, const std::vector<int>& labels,
                             const std::vector<int>& classes) {
  if (static_cast<std::size_t>(points.rows()) != labels.size())
    throw ContractError("point rows and label count differ");
  double radius = 0.0;
  for (int c : classes) {
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(points.cols());
    int n = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) {
        centroid += points.row(static_cast<Eigen::Index>(i)).transpose();
        ++n;
      }
    if (n == 0) continue;
    centroid /= n;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c)
        radius = std::max(radius, (points.row(static_cast<Eigen::Index>(i)).transpose() - centroid).norm());
  }
  return radius;
}

/// E[loss(g (1 + r Y))], Y ~ N(0, 1): the mean loss of a logit distribution
/// with coefficient of variation r at scale g.
inline double gaussian_logit_risk(double g, double r, const LossSpec& spec, const GaussRule& rule) {
  return rule.expect([&](double y) { return per_sample_loss(g * (1.0 + r * y), spec); });
}

/// Q(r) = min_g E[loss(g (1 + r Y))].
inline double cv_risk(double r, const LossSpec& spec, const GaussRule& rule) {
  if (!(r >= 0.0)) throw DomainError("r must be >= 0");
  const double hi = 4.0 * std::max(1.0, target_logit(spec));
  return golden_section_minimize([&](double g) { return gaussian_logit_risk(g, r, spec, rule); }, 0.0, hi,
                                 1e-12)
      .second;
}

}  // namespace logitreg
