#pragma once

// Per-sample logit-regularized cross-entropy, binary and K-class.
//
//   l(z) = (1 - alpha) * CE(z) + alpha * f(z)
//
// with f either the quadratic penalty or the label-smoothing penalty. All
// softplus / logsumexp terms are evaluated in max-shifted form so that logits
// of order 1e3 neither overflow nor lose the small CE tail.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>

#include "logitreg/errors.hpp"

namespace logitreg {

enum class RegularizerKind { quadratic, label_smoothing };

inline std::string_view to_string(RegularizerKind k) {
  return k == RegularizerKind::quadratic ? "quadratic" : "label_smoothing";
}

inline RegularizerKind regularizer_from_string(std::string_view s) {
  if (s == "quadratic") return RegularizerKind::quadratic;
  if (s == "label_smoothing" || s == "ls") return RegularizerKind::label_smoothing;
  throw ContractError("unknown regularizer kind '" + std::string(s) + "'");
}

struct LossSpec {
  double alpha = 0.2;
  RegularizerKind kind = RegularizerKind::quadratic;
  int num_classes = 2;
  double weight_decay_gamma = 0.0;  // only read by the trainer

  void validate() const {
    if (!(alpha >= 0.0 && alpha < 1.0))
      throw ContractError("alpha must lie in [0, 1), got " + std::to_string(alpha));
    if (num_classes < 2) throw ContractError("num_classes must be >= 2");
    if (!(weight_decay_gamma >= 0.0) || !std::isfinite(weight_decay_gamma))
      throw ContractError("weight_decay_gamma must be finite and >= 0");
  }
};

/// Binary label smoothing with targets (1 - eps, eps) equals the logit
/// regularizer with alpha = 2 eps.
inline double alpha_from_label_smoothing(double epsilon) { return 2.0 * epsilon; }
inline double label_smoothing_from_alpha(double alpha) { return 0.5 * alpha; }
/// K-class smoothing y -> (1 - eps) y + eps / K maps to alpha = eps exactly.
inline double alpha_from_label_smoothing_mc(double epsilon) { return epsilon; }

struct LogitTarget {
  double binary = 0.0;  // signed-logit minimizer z*
  double z_high = 0.0;  // multiclass: coordinate of the true class
  double z_low = 0.0;   // multiclass: every other coordinate
};

namespace detail {

inline void require_finite(double z) {
  if (!std::isfinite(z)) throw DomainError("non-finite logit");
}

}  // namespace detail

/// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Binary cross-entropy at signed logit z.
inline double cross_entropy(double z) { return softplus(-z); }

/// Regularizer f(z). The LS form 1/2 log(2 + 2 cosh z) is evaluated as
/// 1/2 (softplus(z) + softplus(-z)).
inline double regularizer(double z, RegularizerKind kind) {
  if (kind == RegularizerKind::quadratic) return z * z;
  return 0.5 * (softplus(z) + softplus(-z));
}

inline double regularizer_grad(double z, RegularizerKind kind) {
  if (kind == RegularizerKind::quadratic) return 2.0 * z;
  return 0.5 * std::tanh(0.5 * z);
}

inline double regularizer_hess(double z, RegularizerKind kind) {
  if (kind == RegularizerKind::quadratic) return 2.0;
  const double c = 1.0 / std::cosh(0.5 * z);
  return 0.25 * c * c;
}

inline double per_sample_loss(double z, const LossSpec& spec) {
  detail::require_finite(z);
  return (1.0 - spec.alpha) * cross_entropy(z) + spec.alpha * regularizer(z, spec.kind);
}

inline double per_sample_grad(double z, const LossSpec& spec) {
  detail::require_finite(z);
  return -(1.0 - spec.alpha) * sigmoid(-z) + spec.alpha * regularizer_grad(z, spec.kind);
}

inline double per_sample_hess(double z, const LossSpec& spec) {
  detail::require_finite(z);
  const double s = sigmoid(z);
  return (1.0 - spec.alpha) * s * (1.0 - s) + spec.alpha * regularizer_hess(z, spec.kind);
}

/// Upper bound on l''(z) over all z; used to pick a stable step size.
inline double per_sample_hess_bound(const LossSpec& spec) {
  const double reg = spec.kind == RegularizerKind::quadratic ? 2.0 : 0.25;
  return 0.25 * (1.0 - spec.alpha) + spec.alpha * reg;
}

/// Unique root of per_sample_grad. The bracket [0, B] starts at B = 1 and
/// doubles until l'(B) > 0, then bisection runs until |l'| <= 1e-12 or the
/// bracket cannot shrink further in double precision.
inline double target_logit(const LossSpec& spec) {
  if (spec.alpha <= 0.0)
    throw NoFiniteMinimum("cross-entropy without regularization is monotone decreasing");
  double lo = 0.0;
  double hi = 1.0;
  while (per_sample_grad(hi, spec) <= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw NoFiniteMinimum("bracket growth did not find a sign change");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g = per_sample_grad(mid, spec);
    if (std::abs(g) <= 1e-12 || mid == lo || mid == hi) return mid;
    (g < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Multiclass

inline double logsumexp(const Eigen::Ref<const Eigen::VectorXd>& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

inline Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& z) {
  Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
  return p / p.sum();
}

namespace detail {

inline void check_mc(const Eigen::Ref<const Eigen::VectorXd>& z, int label, const LossSpec& spec) {
  if (z.size() != spec.num_classes)
    throw ContractError("logit vector length " + std::to_string(z.size()) +
                        " != num_classes " + std::to_string(spec.num_classes));
  if (label < 0 || label >= spec.num_classes) throw ContractError("label out of range");
  if (!z.allFinite()) throw DomainError("non-finite logit");
}

}  // namespace detail

/// f(z) for K-class logits: ||z||^2 or logsumexp(z) - mean(z).
inline double regularizer_mc(const Eigen::Ref<const Eigen::VectorXd>& z, RegularizerKind kind) {
  if (kind == RegularizerKind::quadratic) return z.squaredNorm();
  return logsumexp(z) - z.mean();
}

/// Labels are zero-based class indices.
inline double per_sample_loss_mc(const Eigen::Ref<const Eigen::VectorXd>& z, int label,
                                 const LossSpec& spec) {
  detail::check_mc(z, label, spec);
  const double lse = logsumexp(z);
  return (1.0 - spec.alpha) * (lse - z[label]) + spec.alpha * regularizer_mc(z, spec.kind);
}

/// Gradient with respect to the logits, written into `out`.
inline void per_sample_grad_mc(const Eigen::Ref<const Eigen::VectorXd>& z, int label,
                               const LossSpec& spec, Eigen::Ref<Eigen::VectorXd> out) {
  const Eigen::VectorXd p = softmax(z);
  out = (1.0 - spec.alpha) * p;
  out[label] -= (1.0 - spec.alpha);
  if (spec.kind == RegularizerKind::quadratic) {
    out += 2.0 * spec.alpha * z;
  } else {
    out += spec.alpha * (p.array() - 1.0 / static_cast<double>(z.size())).matrix();
  }
}

inline Eigen::VectorXd per_sample_grad_mc(const Eigen::Ref<const Eigen::VectorXd>& z, int label,
                                          const LossSpec& spec) {
  detail::check_mc(z, label, spec);
  Eigen::VectorXd g(z.size());
  per_sample_grad_mc(z, label, spec, g);
  return g;
}

/// Builds the symmetric target vector for `label` from a LogitTarget.
inline Eigen::VectorXd target_vector(const LogitTarget& t, int num_classes, int label) {
  Eigen::VectorXd z = Eigen::VectorXd::Constant(num_classes, t.z_low);
  z[label] = t.z_high;
  return z;
}

/// Per-class minimizer (z_high at the label, z_low elsewhere).
///
/// Permutation symmetry reduces the K-dimensional problem to two scalars.
/// Quadratic kind: damped Newton on (z_high, z_low); the penalty pins the
/// common shift (the optimum has sum(z) = 0). LS kind: f is shift invariant,
/// so Newton runs on the gap t = z_high - z_low and the result is placed in
/// the mean(z) = 0 gauge.
inline LogitTarget target_logit_mc(const LossSpec& spec) {
  spec.validate();
  if (spec.alpha <= 0.0)
    throw NoFiniteMinimum("cross-entropy without regularization has no finite minimum");
  const int K = spec.num_classes;
  const double km1 = K - 1.0;

  auto reduced = [&](double h, double l) {
    Eigen::VectorXd z = Eigen::VectorXd::Constant(K, l);
    z[0] = h;
    return per_sample_loss_mc(z, 0, spec);
  };
  // Full K-dim gradient at the symmetric point: component 0 and any other.
  auto full_grad = [&](double h, double l) {
    Eigen::VectorXd z = Eigen::VectorXd::Constant(K, l);
    z[0] = h;
    return per_sample_grad_mc(z, 0, spec);
  };

  LogitTarget out;
  if (spec.kind == RegularizerKind::label_smoothing) {
    // In the mean-zero gauge z = (t (K-1)/K, -t/K, ...) the reduced loss is
    // l(t) = lse(z) - (1 - alpha) z_high, with l'(t) = p_high - 1/K -
    // (1 - alpha)(K-1)/K and l''(t) = p_high (1 - p_high).
    auto at = [&](double t) { return std::pair{t * km1 / K, -t / K}; };
    double t = 0.0;
    for (int it = 0; it < 200; ++it) {
      auto [h, l] = at(t);
      if (full_grad(h, l).norm() <= 1e-12) break;
      const double ph = 1.0 / (1.0 + km1 * std::exp(-t));
      const double grad_t = ph - 1.0 / K - (1.0 - spec.alpha) * km1 / K;
      const double hess_t = ph * (1.0 - ph);
      const double step = grad_t / std::max(hess_t, 1e-300);
      const double f0 = reduced(h, l);
      double damp = 1.0;
      while (damp > 1e-12) {
        auto [h2, l2] = at(t - damp * step);
        if (reduced(h2, l2) <= f0 + 1e-16 * std::abs(f0)) break;
        damp *= 0.5;
      }
      if (damp <= 1e-12) break;
      t -= damp * step;
    }
    std::tie(out.z_high, out.z_low) = at(t);
  } else {
    double h = 0.0, l = 0.0;
    for (int it = 0; it < 200; ++it) {
      const Eigen::VectorXd g = full_grad(h, l);
      if (g.norm() <= 1e-12) break;
      // Reduced gradient and Hessian in (h, l).
      const double ph = 1.0 / (1.0 + km1 * std::exp(l - h));
      const double pl = (1.0 - ph) / km1;
      const double a = spec.alpha;
      Eigen::Vector2d rg(g[0], km1 * g[1]);
      Eigen::Matrix2d H;
      H(0, 0) = (1 - a) * ph * (1 - ph) + 2 * a;
      H(0, 1) = H(1, 0) = -(1 - a) * km1 * ph * pl;
      H(1, 1) = (1 - a) * km1 * pl * (1 - km1 * pl) + 2 * a * km1;
      const Eigen::Vector2d step = H.ldlt().solve(rg);
      const double f0 = reduced(h, l);
      double damp = 1.0;
      while (damp > 1e-12) {
        if (reduced(h - damp * step[0], l - damp * step[1]) <= f0 + 1e-16 * std::abs(f0)) break;
        damp *= 0.5;
      }
      if (damp <= 1e-12) break;
      h -= damp * step[0];
      l -= damp * step[1];
    }
    out.z_high = h;
    out.z_low = l;
  }
  return out;
}

}  // namespace logitreg
