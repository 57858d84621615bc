#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <utility>

#include "logitreg/errors.hpp"

namespace logitreg {

/// Nodes and weights for E[g(Y)], Y ~ N(0, 1): sum_i w_i g(x_i), sum_i w_i = 1.
struct GaussRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  template <class F>
  double expect(F&& g) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < nodes.size(); ++i) s += weights[i] * g(nodes[i]);
    return s;
  }
};

/// Gauss-Hermite rule via Golub-Welsch on the probabilists' Jacobi matrix.
inline GaussRule gauss_hermite(int n) {
  if (n < 1) throw ContractError("quadrature needs at least one node");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(static_cast<double>(i));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  GaussRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights = es.eigenvectors().row(0).transpose().array().square();
  rule.weights /= rule.weights.sum();
  return rule;
}

/// Golden-section search for the minimizer of a unimodal f on [lo, hi].
inline std::pair<double, double> golden_section_minimize(const std::function<double(double)>& f,
                                                         double lo, double hi, double tol = 1e-10,
                                                         int max_iter = 500) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

}  // namespace logitreg
