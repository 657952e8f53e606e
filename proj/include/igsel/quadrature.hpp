#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "igsel/error.hpp"

namespace igsel {

/// Nodes and weights of a rule integrating over [0, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule mapped from [-1, 1] to [0, 1]. Nodes come from
/// Newton's method on P_n using the three-term recurrence.
inline QuadratureRule gauss_legendre(std::size_t n) {
  if (n == 0) throw SpecificationError("quadrature needs at least one node");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double dn = static_cast<double>(n);
  // Returns P_n'(t) and stores P_n(t) in p_n.
  auto legendre = [n, dn](double t, double& p_n) {
    double p0 = 1.0, p1 = t;
    for (std::size_t k = 2; k <= n; ++k) {
      const double dk = static_cast<double>(k);
      const double p2 = ((2.0 * dk - 1.0) * t * p1 - (dk - 1.0) * p0) / dk;
      p0 = p1;
      p1 = p2;
    }
    p_n = p1;
    return dn * (t * p1 - p0) / (t * t - 1.0);
  };
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (dn + 0.5));
    double p = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      const double d = legendre(t, p);
      const double step = p / d;
      t -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double dp = legendre(t, p);
    const double w = 2.0 / ((1.0 - t * t) * dp * dp);
    // t is the i-th largest root; -t is its mirror.
    rule.nodes[n - 1 - i] = 0.5 * (t + 1.0);
    rule.nodes[i] = 0.5 * (1.0 - t);
    rule.weights[n - 1 - i] = 0.5 * w;
    rule.weights[i] = 0.5 * w;
  }
  return rule;
}

/// Midpoint Riemann sum with n equal panels on [0, 1].
inline QuadratureRule riemann_midpoint(std::size_t n) {
  if (n == 0) throw SpecificationError("quadrature needs at least one node");
  QuadratureRule rule;
  const double h = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    rule.nodes.push_back((static_cast<double>(k) + 0.5) * h);
    rule.weights.push_back(h);
  }
  return rule;
}

}  // namespace igsel
