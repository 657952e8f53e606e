#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "igsel/data.hpp"
#include "igsel/error.hpp"
#include "igsel/selection.hpp"

namespace igsel {

struct LassoOptions {
  bool fit_intercept = true;
  /// Stop when no coordinate moves more than this (in units of its column norm).
  double tolerance = 1e-11;
  std::size_t max_sweeps = 100000;
};

/// Minimizer of (1 / 2N) ||y - b - X beta||^2 + lambda ||beta||_1.
struct LassoFit {
  Vector coefficients;
  double intercept = 0.0;
  double lambda = 0.0;
  std::size_t sweeps = 0;
  bool converged = false;

  std::size_t nonzeros() const {
    return static_cast<std::size_t>((coefficients.array() != 0.0).count());
  }
};

namespace detail {

struct CenteredProblem {
  Matrix x;
  Vector y;
  Vector x_mean;
  double y_mean = 0.0;
};

inline CenteredProblem center(const Matrix& x, const Vector& y, bool fit_intercept) {
  if (x.rows() != y.size() || x.rows() == 0) throw ShapeError("lasso: X rows and y length must match and be nonzero");
  CenteredProblem p{x, y, Vector::Zero(x.cols()), 0.0};
  if (fit_intercept) {
    p.x_mean = x.colwise().mean().transpose();
    p.y_mean = y.mean();
    p.x.rowwise() -= p.x_mean.transpose();
    p.y.array() -= p.y_mean;
  }
  return p;
}

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

inline LassoFit lasso_centered(const CenteredProblem& p, double lambda, const LassoOptions& opt) {
  if (lambda < 0.0) throw SpecificationError("lasso lambda must be non-negative");
  const Eigen::Index m = p.x.cols();
  const double n = static_cast<double>(p.x.rows());
  const Vector col_sq = p.x.colwise().squaredNorm().transpose() / n;
  LassoFit fit;
  fit.lambda = lambda;
  fit.coefficients = Vector::Zero(m);
  Vector resid = p.y;
  for (std::size_t sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    double max_move = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!(col_sq(j) > 0.0)) continue;
      const double old = fit.coefficients(j);
      const double rho = p.x.col(j).dot(resid) / n + col_sq(j) * old;
      const double updated = soft_threshold(rho, lambda) / col_sq(j);
      if (updated != old) {
        resid -= (updated - old) * p.x.col(j);
        fit.coefficients(j) = updated;
        max_move = std::max(max_move, std::abs(updated - old) * std::sqrt(col_sq(j)));
      }
    }
    fit.sweeps = sweep;
    if (max_move <= opt.tolerance) {
      fit.converged = true;
      break;
    }
  }
  fit.intercept = p.y_mean - p.x_mean.dot(fit.coefficients);
  return fit;
}

}  // namespace detail

/// Cyclic coordinate descent with soft thresholding.
inline LassoFit lasso_fit(const Matrix& x, const Vector& y, double lambda, const LassoOptions& opt = {}) {
  return detail::lasso_centered(detail::center(x, y, opt.fit_intercept), lambda, opt);
}

/// Smallest lambda at which every coefficient is zero: max_j |x_j' y| / N.
inline double lasso_lambda_max(const Matrix& x, const Vector& y, bool fit_intercept = true) {
  const auto p = detail::center(x, y, fit_intercept);
  return (p.x.transpose() * p.y).cwiseAbs().maxCoeff() / static_cast<double>(p.x.rows());
}

struct LassoSelection {
  FeatureSubset subset;
  LassoFit fit;
  /// False when no lambda gave exactly n nonzeros; the nearest count is returned.
  bool exact = true;
};

/// Bisects lambda in [0, lambda_max] (at most 100 steps) for exactly n
/// nonzero coefficients and returns their indices.
inline LassoSelection lasso_select(const Dataset& data, std::span<const std::size_t> rows, std::size_t n,
                                   const LassoOptions& opt = {}) {
  if (n == 0) throw SpecificationError("lasso_select needs n >= 1");
  if (n > data.n_features()) throw SpecificationError("lasso_select: n exceeds the number of features");
  if (rows.empty()) throw SpecificationError("lasso_select needs rows");
  const Dataset sub = data.select_rows(rows);
  const auto p = detail::center(sub.features(), sub.target(), opt.fit_intercept);
  const double lambda_max = (p.x.transpose() * p.y).cwiseAbs().maxCoeff() / static_cast<double>(p.x.rows());

  LassoSelection best;
  best.exact = false;
  std::size_t best_gap = static_cast<std::size_t>(-1);
  auto consider = [&](LassoFit fit) {
    const std::size_t nz = fit.nonzeros();
    const std::size_t gap = nz > n ? nz - n : n - nz;
    // Prefer the smaller gap, then the larger lambda.
    if (gap < best_gap || (gap == best_gap && fit.lambda > best.fit.lambda)) {
      best_gap = gap;
      best.fit = std::move(fit);
    }
    return nz;
  };

  double lo = 0.0, hi = lambda_max;
  std::size_t nz = consider(detail::lasso_centered(p, lo, opt));
  for (int iter = 0; iter < 100 && nz != n && best_gap != 0; ++iter) {
    const double mid = 0.5 * (lo + hi);
    nz = consider(detail::lasso_centered(p, mid, opt));
    if (nz > n) {
      lo = mid;
    } else if (nz < n) {
      hi = mid;
    }
  }
  best.exact = best_gap == 0;
  best.subset.provenance = {"lasso"};
  for (Eigen::Index j = 0; j < best.fit.coefficients.size(); ++j) {
    if (best.fit.coefficients(j) != 0.0) best.subset.indices.push_back(static_cast<std::size_t>(j));
  }
  return best;
}

}  // namespace igsel
