#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "igsel/data.hpp"
#include "igsel/error.hpp"
#include "igsel/random.hpp"

namespace igsel {

namespace detail {

/// Downhill simplex minimization inside a box (points are clamped).
inline Vector nelder_mead(const std::function<double(const Vector&)>& f, Vector start, double step,
                          double lo, double hi, std::size_t max_evals) {
  const Eigen::Index d = start.size();
  auto clamp = [&](Vector v) { return Vector(v.cwiseMax(lo).cwiseMin(hi)); };
  std::vector<Vector> pts{clamp(start)};
  for (Eigen::Index i = 0; i < d; ++i) {
    Vector p = start;
    p(i) += (p(i) + step <= hi) ? step : -step;
    pts.push_back(clamp(p));
  }
  std::vector<double> vals;
  for (const auto& p : pts) vals.push_back(f(p));
  std::size_t evals = pts.size();
  std::vector<std::size_t> order(pts.size());
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    if (std::abs(vals[worst] - vals[best]) <= 1e-10 * (std::abs(vals[best]) + 1e-10)) break;
    Vector centroid = Vector::Zero(d);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i != worst) centroid += pts[i];
    }
    centroid /= static_cast<double>(d);
    const Vector refl = clamp(centroid + (centroid - pts[worst]));
    const double fr = f(refl);
    ++evals;
    if (fr < vals[best]) {
      const Vector exp = clamp(centroid + 2.0 * (centroid - pts[worst]));
      const double fe = f(exp);
      ++evals;
      if (fe < fr) {
        pts[worst] = exp;
        vals[worst] = fe;
      } else {
        pts[worst] = refl;
        vals[worst] = fr;
      }
    } else if (fr < vals[second]) {
      pts[worst] = refl;
      vals[worst] = fr;
    } else {
      const Vector con = clamp(centroid + 0.5 * (pts[worst] - centroid));
      const double fc = f(con);
      ++evals;
      if (fc < vals[worst]) {
        pts[worst] = con;
        vals[worst] = fc;
      } else {
        for (std::size_t i = 0; i < pts.size(); ++i) {
          if (i == best) continue;
          pts[i] = clamp(pts[best] + 0.5 * (pts[i] - pts[best]));
          vals[i] = f(pts[i]);
          ++evals;
        }
      }
    }
  }
  const auto it = std::min_element(vals.begin(), vals.end());
  return pts[static_cast<std::size_t>(it - vals.begin())];
}

}  // namespace detail

struct GpOptions {
  /// Diagonal jitter added to the correlation matrix; escalated tenfold up to
  /// max_nugget when the Cholesky factorization fails.
  double nugget = 1e-8;
  double max_nugget = 1e-2;
  std::size_t restarts = 8;
  double log10_theta_lo = -3.0;
  double log10_theta_hi = 2.0;
  std::size_t max_evals_per_start = 300;
  std::uint64_t seed = 0;
  /// Skip likelihood fitting and use this log10 theta for every dimension.
  bool fixed_theta = false;
  double fixed_log10_theta = 0.0;
};

/// Ordinary kriging with an anisotropic squared-exponential correlation
/// exp(-sum_j theta_j (x_j - x'_j)^2). Process mean and variance are profiled
/// out of the likelihood; theta is fitted by multi-start Nelder-Mead.
class GaussianProcess {
public:
  struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
  };

  static GaussianProcess fit(const Matrix& x, const Vector& y, const GpOptions& opt = {}) {
    if (x.rows() < 2 || x.rows() != y.size()) throw SpecificationError("GP fit needs >= 2 observations matching X rows");
    if (!y.allFinite() || !x.allFinite()) throw SpecificationError("GP fit needs finite observations");
    GaussianProcess gp;
    gp.x_ = x;
    gp.y_offset_ = y.mean();
    const double sd = std::sqrt((y.array() - gp.y_offset_).square().mean());
    gp.y_scale_ = sd > 0.0 ? sd : 1.0;
    gp.y_ = (y.array() - gp.y_offset_) / gp.y_scale_;
    const Eigen::Index d = x.cols();

    Vector log_theta = Vector::Constant(d, opt.fixed_log10_theta);
    const bool flat = sd == 0.0;
    if (!opt.fixed_theta && !flat && d > 0) {
      auto objective = [&](const Vector& lt) {
        GaussianProcess trial = gp;
        if (!trial.factorize(lt, opt.nugget)) return std::numeric_limits<double>::infinity();
        return trial.nll_;
      };
      Rng rng(derive_seed(opt.seed, "gp.fit"));
      double best_val = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < std::max<std::size_t>(opt.restarts, 1); ++s) {
        Vector start(d);
        for (Eigen::Index j = 0; j < d; ++j) {
          start(j) = s == 0 ? 0.0 : uniform(rng, opt.log10_theta_lo, opt.log10_theta_hi);
        }
        const Vector cand = detail::nelder_mead(objective, start, 0.5, opt.log10_theta_lo, opt.log10_theta_hi,
                                                opt.max_evals_per_start);
        const double v = objective(cand);
        if (v < best_val) {
          best_val = v;
          log_theta = cand;
        }
      }
    }
    double nugget = opt.nugget;
    while (!gp.factorize(log_theta, nugget)) {
      nugget *= 10.0;
      if (nugget > opt.max_nugget) throw SurrogateError("correlation matrix singular even with jitter escalation");
    }
    return gp;
  }

  Prediction predict(const Vector& x) const {
    if (x.size() != x_.cols()) throw ShapeError("GP predict: input has wrong dimension");
    const Vector r = correlations(x);
    const double mean = mu_ + r.dot(alpha_);
    const Vector rinv_r = llt_.solve(r);
    const double one_term = 1.0 - ones_rinv_.dot(r);
    double var = sigma2_ * (1.0 + nugget_ - r.dot(rinv_r) + one_term * one_term / ones_rinv_ones_);
    var = std::max(var, 0.0);
    return {y_offset_ + y_scale_ * mean, var * y_scale_ * y_scale_};
  }

  Vector theta() const { return theta_; }
  double nugget() const { return nugget_; }
  double neg_log_likelihood() const { return nll_; }
  double process_variance() const { return sigma2_ * y_scale_ * y_scale_; }
  double process_mean() const { return y_offset_ + y_scale_ * mu_; }
  std::size_t n_observations() const { return static_cast<std::size_t>(x_.rows()); }

private:
  Vector correlations(const Vector& x) const {
    Vector r(x_.rows());
    for (Eigen::Index i = 0; i < x_.rows(); ++i) {
      r(i) = std::exp(-(theta_.array() * (x_.row(i).transpose() - x).array().square()).sum());
    }
    return r;
  }

  bool factorize(const Vector& log10_theta, double nugget) {
    theta_ = log10_theta.unaryExpr([](double v) { return std::pow(10.0, v); });
    nugget_ = nugget;
    const Eigen::Index n = x_.rows();
    Matrix corr(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      corr(i, i) = 1.0 + nugget;
      for (Eigen::Index j = 0; j < i; ++j) {
        const double v = std::exp(-(theta_.array() * (x_.row(i) - x_.row(j)).transpose().array().square()).sum());
        corr(i, j) = corr(j, i) = v;
      }
    }
    llt_.compute(corr);
    if (llt_.info() != Eigen::Success) return false;
    const Matrix& l = llt_.matrixLLT();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) return false;
    }
    ones_rinv_ = llt_.solve(Vector::Ones(n));
    ones_rinv_ones_ = ones_rinv_.sum();
    if (!(ones_rinv_ones_ > 0.0)) return false;
    mu_ = ones_rinv_.dot(y_) / ones_rinv_ones_;
    const Vector centered = y_.array() - mu_;
    alpha_ = llt_.solve(centered);
    sigma2_ = std::max(centered.dot(alpha_) / static_cast<double>(n), 0.0);
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    nll_ = 0.5 * static_cast<double>(n) * std::log(std::max(sigma2_, 1e-300)) + 0.5 * log_det;
    return std::isfinite(nll_);
  }

  Matrix x_;
  Vector y_;
  double y_offset_ = 0.0;
  double y_scale_ = 1.0;
  Vector theta_;
  double nugget_ = 0.0;
  Eigen::LLT<Matrix> llt_;
  Vector ones_rinv_;
  double ones_rinv_ones_ = 1.0;
  double mu_ = 0.0;
  Vector alpha_;
  double sigma2_ = 0.0;
  double nll_ = 0.0;
};

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Expected improvement below `best_observed` for a minimization problem.
inline double expected_improvement(const GaussianProcess::Prediction& p, double best_observed) {
  const double s = std::sqrt(p.variance);
  if (!(s > 0.0)) return 0.0;
  const double gap = best_observed - p.mean;
  const double z = gap / s;
  return gap * normal_cdf(z) + s * normal_pdf(z);
}

}  // namespace igsel
