#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "igsel/data.hpp"
#include "igsel/error.hpp"
#include "igsel/nn.hpp"
#include "igsel/parallel.hpp"
#include "igsel/quadrature.hpp"
#include "igsel/random.hpp"

namespace igsel {

enum class Quadrature { GaussLegendre, Riemann };
enum class AttributionMethod { IntegratedGradients, KernelShap };
enum class Aggregation { MeanAbsolute, MeanSigned };

inline const char* to_string(Quadrature q) { return q == Quadrature::GaussLegendre ? "gauss_legendre" : "riemann"; }
inline const char* to_string(AttributionMethod m) {
  return m == AttributionMethod::IntegratedGradients ? "integrated_gradients" : "kernel_shap";
}
inline const char* to_string(Aggregation a) { return a == Aggregation::MeanAbsolute ? "mean_absolute" : "mean_signed"; }

struct IgConfig {
  /// Empty means the all-zero vector of the model's input size.
  Vector baseline;
  std::size_t n_steps = 50;
  Quadrature quadrature = Quadrature::GaussLegendre;

  Vector baseline_for(std::size_t input_dim) const {
    if (baseline.size() == 0) return Vector::Zero(static_cast<Eigen::Index>(input_dim));
    if (static_cast<std::size_t>(baseline.size()) != input_dim) {
      throw ShapeError("IG baseline has " + std::to_string(baseline.size()) + " entries, model expects " +
                       std::to_string(input_dim));
    }
    return baseline;
  }

  QuadratureRule rule() const {
    if (n_steps == 0) throw SpecificationError("IG needs n_steps >= 1");
    return quadrature == Quadrature::GaussLegendre ? gauss_legendre(n_steps) : riemann_midpoint(n_steps);
  }
};

/// One attribution row per explained sample.
struct AttributionMatrix {
  Matrix values;
  AttributionMethod method = AttributionMethod::IntegratedGradients;
  /// IG: the baseline vector. KernelSHAP: the mean of the background rows.
  Vector baseline_record;
  RowIndices rows;
};

struct GlobalImportance {
  std::vector<double> scores;
  Aggregation aggregation = Aggregation::MeanAbsolute;
};

namespace detail {

inline Vector integrated_gradients_with_rule(const Mlp& model, std::span<const double> x, const Vector& baseline,
                                             const QuadratureRule& rule, std::size_t sample_index) {
  const auto d = static_cast<Eigen::Index>(model.input_dim());
  if (static_cast<Eigen::Index>(x.size()) != d) {
    throw ShapeError("sample has " + std::to_string(x.size()) + " features, model expects " + std::to_string(d));
  }
  const Eigen::Map<const Vector> xv(x.data(), d);
  const Vector diff = xv - baseline;
  const auto n = static_cast<Eigen::Index>(rule.nodes.size());
  Matrix path(n, d);
  for (Eigen::Index k = 0; k < n; ++k) {
    path.row(k) = (baseline + rule.nodes[static_cast<std::size_t>(k)] * diff).transpose();
  }
  const Matrix grads = model.input_gradients(path);
  if (!grads.allFinite()) {
    throw AttributionError("non-finite gradient while attributing sample " + std::to_string(sample_index),
                           sample_index);
  }
  const Eigen::Map<const Vector> w(rule.weights.data(), n);
  Vector avg = grads.transpose() * w;
  return diff.cwiseProduct(avg);
}

}  // namespace detail

/// (x_i - x'_i) times the path integral of dF/dx_i from the baseline x' to x,
/// approximated with the configured quadrature rule.
inline Vector integrated_gradients(const Mlp& model, std::span<const double> x, const IgConfig& cfg,
                                   std::size_t sample_index = 0) {
  return detail::integrated_gradients_with_rule(model, x, cfg.baseline_for(model.input_dim()), cfg.rule(),
                                                sample_index);
}

/// IG for every listed row; rows are independent and may run on `workers` threads.
inline AttributionMatrix attribute_dataset(const Mlp& model, const Dataset& data, std::span<const std::size_t> rows,
                                           const IgConfig& cfg, std::size_t workers = 1) {
  if (rows.empty()) throw SpecificationError("attribute_dataset needs at least one row");
  if (data.n_features() != model.input_dim()) throw ShapeError("dataset and model input sizes differ");
  const Vector baseline = cfg.baseline_for(model.input_dim());
  const QuadratureRule rule = cfg.rule();
  AttributionMatrix out;
  out.method = AttributionMethod::IntegratedGradients;
  out.baseline_record = baseline;
  out.rows.assign(rows.begin(), rows.end());
  out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(data.n_features()));
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    out.values.row(static_cast<Eigen::Index>(i)) =
        detail::integrated_gradients_with_rule(model, data.row(rows[i]), baseline, rule, rows[i]).transpose();
  });
  return out;
}

// ---------------------------------------------------------------------------
// KernelSHAP

struct KernelShapConfig {
  /// Number of coalitions (excluding the empty and full ones). When
  /// 2^M - 2 <= budget every coalition is enumerated with exact kernel weights.
  std::size_t budget = 2048;
  std::uint64_t seed = 0;
};

struct ShapResult {
  Vector phi;
  double base_value = 0.0;  // v(empty)
  double full_value = 0.0;  // v(all)
  bool exhaustive = false;
  bool ridge_fallback = false;
  std::size_t n_coalitions = 0;
};

namespace detail {

inline double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

/// Shapley kernel weight of one coalition of size s among m features.
inline double shapley_kernel(std::size_t m, std::size_t s) {
  return static_cast<double>(m - 1) /
         (binomial(m, s) * static_cast<double>(s) * static_cast<double>(m - s));
}

/// v(z) = mean over background rows b of F(x on z, b elsewhere), for each
/// coalition mask (row of `masks`, entries 0/1).
inline Vector coalition_values(const Mlp& model, std::span<const double> x, const Matrix& background,
                               const Matrix& masks) {
  const Eigen::Index n_bg = background.rows();
  const Eigen::Index m = background.cols();
  Vector values(masks.rows());
  const Eigen::Index per_chunk = std::max<Eigen::Index>(1, 4096 / n_bg);
  Matrix batch;
  for (Eigen::Index start = 0; start < masks.rows(); start += per_chunk) {
    const Eigen::Index len = std::min(per_chunk, masks.rows() - start);
    batch.resize(len * n_bg, m);
    for (Eigen::Index c = 0; c < len; ++c) {
      for (Eigen::Index b = 0; b < n_bg; ++b) {
        for (Eigen::Index j = 0; j < m; ++j) {
          batch(c * n_bg + b, j) = masks(start + c, j) != 0.0 ? x[static_cast<std::size_t>(j)] : background(b, j);
        }
      }
    }
    const Vector pred = model.forward_batch(batch);
    for (Eigen::Index c = 0; c < len; ++c) values(start + c) = pred.segment(c * n_bg, n_bg).mean();
  }
  return values;
}

}  // namespace detail

/// Shapley values of F at x, with absent features filled from the background
/// rows, from the Shapley-kernel weighted regression with the efficiency
/// constraint sum(phi) = v(all) - v(empty) eliminated analytically.
inline ShapResult kernel_shap(const Mlp& model, std::span<const double> x, const Matrix& background,
                              const KernelShapConfig& cfg) {
  const std::size_t m = model.input_dim();
  if (x.size() != m || static_cast<std::size_t>(background.cols()) != m) {
    throw ShapeError("kernel_shap: sample/background width differs from model input size");
  }
  if (background.rows() == 0) throw SpecificationError("kernel_shap needs a nonempty background");
  const auto mi = static_cast<Eigen::Index>(m);

  ShapResult res;
  {
    Matrix ends(2, mi);
    ends.row(0).setZero();
    ends.row(1).setOnes();
    const Vector v = detail::coalition_values(model, x, background, ends);
    res.base_value = v(0);
    res.full_value = v(1);
  }
  const double delta = res.full_value - res.base_value;
  res.phi = Vector::Zero(mi);
  if (m == 1) {
    res.phi(0) = delta;
    res.exhaustive = true;
    return res;
  }

  // Coalition masks and their regression weights.
  Matrix masks;
  std::vector<double> weights;
  const bool can_enumerate = m < 31 && ((std::size_t{1} << m) - 2) <= cfg.budget;
  if (can_enumerate) {
    const std::size_t total = (std::size_t{1} << m) - 2;
    masks.resize(static_cast<Eigen::Index>(total), mi);
    weights.resize(total);
    for (std::size_t code = 1; code <= total; ++code) {
      std::size_t size = 0;
      for (std::size_t j = 0; j < m; ++j) {
        const bool on = (code >> j) & 1U;
        masks(static_cast<Eigen::Index>(code - 1), static_cast<Eigen::Index>(j)) = on ? 1.0 : 0.0;
        size += on;
      }
      weights[code - 1] = detail::shapley_kernel(m, size);
    }
    res.exhaustive = true;
  } else {
    if (cfg.budget < m + 2) throw SpecificationError("kernel_shap budget must be at least n_features + 2");
    // Sizes drawn with probability proportional to the total kernel weight of
    // that size, members uniformly; each draw is paired with its complement
    // and all draws carry equal weight.
    Rng rng(derive_seed(cfg.seed, "kernel_shap"));
    std::vector<double> size_cdf(m - 1);
    double acc = 0.0;
    for (std::size_t s = 1; s < m; ++s) {
      acc += static_cast<double>(m - 1) / (static_cast<double>(s) * static_cast<double>(m - s));
      size_cdf[s - 1] = acc;
    }
    const std::size_t pairs = cfg.budget / 2;
    masks = Matrix::Zero(static_cast<Eigen::Index>(2 * pairs), mi);
    weights.assign(2 * pairs, 1.0);
    std::vector<std::size_t> order = iota_indices(m);
    for (std::size_t p = 0; p < pairs; ++p) {
      const double u = uniform01(rng) * acc;
      const std::size_t s = static_cast<std::size_t>(std::upper_bound(size_cdf.begin(), size_cdf.end(), u) -
                                                     size_cdf.begin()) + 1;
      // Partial Fisher-Yates picks s distinct members.
      for (std::size_t j = 0; j < s; ++j) std::swap(order[j], order[j + uniform_index(rng, m - j)]);
      const auto r = static_cast<Eigen::Index>(2 * p);
      masks.row(r + 1).setOnes();
      for (std::size_t j = 0; j < s; ++j) {
        masks(r, static_cast<Eigen::Index>(order[j])) = 1.0;
        masks(r + 1, static_cast<Eigen::Index>(order[j])) = 0.0;
      }
    }
  }
  res.n_coalitions = static_cast<std::size_t>(masks.rows());

  const Vector values = detail::coalition_values(model, x, background, masks);
  // phi_last = delta - sum(phi_rest); regress the rest.
  const Eigen::Index k = mi - 1;
  Matrix design(masks.rows(), k);
  Vector y(masks.rows());
  for (Eigen::Index r = 0; r < masks.rows(); ++r) {
    const double z_last = masks(r, k);
    design.row(r) = masks.row(r).head(k).array() - z_last;
    y(r) = values(r) - res.base_value - z_last * delta;
  }
  const Eigen::Map<const Vector> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  const Matrix gram = design.transpose() * w.asDiagonal() * design;
  const Vector rhs = design.transpose() * w.asDiagonal() * y;

  Eigen::LDLT<Matrix> ldlt(gram);
  Vector head;
  const double scale = std::max(gram.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  const double min_pivot = ldlt.vectorD().cwiseAbs().minCoeff();
  if (ldlt.info() == Eigen::Success && min_pivot > 1e-12 * scale) {
    head = ldlt.solve(rhs);
  } else {
    res.ridge_fallback = true;
    const Matrix ridged = gram + 1e-8 * scale * Matrix::Identity(k, k);
    head = ridged.ldlt().solve(rhs);
  }
  res.phi.head(k) = head;
  res.phi(k) = delta - head.sum();
  return res;
}

/// KernelSHAP for every listed row against a shared background.
inline AttributionMatrix attribute_dataset_shap(const Mlp& model, const Dataset& data,
                                                std::span<const std::size_t> rows, const Matrix& background,
                                                const KernelShapConfig& cfg, std::size_t workers = 1) {
  if (rows.empty()) throw SpecificationError("attribute_dataset_shap needs at least one row");
  AttributionMatrix out;
  out.method = AttributionMethod::KernelShap;
  out.baseline_record = background.colwise().mean().transpose();
  out.rows.assign(rows.begin(), rows.end());
  out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(data.n_features()));
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    KernelShapConfig c = cfg;
    c.seed = derive_seed(cfg.seed, "kernel_shap.row", {rows[i]});
    const ShapResult r = kernel_shap(model, data.row(rows[i]), background, c);
    if (!r.phi.allFinite()) throw AttributionError("non-finite Shapley value for sample " + std::to_string(rows[i]), rows[i]);
    out.values.row(static_cast<Eigen::Index>(i)) = r.phi.transpose();
  });
  return out;
}

// ---------------------------------------------------------------------------
// Global importance.

/// MeanAbsolute: mean_r |a_ri|. MeanSigned: |mean_r a_ri|.
inline GlobalImportance aggregate(const AttributionMatrix& attr, Aggregation mode = Aggregation::MeanAbsolute) {
  if (attr.values.rows() == 0 || attr.values.cols() == 0) throw SpecificationError("aggregate needs a nonempty matrix");
  GlobalImportance g;
  g.aggregation = mode;
  g.scores.resize(static_cast<std::size_t>(attr.values.cols()));
  for (Eigen::Index c = 0; c < attr.values.cols(); ++c) {
    g.scores[static_cast<std::size_t>(c)] = mode == Aggregation::MeanAbsolute
                                                ? attr.values.col(c).cwiseAbs().mean()
                                                : std::abs(attr.values.col(c).mean());
  }
  return g;
}

/// Min-max affine map of the scores onto [lo, hi].
inline std::vector<double> scale_to_range(std::span<const double> scores, double lo, double hi) {
  if (!(hi > lo)) throw SpecificationError("scale_to_range needs hi > lo");
  if (scores.empty()) throw SpecificationError("scale_to_range needs scores");
  const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
  if (!(*mx > *mn)) throw SpecificationError("scale_to_range: all scores are equal");
  const double a = *mn, span = *mx - *mn;
  std::vector<double> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(lo + (s - a) / span * (hi - lo));
  return out;
}

inline std::vector<double> scale_to_range(const GlobalImportance& g, double lo, double hi) {
  return scale_to_range(std::span<const double>(g.scores), lo, hi);
}

}  // namespace igsel
