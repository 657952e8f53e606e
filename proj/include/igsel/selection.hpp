#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "igsel/attribution.hpp"
#include "igsel/data.hpp"
#include "igsel/error.hpp"
#include "igsel/random.hpp"

namespace igsel {

/// Retained column indices (sorted, unique) plus what produced them, e.g.
/// {"k=4", "k=5"}, {"pearson"} or {"cross-check"}.
struct FeatureSubset {
  std::vector<std::size_t> indices;
  std::vector<std::string> provenance;

  std::size_t size() const noexcept { return indices.size(); }

  void validate(std::size_t n_features) const {
    if (indices.empty()) throw SpecificationError("feature subset is empty");
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] >= n_features) throw SpecificationError("feature subset index out of range");
      if (i > 0 && indices[i] <= indices[i - 1]) throw SpecificationError("feature subset must be sorted and unique");
    }
  }
};

inline FeatureSubset all_features(std::size_t n_features) {
  return {iota_indices(n_features), {"all"}};
}

/// "2", "4, 5", "6-10": runs of three or more consecutive k collapse to a range.
inline std::string format_k_list(const std::vector<std::string>& provenance) {
  std::vector<long> ks;
  for (const auto& p : provenance) {
    if (p.rfind("k=", 0) == 0) ks.push_back(std::stol(p.substr(2)));
  }
  if (ks.empty()) return "-";
  std::sort(ks.begin(), ks.end());
  std::string out;
  for (std::size_t i = 0; i < ks.size();) {
    std::size_t j = i;
    while (j + 1 < ks.size() && ks[j + 1] == ks[j] + 1) ++j;
    auto append = [&](const std::string& s) { out += (out.empty() ? "" : ", ") + s; };
    if (j - i >= 2) {
      append(std::to_string(ks[i]) + "-" + std::to_string(ks[j]));
    } else {
      for (std::size_t t = i; t <= j; ++t) append(std::to_string(ks[t]));
    }
    i = j + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// One-dimensional k-means.

struct ClusterResult {
  std::size_t k = 0;
  /// Cluster ids are ordered by centroid: 0 has the smallest centroid.
  std::vector<std::size_t> assignments;
  std::vector<double> centroids;
  std::size_t lowest_cluster = 0;
  double inertia = 0.0;
  std::size_t iterations = 0;
  /// Inertia after each assignment step of the winning run.
  std::vector<double> inertia_trace;

  std::vector<std::size_t> members(std::size_t cluster) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
      if (assignments[i] == cluster) out.push_back(i);
    }
    return out;
  }

  /// Largest value inside the lowest cluster.
  double lowest_threshold(std::span<const double> values) const {
    double t = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < assignments.size(); ++i) {
      if (assignments[i] == lowest_cluster) t = std::max(t, values[i]);
    }
    return t;
  }
};

struct KMeansOptions {
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  /// Adds one Lloyd run started from the optimal 1-D partition.
  bool seed_with_optimal_partition = true;
};

namespace detail {

inline double sum_sq_dist(std::span<const double> v, std::span<const std::size_t> assign,
                          const std::vector<double>& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - centroids[assign[i]];
    s += d * d;
  }
  return s;
}

/// Lloyd iterations from the given centroids until assignments stop changing.
inline ClusterResult lloyd_1d(std::span<const double> v, std::vector<double> centroids, std::size_t max_iterations) {
  const std::size_t k = centroids.size();
  ClusterResult res;
  res.k = k;
  res.assignments.assign(v.size(), k);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = std::abs(v[i] - centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.assignments[i] != best) {
        res.assignments[i] = best;
        changed = true;
      }
    }
    res.iterations = it + 1;
    // Re-seed an emptied cluster at the point farthest from its centroid.
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t a : res.assignments) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = std::abs(v[i] - centroids[res.assignments[i]]);
        if (counts[res.assignments[i]] > 1 && d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --counts[res.assignments[far]];
      res.assignments[far] = c;
      counts[c] = 1;
      changed = true;
    }
    res.inertia_trace.push_back(sum_sq_dist(v, res.assignments, centroids));
    std::vector<double> sums(k, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) sums[res.assignments[i]] += v[i];
    for (std::size_t c = 0; c < k; ++c) centroids[c] = sums[c] / static_cast<double>(counts[c]);
    if (!changed && it > 0) break;
  }
  res.centroids = std::move(centroids);
  res.inertia = sum_sq_dist(v, res.assignments, res.centroids);
  return res;
}

inline std::vector<double> kmeans_pp_init(std::span<const double> v, std::size_t k, Rng& rng) {
  std::vector<double> centroids{v[uniform_index(rng, v.size())]};
  std::vector<double> d2(v.size());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centroids) best = std::min(best, (v[i] - c) * (v[i] - c));
      d2[i] = best;
      total += best;
    }
    const double u = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t pick = v.size() - 1;
    for (std::size_t i = 0; i < v.size(); ++i) {
      acc += d2[i];
      if (d2[i] > 0.0 && acc > u) {
        pick = i;
        break;
      }
    }
    // Guard against rounding landing on an already chosen value.
    if (d2[pick] == 0.0) {
      pick = static_cast<std::size_t>(std::max_element(d2.begin(), d2.end()) - d2.begin());
    }
    centroids.push_back(v[pick]);
  }
  return centroids;
}

/// Centroids of the minimum-inertia partition of 1-D data into k groups that
/// are contiguous in sorted order, by dynamic programming over prefix sums.
inline std::vector<double> optimal_partition_centroids(std::span<const double> v, std::size_t k) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  std::vector<double> p1(n + 1, 0.0), p2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    p1[i + 1] = p1[i] + s[i];
    p2[i + 1] = p2[i] + s[i] * s[i];
  }
  auto cost = [&](std::size_t a, std::size_t b) {  // elements [a, b)
    const double cnt = static_cast<double>(b - a);
    const double sum = p1[b] - p1[a];
    return std::max(0.0, (p2[b] - p2[a]) - sum * sum / cnt);
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best(k + 1, std::vector<double>(n + 1, inf));
  std::vector<std::vector<std::size_t>> cut(k + 1, std::vector<std::size_t>(n + 1, 0));
  best[0][0] = 0.0;
  for (std::size_t c = 1; c <= k; ++c) {
    for (std::size_t j = c; j <= n; ++j) {
      for (std::size_t i = c - 1; i < j; ++i) {
        if (best[c - 1][i] == inf) continue;
        const double val = best[c - 1][i] + cost(i, j);
        if (val < best[c][j]) {
          best[c][j] = val;
          cut[c][j] = i;
        }
      }
    }
  }
  std::vector<double> centroids(k);
  std::size_t j = n;
  for (std::size_t c = k; c >= 1; --c) {
    const std::size_t i = cut[c][j];
    centroids[c - 1] = (p1[j] - p1[i]) / static_cast<double>(j - i);
    j = i;
  }
  return centroids;
}

inline void relabel_by_centroid(ClusterResult& r) {
  std::vector<std::size_t> order = iota_indices(r.k);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r.centroids[a] < r.centroids[b]; });
  std::vector<std::size_t> rank(r.k);
  for (std::size_t i = 0; i < r.k; ++i) rank[order[i]] = i;
  for (auto& a : r.assignments) a = rank[a];
  std::vector<double> sorted(r.k);
  for (std::size_t i = 0; i < r.k; ++i) sorted[i] = r.centroids[order[i]];
  r.centroids = std::move(sorted);
  r.lowest_cluster = 0;
}

}  // namespace detail

/// Lloyd's algorithm on scalar values with k-means++ starts; the lowest
/// inertia over all runs wins (earliest run on ties).
inline ClusterResult kmeans_1d(std::span<const double> values, std::size_t k, std::uint64_t seed,
                               const KMeansOptions& opt = {}) {
  if (k < 2 || k > values.size()) {
    throw SpecificationError("kmeans_1d needs 2 <= k <= number of values (k=" + std::to_string(k) + ")");
  }
  std::vector<double> distinct(values.begin(), values.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (k > distinct.size()) {
    throw ClusteringError("k=" + std::to_string(k) + " exceeds the " + std::to_string(distinct.size()) +
                          " distinct values");
  }
  ClusterResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  auto consider = [&](ClusterResult r) {
    if (r.inertia < best.inertia) best = std::move(r);
  };
  for (std::size_t run = 0; run < std::max<std::size_t>(opt.restarts, 1); ++run) {
    Rng rng(derive_seed(seed, "kmeans", {k, run}));
    consider(detail::lloyd_1d(values, detail::kmeans_pp_init(values, k, rng), opt.max_iterations));
  }
  if (opt.seed_with_optimal_partition) {
    consider(detail::lloyd_1d(values, detail::optimal_partition_centroids(values, k), opt.max_iterations));
  }
  detail::relabel_by_centroid(best);
  return best;
}

inline ClusterResult kmeans_1d(const GlobalImportance& scores, std::size_t k, std::uint64_t seed,
                               const KMeansOptions& opt = {}) {
  return kmeans_1d(std::span<const double>(scores.scores), k, seed, opt);
}

struct Elimination {
  /// Deduplicated subsets in order of first appearance.
  std::vector<FeatureSubset> subsets;
  std::vector<ClusterResult> clusterings;  // one per clustered k, in input order
  std::vector<std::string> warnings;
};

/// For every k: cluster the scores, drop the lowest-centroid cluster and keep
/// the rest. Identical subsets are merged and their k values collected.
inline Elimination eliminate_lowest(const GlobalImportance& scores, std::span<const std::size_t> k_values,
                                    std::uint64_t seed, const KMeansOptions& opt = {}) {
  Elimination out;
  for (std::size_t k : k_values) {
    ClusterResult cr;
    try {
      cr = kmeans_1d(scores, k, seed, opt);
    } catch (const ClusteringError& e) {
      out.warnings.push_back("k=" + std::to_string(k) + ": " + e.what());
      continue;
    }
    FeatureSubset s;
    for (std::size_t i = 0; i < cr.assignments.size(); ++i) {
      if (cr.assignments[i] != cr.lowest_cluster) s.indices.push_back(i);
    }
    s.provenance.push_back("k=" + std::to_string(k));
    out.clusterings.push_back(std::move(cr));
    if (s.indices.empty()) {
      out.warnings.push_back("k=" + std::to_string(k) + ": eliminating the lowest cluster would remove every feature");
      continue;
    }
    auto it = std::find_if(out.subsets.begin(), out.subsets.end(),
                           [&](const FeatureSubset& f) { return f.indices == s.indices; });
    if (it != out.subsets.end()) {
      it->provenance.push_back(s.provenance.front());
    } else {
      out.subsets.push_back(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ranking selectors.

/// Indices of the n largest scores; ties go to the lower index. Returned sorted.
inline FeatureSubset top_n_by_score(std::span<const double> scores, std::size_t n, std::string method = "top_n") {
  if (n == 0) throw SpecificationError("top_n_by_score needs n >= 1");
  if (n > scores.size()) throw SpecificationError("top_n_by_score: n exceeds the number of features");
  std::vector<std::size_t> order = iota_indices(scores.size());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  FeatureSubset s{{order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n)}, {std::move(method)}};
  std::sort(s.indices.begin(), s.indices.end());
  return s;
}

inline FeatureSubset top_n_by_score(const GlobalImportance& g, std::size_t n, std::string method = "top_n") {
  return top_n_by_score(std::span<const double>(g.scores), n, std::move(method));
}

/// Pearson r of each feature with the target over the given rows; constant
/// columns (or a constant target) give r = 0.
inline std::vector<double> pearson_correlations(const Dataset& data, std::span<const std::size_t> rows) {
  if (rows.empty()) throw SpecificationError("pearson_correlations needs rows");
  const double n = static_cast<double>(rows.size());
  double ty = 0.0;
  for (std::size_t r : rows) ty += data.target()(static_cast<Eigen::Index>(r));
  const double my = ty / n;
  std::vector<double> out(data.n_features(), 0.0);
  for (std::size_t c = 0; c < data.n_features(); ++c) {
    double mx = 0.0;
    for (std::size_t r : rows) mx += data.features()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    mx /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t r : rows) {
      const double dx = data.features()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) - mx;
      const double dy = data.target()(static_cast<Eigen::Index>(r)) - my;
      sxy += dx * dy;
      sxx += dx * dx;
      syy += dy * dy;
    }
    out[c] = (sxx > 0.0 && syy > 0.0) ? sxy / std::sqrt(sxx * syy) : 0.0;
  }
  return out;
}

inline FeatureSubset pearson_top_n(const Dataset& data, std::span<const std::size_t> rows, std::size_t n) {
  if (n == 0) throw SpecificationError("pearson_top_n needs n >= 1");
  auto r = pearson_correlations(data, rows);
  for (auto& v : r) v = std::abs(v);
  return top_n_by_score(r, n, "pearson");
}

/// Every feature not in `subset`.
inline FeatureSubset complement(const FeatureSubset& subset, std::size_t n_features) {
  std::vector<bool> in(n_features, false);
  for (std::size_t i : subset.indices) {
    if (i >= n_features) throw SpecificationError("subset index out of range");
    in[i] = true;
  }
  FeatureSubset out;
  out.provenance = {"cross-check"};
  for (std::size_t i = 0; i < n_features; ++i) {
    if (!in[i]) out.indices.push_back(i);
  }
  if (out.indices.empty()) throw SpecificationError("complement of the full feature set is empty");
  return out;
}

}  // namespace igsel
