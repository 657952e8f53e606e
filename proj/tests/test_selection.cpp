#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "igsel/lasso.hpp"
#include "igsel/selection.hpp"
#include "oracles.hpp"

using namespace igsel;

namespace {

double normal(Rng& rng) {
  const double u = 1.0 - uniform01(rng);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * 3.141592653589793 * uniform01(rng));
}

GlobalImportance scores_of(std::vector<double> v) { return {std::move(v), Aggregation::MeanAbsolute}; }

Dataset random_dataset(std::size_t n, std::size_t d, Rng& rng) {
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = normal(rng);
  return Dataset(x, y, default_column_names(d));
}

}  // namespace

TEST(KMeans, SeparatedGroups) {
  const std::vector<double> v{0.0, 0.1, 0.05, 5.0, 5.2, 10.0, 10.1};
  const auto r = kmeans_1d(v, 3, 1);
  EXPECT_EQ(r.k, 3u);
  EXPECT_EQ(r.assignments, (std::vector<std::size_t>{0, 0, 0, 1, 1, 2, 2}));
  EXPECT_EQ(r.lowest_cluster, 0u);
  EXPECT_EQ(r.members(0), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_NEAR(r.centroids[0], 0.05, 1e-15);
  EXPECT_NEAR(r.centroids[2], 10.05, 1e-12);
  EXPECT_DOUBLE_EQ(r.lowest_threshold(v), 0.1);
  EXPECT_NEAR(r.inertia, oracle::inertia(v, r.assignments, 3), 1e-12);
}

TEST(KMeans, KEqualsNGivesZeroInertia) {
  const std::vector<double> v{3.0, 1.0, 2.0, 7.0};
  const auto r = kmeans_1d(v, 4, 9);
  EXPECT_EQ(r.inertia, 0.0);
  EXPECT_EQ(r.assignments, (std::vector<std::size_t>{2, 0, 1, 3}));
}

TEST(KMeans, MatchesExhaustiveContiguousOptimum) {
  Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 3 + uniform_index(rng, 10);
    const std::size_t k = 2 + uniform_index(rng, std::min<std::size_t>(3, n - 1));
    std::vector<double> v(n);
    for (auto& x : v) x = t % 2 ? uniform01(rng) : std::exp(2.0 * normal(rng));
    const auto r = kmeans_1d(v, k, static_cast<std::uint64_t>(t));
    EXPECT_NEAR(r.inertia, oracle::best_contiguous_inertia(v, k), 1e-9) << "n=" << n << " k=" << k;
    EXPECT_NEAR(r.inertia, oracle::inertia(v, r.assignments, k), 1e-9);
  }
}

TEST(KMeans, LloydOnlyStillReachesOptimumOnEasyData) {
  Rng rng(22);
  KMeansOptions opt;
  opt.seed_with_optimal_partition = false;
  std::vector<double> v;
  for (double c : {0.0, 10.0, 20.0}) {
    for (int i = 0; i < 10; ++i) v.push_back(c + uniform01(rng));
  }
  const auto r = kmeans_1d(v, 3, 3, opt);
  EXPECT_NEAR(r.inertia, oracle::best_contiguous_inertia(v, 3), 1e-9);
}

TEST(KMeans, InertiaTraceNonIncreasing) {
  Rng rng(23);
  std::vector<double> v(80);
  for (auto& x : v) x = uniform01(rng);
  for (std::size_t k : {2u, 5u, 9u}) {
    const auto r = kmeans_1d(v, k, 4);
    ASSERT_FALSE(r.inertia_trace.empty());
    for (std::size_t i = 1; i < r.inertia_trace.size(); ++i) {
      EXPECT_LE(r.inertia_trace[i], r.inertia_trace[i - 1] + 1e-12);
    }
    EXPECT_LE(r.iterations, KMeansOptions{}.max_iterations);
  }
}

TEST(KMeans, Deterministic) {
  Rng rng(24);
  std::vector<double> v(40);
  for (auto& x : v) x = uniform01(rng);
  const auto a = kmeans_1d(v, 4, 11), b = kmeans_1d(v, 4, 11);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_EQ(a.centroids, b.centroids);
}

TEST(KMeans, Errors) {
  const std::vector<double> v{1.0, 1.0, 1.0, 2.0};
  EXPECT_THROW(kmeans_1d(v, 3, 0), ClusteringError);
  EXPECT_THROW(kmeans_1d(v, 1, 0), SpecificationError);
  EXPECT_THROW(kmeans_1d(v, 5, 0), SpecificationError);
  EXPECT_NO_THROW(kmeans_1d(v, 2, 0));
}

TEST(Elimination, TwoGroups) {
  const auto s = scores_of({0.01, 0.9, 0.02, 0.8, 0.015, 0.85});
  const std::vector<std::size_t> ks{2};
  const auto e = eliminate_lowest(s, ks, 1);
  ASSERT_EQ(e.subsets.size(), 1u);
  EXPECT_EQ(e.subsets[0].indices, (std::vector<std::size_t>{1, 3, 5}));
  EXPECT_EQ(e.subsets[0].provenance, (std::vector<std::string>{"k=2"}));
}

TEST(Elimination, MergesDuplicatesAndWarns) {
  const auto s = scores_of({0.0, 0.0, 0.0, 1.0, 1.0, 2.0});
  const std::vector<std::size_t> ks{2, 3, 4};
  const auto e = eliminate_lowest(s, ks, 1);
  ASSERT_EQ(e.subsets.size(), 1u);
  EXPECT_EQ(e.subsets[0].indices, (std::vector<std::size_t>{3, 4, 5}));
  EXPECT_EQ(format_k_list(e.subsets[0].provenance), "2, 3");
  ASSERT_EQ(e.warnings.size(), 1u);
  EXPECT_NE(e.warnings[0].find("k=4"), std::string::npos);
  EXPECT_EQ(e.clusterings.size(), 2u);
}

TEST(Elimination, PropertiesOnRandomScores) {
  Rng rng(25);
  const std::vector<std::size_t> ks{2, 3, 4, 5, 6, 7, 8, 9, 10};
  for (int t = 0; t < 20; ++t) {
    std::vector<double> v(30 + uniform_index(rng, 60));
    for (auto& x : v) x = uniform01(rng);
    const auto e = eliminate_lowest(scores_of(v), ks, static_cast<std::uint64_t>(t));
    EXPECT_LE(e.subsets.size(), ks.size());
    const std::size_t argmin = static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
    std::size_t provenance_total = 0;
    for (std::size_t i = 0; i < e.subsets.size(); ++i) {
      const auto& s = e.subsets[i];
      EXPECT_NO_THROW(s.validate(v.size()));
      EXPECT_FALSE(std::binary_search(s.indices.begin(), s.indices.end(), argmin));
      provenance_total += s.provenance.size();
      for (std::size_t j = 0; j < i; ++j) EXPECT_NE(s.indices, e.subsets[j].indices);
      // Every kept score beats every dropped one.
      double kept_min = 1e300, dropped_max = -1e300;
      for (std::size_t f = 0; f < v.size(); ++f) {
        if (std::binary_search(s.indices.begin(), s.indices.end(), f)) {
          kept_min = std::min(kept_min, v[f]);
        } else {
          dropped_max = std::max(dropped_max, v[f]);
        }
      }
      EXPECT_GT(kept_min, dropped_max);
    }
    EXPECT_EQ(provenance_total, ks.size());
  }
}

TEST(FormatKList, Ranges) {
  EXPECT_EQ(format_k_list({"k=2"}), "2");
  EXPECT_EQ(format_k_list({"k=5", "k=4"}), "4, 5");
  EXPECT_EQ(format_k_list({"k=6", "k=7", "k=8", "k=9", "k=10"}), "6-10");
  EXPECT_EQ(format_k_list({"k=2", "k=4", "k=5", "k=6"}), "2, 4-6");
  EXPECT_EQ(format_k_list({"all"}), "-");
}

TEST(Subset, Validate) {
  EXPECT_THROW((FeatureSubset{{}, {}}).validate(3), SpecificationError);
  EXPECT_THROW((FeatureSubset{{0, 3}, {}}).validate(3), SpecificationError);
  EXPECT_THROW((FeatureSubset{{1, 1}, {}}).validate(3), SpecificationError);
  EXPECT_NO_THROW(all_features(3).validate(3));
}

TEST(TopN, TiesAndOrder) {
  const std::vector<double> s{0.5, 0.9, 0.5, 0.1};
  EXPECT_EQ(top_n_by_score(s, 1).indices, (std::vector<std::size_t>{1}));
  EXPECT_EQ(top_n_by_score(s, 2).indices, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(top_n_by_score(s, 4).indices, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_THROW(top_n_by_score(s, 0), SpecificationError);
  EXPECT_THROW(top_n_by_score(s, 5), SpecificationError);
}

TEST(Complement, Basic) {
  EXPECT_EQ(complement(FeatureSubset{{1, 3}, {}}, 5).indices, (std::vector<std::size_t>{0, 2, 4}));
  EXPECT_THROW(complement(all_features(4), 4), SpecificationError);
  EXPECT_THROW(complement(FeatureSubset{{7}, {}}, 4), SpecificationError);
}

TEST(Pearson, PerfectAndConstant) {
  Matrix x(5, 3);
  Vector y(5);
  for (Eigen::Index i = 0; i < 5; ++i) {
    y(i) = static_cast<double>(i * i);
    x(i, 0) = 2.0 * y(i);
    x(i, 1) = 4.0;
    x(i, 2) = -y(i) + 1.0;
  }
  const Dataset d(x, y, default_column_names(3));
  const auto r = pearson_correlations(d, iota_indices(5));
  EXPECT_NEAR(r[0], 1.0, 1e-14);
  EXPECT_EQ(r[1], 0.0);
  EXPECT_NEAR(r[2], -1.0, 1e-14);
  const auto top = pearson_top_n(d, iota_indices(5), 2);
  EXPECT_EQ(top.indices, (std::vector<std::size_t>{0, 2}));
}

TEST(Pearson, MatchesTextbookFormulaOnSubsetOfRows) {
  Rng rng(26);
  const auto d = random_dataset(50, 6, rng);
  const RowIndices rows{1, 4, 5, 9, 10, 22, 31, 33, 40, 49};
  const auto r = pearson_correlations(d, rows);
  std::vector<double> yv;
  for (std::size_t row : rows) yv.push_back(d.target()(static_cast<Eigen::Index>(row)));
  for (std::size_t c = 0; c < 6; ++c) {
    std::vector<double> xv;
    for (std::size_t row : rows) xv.push_back(d.row(row)[c]);
    EXPECT_NEAR(r[c], oracle::pearson(xv, yv), 1e-12);
  }
}

TEST(Lasso, ZeroLambdaIsLeastSquares) {
  Rng rng(27);
  Matrix x(60, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  Vector y(60);
  for (Eigen::Index i = 0; i < 60; ++i) y(i) = normal(rng);
  const auto fit = lasso_fit(x, y, 0.0);
  // OLS with intercept via the augmented normal equations.
  Matrix a(60, 6);
  a.col(0).setOnes();
  a.rightCols(5) = x;
  const Vector beta = (a.transpose() * a).ldlt().solve(a.transpose() * y);
  EXPECT_NEAR(fit.intercept, beta(0), 1e-6);
  for (Eigen::Index j = 0; j < 5; ++j) EXPECT_NEAR(fit.coefficients(j), beta(j + 1), 1e-6);
}

TEST(Lasso, LambdaMaxZeroesEverything) {
  Rng rng(28);
  Matrix x(40, 7);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  Vector y = x.col(2) * 3.0 + Vector::Constant(40, 1.0);
  const double lmax = lasso_lambda_max(x, y);
  EXPECT_EQ(lasso_fit(x, y, lmax).nonzeros(), 0u);
  EXPECT_EQ(lasso_fit(x, y, 2.0 * lmax).nonzeros(), 0u);
  EXPECT_NEAR(lasso_fit(x, y, lmax).intercept, y.mean(), 1e-12);
  EXPECT_GT(lasso_fit(x, y, 0.99 * lmax).nonzeros(), 0u);
}

TEST(Lasso, OrthonormalDesignIsSoftThreshold) {
  Rng rng(29);
  const Eigen::Index n = 64, p = 6;
  Matrix g(n, p);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  // Columns with X'X / N = I.
  const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(n, p);
  const Matrix x = q * std::sqrt(static_cast<double>(n));
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = normal(rng);
  LassoOptions opt;
  opt.fit_intercept = false;
  for (double lambda : {0.0, 0.05, 0.1, 0.3}) {
    const auto fit = lasso_fit(x, y, lambda, opt);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double z = x.col(j).dot(y) / static_cast<double>(n);
      const double expect = std::copysign(std::max(std::abs(z) - lambda, 0.0), z);
      EXPECT_NEAR(fit.coefficients(j), expect, 1e-6);
    }
  }
}

TEST(Lasso, KktConditions) {
  Rng rng(30);
  for (int t = 0; t < 10; ++t) {
    Matrix x(80, 12);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < 80; ++i) x(i, 1) = 0.8 * x(i, 0) + 0.2 * x(i, 1);
    Vector y = 2.0 * x.col(0) - x.col(3) + 0.5 * x.col(7);
    for (Eigen::Index i = 0; i < 80; ++i) y(i) += 0.3 * normal(rng) + 4.0;
    const double lambda = lasso_lambda_max(x, y) * uniform(rng, 0.01, 0.5);
    const auto fit = lasso_fit(x, y, lambda);
    ASSERT_TRUE(fit.converged);
    const Vector r = y - (x * fit.coefficients).array().matrix() - Vector::Constant(80, fit.intercept);
    EXPECT_NEAR(r.sum(), 0.0, 1e-8);
    for (Eigen::Index j = 0; j < 12; ++j) {
      const double g = x.col(j).dot(r) / 80.0;
      if (fit.coefficients(j) != 0.0) {
        EXPECT_NEAR(g, lambda * (fit.coefficients(j) > 0 ? 1.0 : -1.0), 1e-6);
      } else {
        EXPECT_LE(std::abs(g), lambda + 1e-6);
      }
    }
  }
}

TEST(Lasso, SelectExactCount) {
  Rng rng(31);
  const std::size_t n = 200, d = 15;
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform01(rng);
  Vector y = Vector::Zero(static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < 10; ++j) y += (1.0 + static_cast<double>(j)) * x.col(j);
  const Dataset data(x, y, default_column_names(d));
  for (std::size_t want : {1u, 3u, 6u, 10u}) {
    const auto sel = lasso_select(data, iota_indices(n), want);
    EXPECT_TRUE(sel.exact);
    EXPECT_EQ(sel.subset.size(), want);
    EXPECT_EQ(sel.fit.nonzeros(), want);
    EXPECT_NO_THROW(sel.subset.validate(d));
  }
  // The strongest signal enters first.
  EXPECT_EQ(lasso_select(data, iota_indices(n), 1).subset.indices, (std::vector<std::size_t>{9}));
  EXPECT_THROW(lasso_select(data, iota_indices(n), 0), SpecificationError);
  EXPECT_THROW(lasso_select(data, iota_indices(n), d + 1), SpecificationError);
}
