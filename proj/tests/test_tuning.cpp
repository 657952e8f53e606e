#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "igsel/tuning.hpp"

using namespace igsel;

namespace {

SearchSpace one_real(double lo, double hi) {
  SearchSpace s;
  s.params = {{"lr_mult", ParamKind::Real, lo, hi, false, {}}};
  return s;
}

Objective quadratic(double centre) {
  return [centre](const HyperPoint& p, std::size_t) {
    const double d = p.values[0] - centre;
    return CvReport::from_folds({d * d});
  };
}

}  // namespace

TEST(SearchSpace, NetworkDefaultMaterializes) {
  const auto s = SearchSpace::network_default();
  EXPECT_EQ(s.size(), 8u);
  EXPECT_EQ(s.embedding_dim(), 6u + 3u + 2u);
  const HyperPoint p{{6, 7, 5, 0.1, 2.0, 4, 1, 0}};
  ASSERT_TRUE(s.feasible(p));
  const auto net = materialize(s, p);
  EXPECT_EQ(net.l1, 64u);
  EXPECT_EQ(net.epochs, 128u);
  EXPECT_EQ(net.batch_size, 32u);
  EXPECT_EQ(net.patience, 16u);
  EXPECT_EQ(net.dropout_prob, 0.1);
  EXPECT_EQ(net.lr_mult, 2.0);
  EXPECT_EQ(net.optimizer, Optimizer::Adamax);
  EXPECT_EQ(net.activation, Activation::ReLU);
  EXPECT_EQ(net.architecture(10).hidden_widths, (std::vector<std::size_t>{64, 32, 32, 16}));
  EXPECT_NE(s.describe(p).find("l1=64"), std::string::npos);
}

TEST(SearchSpace, SnapAndFeasibility) {
  const auto s = SearchSpace::network_default();
  const HyperPoint raw{{9.6, 4.2, 3.4, 0.3, -1.0, 4.5, 2.7, 0.2}};
  EXPECT_FALSE(s.feasible(raw));
  const auto snapped = s.snap(raw);
  EXPECT_TRUE(s.feasible(snapped));
  EXPECT_EQ(snapped.values, (std::vector<double>{9, 5, 3, 0.25, 0.25, 5, 2, 0}));
  EXPECT_FALSE(s.feasible(HyperPoint{{6, 7}}));
  EXPECT_THROW(materialize(s, raw), SpecificationError);
}

TEST(SearchSpace, EmbeddingIsUnitScaledAndOneHot) {
  const auto s = SearchSpace::network_default();
  const Vector lo = s.embed(HyperPoint{{5, 5, 3, 0.005, 0.25, 3, 2, 1}});
  const Vector hi = s.embed(HyperPoint{{9, 10, 6, 0.25, 5.0, 5, 0, 0}});
  for (Eigen::Index j = 0; j < 6; ++j) {
    EXPECT_NEAR(lo(j), 0.0, 1e-15);
    EXPECT_NEAR(hi(j), 1.0, 1e-15);
  }
  EXPECT_EQ(lo.tail(5), (Vector(5) << 0, 0, 1, 0, 1).finished());
  EXPECT_EQ(hi.tail(5), (Vector(5) << 1, 0, 0, 1, 0).finished());
}

TEST(InitialDesign, LatinStrata) {
  const auto s = one_real(0.0, 1.0);
  const auto pts = initial_design(s, 10, 3);
  ASSERT_EQ(pts.size(), 10u);
  std::set<int> strata;
  for (const auto& p : pts) strata.insert(static_cast<int>(std::floor(p.values[0] * 10.0)));
  EXPECT_EQ(strata.size(), 10u);
  EXPECT_EQ(initial_design(s, 10, 3), pts);
  EXPECT_NE(initial_design(s, 10, 4), pts);
  EXPECT_THROW(initial_design(s, 1, 3), SpecificationError);
}

TEST(InitialDesign, NetworkSpaceCoversGrids) {
  const auto s = SearchSpace::network_default();
  const auto pts = initial_design(s, 12, 5);
  std::set<double> optim, l1;
  for (const auto& p : pts) {
    EXPECT_TRUE(s.feasible(p));
    optim.insert(p.values[6]);
    l1.insert(p.values[0]);
  }
  // 12 strata over 3 levels and 5 integer values: every level and value appears.
  EXPECT_EQ(optim.size(), 3u);
  EXPECT_EQ(l1.size(), 5u);
}

TEST(GaussianProcess, InterpolatesObservations) {
  Matrix x(6, 2);
  Vector y(6);
  for (Eigen::Index i = 0; i < 6; ++i) {
    x(i, 0) = 0.17 * static_cast<double>(i);
    x(i, 1) = std::fmod(0.37 * static_cast<double>(i), 1.0);
    y(i) = std::sin(3.0 * x(i, 0)) + x(i, 1) * x(i, 1);
  }
  const auto gp = GaussianProcess::fit(x, y);
  for (Eigen::Index i = 0; i < 6; ++i) {
    const auto p = gp.predict(x.row(i).transpose());
    EXPECT_NEAR(p.mean, y(i), 1e-4);
    EXPECT_LE(p.variance, 1e-4 * gp.process_variance());
  }
  const auto far = gp.predict((Vector(2) << 10.0, -10.0).finished());
  EXPECT_NEAR(far.mean, gp.process_mean(), 1e-6);
  EXPECT_GT(far.variance, 0.5 * gp.process_variance());
}

// Two observations with correlation rho: the kriging mean is
// mu + (r1 - r2)(y1 - y2) / (2 (1 - rho)) with mu = (y1 + y2) / 2.
TEST(GaussianProcess, TwoPointClosedForm) {
  GpOptions opt;
  opt.fixed_theta = true;
  opt.fixed_log10_theta = 0.3;
  opt.nugget = 1e-12;
  const double theta = std::pow(10.0, 0.3);
  const Matrix x = (Matrix(2, 1) << 0.2, 0.9).finished();
  const Vector y = (Vector(2) << 1.5, -0.5).finished();
  const auto gp = GaussianProcess::fit(x, y, opt);
  EXPECT_NEAR(gp.theta()(0), theta, 1e-12);
  const double rho = std::exp(-theta * 0.49);
  for (double t : {0.0, 0.2, 0.55, 0.7, 1.3}) {
    const double r1 = std::exp(-theta * (t - 0.2) * (t - 0.2));
    const double r2 = std::exp(-theta * (t - 0.9) * (t - 0.9));
    const double expect = 0.5 + (r1 - r2) * 2.0 / (2.0 * (1.0 - rho));
    EXPECT_NEAR(gp.predict((Vector(1) << t).finished()).mean, expect, 1e-8) << t;
  }
  EXPECT_NEAR(gp.predict((Vector(1) << 0.55).finished()).mean, 0.5, 1e-10);
}

TEST(GaussianProcess, ConstantObservations) {
  const Matrix x = (Matrix(3, 1) << 0.0, 0.5, 1.0).finished();
  const Vector y = Vector::Constant(3, 2.0);
  const auto gp = GaussianProcess::fit(x, y);
  EXPECT_NEAR(gp.predict((Vector(1) << 0.25).finished()).mean, 2.0, 1e-12);
  EXPECT_THROW(GaussianProcess::fit(x.topRows(1), y.head(1)), SpecificationError);
  Vector bad = y;
  bad(1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(GaussianProcess::fit(x, bad), SpecificationError);
}

TEST(ExpectedImprovement, ClosedForm) {
  EXPECT_NEAR(expected_improvement({0.0, 1.0}, 0.0), 1.0 / std::sqrt(2.0 * M_PI), 1e-15);
  EXPECT_EQ(expected_improvement({1.0, 0.0}, 0.0), 0.0);
  EXPECT_EQ(expected_improvement({-1.0, 0.0}, 0.0), 0.0);
  // Far below the incumbent: EI approaches the gap.
  EXPECT_NEAR(expected_improvement({-10.0, 1.0}, 0.0), 10.0, 1e-12);
  EXPECT_GT(expected_improvement({0.0, 4.0}, 0.0), expected_improvement({0.0, 1.0}, 0.0));
}

TEST(Proposal, FindsQuadraticMinimum) {
  const auto s = one_real(0.0, 4.0);
  std::vector<HyperPoint> pts;
  std::vector<double> vals;
  for (double v : {0.0, 0.6, 2.0, 3.1, 4.0}) {
    pts.push_back({{v}});
    vals.push_back((v - 1.3) * (v - 1.3));
  }
  const auto sur = fit_surrogate(s, pts, vals);
  const auto p = propose_next(sur, s, pts, 1);
  EXPECT_TRUE(s.feasible(p.point));
  EXPECT_FALSE(p.random_fallback);
  EXPECT_NEAR(p.point.values[0], 1.3, 0.13);
  EXPECT_GT(p.expected_improvement, 0.0);
}

TEST(Proposal, SkipsEvaluatedPoints) {
  SearchSpace s;
  s.params = {{"optimizer", ParamKind::Categorical, 0, 0, false, {"a", "b", "c"}}};
  std::vector<HyperPoint> pts{{{0}}, {{1}}};
  const auto sur = fit_surrogate(s, pts, {1.0, 2.0});
  const auto p = propose_next(sur, s, pts, 2);
  EXPECT_EQ(p.point.values[0], 2.0);
}

TEST(CvReport, SummaryStatistics) {
  const auto r = CvReport::from_folds({1.0, 2.0, 3.0, 4.0, 5.0});
  EXPECT_DOUBLE_EQ(r.mean_mse, 3.0);
  EXPECT_NEAR(r.sd_mse, std::sqrt(2.5), 1e-15);
  EXPECT_FALSE(r.partial());
  const double inf = std::numeric_limits<double>::infinity();
  const auto p = CvReport::from_folds({1.0, inf, 3.0}, {1});
  EXPECT_TRUE(p.partial());
  EXPECT_DOUBLE_EQ(p.mean_mse, 2.0);
  EXPECT_NEAR(p.sd_mse, std::sqrt(2.0), 1e-15);
  EXPECT_FALSE(std::isfinite(CvReport::from_folds({inf}, {0}).mean_mse));
  EXPECT_EQ(CvReport::from_folds({0.5}).sd_mse, 0.0);
}

TEST(Tune, BudgetAccounting) {
  const auto s = one_real(0.25, 5.0);
  const auto run = tune(s, TuneBudget{10, 30}, 7, quadratic(1.0));
  EXPECT_EQ(run.observations.size(), 40u);
  EXPECT_EQ(run.incumbent.size(), 40u);
  std::size_t from_design = 0;
  for (std::size_t i = 0; i < run.observations.size(); ++i) {
    from_design += run.observations[i].from_initial_design;
    EXPECT_TRUE(s.feasible(run.observations[i].point));
    if (i) {
      EXPECT_LE(run.incumbent[i], run.incumbent[i - 1]);
    }
  }
  EXPECT_EQ(from_design, 10u);
  EXPECT_EQ(run.best().value, run.incumbent.back());
  EXPECT_NEAR(run.best().point.values[0], 1.0, 0.25);
  EXPECT_TRUE(run.surrogate.fitted);
}

TEST(Tune, ZeroInfillReturnsDesignArgmin) {
  const auto s = one_real(0.25, 5.0);
  const auto run = tune(s, TuneBudget{5, 0}, 8, quadratic(3.3));
  ASSERT_EQ(run.observations.size(), 5u);
  double best = 1e300;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    const double d = run.design[i].values[0] - 3.3;
    if (d * d < best) {
      best = d * d;
      arg = i;
    }
  }
  EXPECT_EQ(run.best_index, arg);
}

TEST(Tune, Reproducible) {
  const auto s = SearchSpace::network_default();
  auto objective = [&](const HyperPoint& p, std::size_t) {
    const double d = s.value(p, "lr_mult") - 1.0;
    return CvReport::from_folds({d * d + 0.01 * p.values[6] + 0.001 * s.value(p, "l1")});
  };
  const auto a = tune(s, TuneBudget{6, 4}, 9, objective);
  const auto b = tune(s, TuneBudget{6, 4}, 9, objective);
  ASSERT_EQ(a.observations.size(), b.observations.size());
  for (std::size_t i = 0; i < a.observations.size(); ++i) {
    EXPECT_EQ(a.observations[i].point, b.observations[i].point);
  }
}

TEST(Tune, FailedEvaluationsRecordedAsInfinite) {
  const auto s = one_real(0.0, 1.0);
  Objective flaky = [](const HyperPoint& p, std::size_t idx) -> CvReport {
    if (idx % 3 == 0) throw TrainingError("diverged", 0, 0.0);
    return CvReport::from_folds({p.values[0]});
  };
  const auto run = tune(s, TuneBudget{6, 3}, 10, flaky);
  EXPECT_EQ(run.observations.size(), 9u);
  EXPECT_FALSE(std::isfinite(run.observations[0].value));
  EXPECT_TRUE(std::isfinite(run.best().value));
}

TEST(CrossValidate, LinearTargetIsLearned) {
  Rng rng(40);
  const std::size_t n = 400;
  Matrix x(static_cast<Eigen::Index>(n), 3);
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = uniform(rng, -1.0, 1.0);
    y(i) = 0.8 * x(i, 0) - 0.5 * x(i, 1);
  }
  const Dataset data(x, y, default_column_names(3));
  const Split sp = split(n, SplitPlan{0.7, 5, 1});
  const ModelContext ctx{&data, &sp, 1};
  NetworkSettings net;
  net.l1 = 16;
  net.epochs = 200;
  net.batch_size = 16;
  net.patience = 20;
  net.lr_mult = 2.5;
  net.activation = Activation::LeakyReLU;
  const auto r = cross_validate(ctx, FeatureSubset{{0, 1, 2}, {}}, net, 3);
  ASSERT_EQ(r.fold_mses.size(), 5u);
  EXPECT_FALSE(r.partial());
  for (double m : r.fold_mses) EXPECT_LT(m, 1e-2);
  const auto again = cross_validate(ctx, FeatureSubset{{0, 1, 2}, {}}, net, 3);
  EXPECT_EQ(again.fold_mses, r.fold_mses);
  const auto h = holdout_score(ctx, FeatureSubset{{0, 1}, {}}, net, 3);
  EXPECT_EQ(h.fold_mses.size(), 1u);
  EXPECT_LT(h.mean_mse, 1e-2);
}
