#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "igsel/data.hpp"

using namespace igsel;

namespace {

Dataset make(const std::vector<std::vector<double>>& rows, const std::vector<double>& y) {
  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  Vector t = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
  return Dataset(x, t, default_column_names(static_cast<std::size_t>(x.cols())));
}

Dataset random_dataset(std::size_t n, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = uniform(rng, -3.0, 5.0) * static_cast<double>(c + 1);
    y(r) = uniform(rng, -2.0, 2.0);
  }
  return Dataset(x, y, default_column_names(m));
}

}  // namespace

TEST(Dataset, RejectsMismatchedShapes) {
  EXPECT_THROW(Dataset(Matrix::Zero(3, 2), Vector::Zero(2), {"a", "b"}), ShapeError);
  EXPECT_THROW(Dataset(Matrix::Zero(3, 2), Vector::Zero(3), {"a"}), ShapeError);
}

TEST(GenerateDummy, DefaultShape) {
  DummySpec spec;
  spec.seed = 3;
  const auto d = generate_dummy(spec);
  EXPECT_EQ(d.data.n_samples(), 27857u);
  EXPECT_EQ(d.data.n_features(), 86u);
  EXPECT_EQ(d.truth.zero_indices.size(), 28u);
  for (std::size_t i = 0; i < 29; ++i) {
    EXPECT_GE(d.truth.coefficients[i], 0.1);
    EXPECT_LE(d.truth.coefficients[i], 1.0);
  }
  for (std::size_t i = 29; i < 58; ++i) {
    EXPECT_GE(d.truth.coefficients[i], -1.0);
    EXPECT_LE(d.truth.coefficients[i], -0.1);
  }
  for (std::size_t i = 58; i < 86; ++i) {
    EXPECT_EQ(d.truth.coefficients[i], 0.0);
    EXPECT_TRUE(d.truth.zero_indices.count(i));
  }
}

TEST(GenerateDummy, AllZeroCoefficientsGiveZeroTarget) {
  DummySpec spec{5, 0, 0, 5};
  spec.n_samples = 50;
  const auto d = generate_dummy(spec);
  EXPECT_TRUE((d.data.target().array() == 0.0).all());
}

TEST(GenerateDummy, TargetIsRecomputedMatVec) {
  DummySpec spec{3, 1, 1, 1};
  spec.n_samples = 200;
  spec.seed = 7;
  const auto d = generate_dummy(spec);
  for (std::size_t r = 0; r < d.data.n_samples(); ++r) {
    double y = 0.0;
    for (std::size_t c = 0; c < 3; ++c) y += d.truth.coefficients[c] * d.data.row(r)[c];
    EXPECT_NEAR(d.data.target()(static_cast<Eigen::Index>(r)), y, 1e-12 * std::max(1.0, std::abs(y)));
  }
}

TEST(GenerateDummy, LinearConsistencyAndFeatureRange) {
  DummySpec spec;
  spec.n_samples = 2000;
  spec.seed = 11;
  const auto d = generate_dummy(spec);
  const auto& x = d.data.features();
  EXPECT_GE(x.minCoeff(), 0.0);
  EXPECT_LT(x.maxCoeff(), 1.0);
  for (std::size_t r = 0; r < d.data.n_samples(); ++r) {
    long double y = 0.0L;
    for (std::size_t c = 0; c < 86; ++c) y += static_cast<long double>(d.truth.coefficients[c]) * d.data.row(r)[c];
    const double t = d.data.target()(static_cast<Eigen::Index>(r));
    EXPECT_LE(std::abs(t - static_cast<double>(y)), 1e-12 * std::max(1.0, std::abs(t)));
  }
}

TEST(GenerateDummy, Deterministic) {
  DummySpec spec;
  spec.n_samples = 300;
  spec.seed = 5;
  const auto a = generate_dummy(spec), b = generate_dummy(spec);
  EXPECT_TRUE(a.data.features() == b.data.features());
  EXPECT_TRUE(a.data.target() == b.data.target());
  EXPECT_EQ(a.truth.coefficients, b.truth.coefficients);
  spec.seed = 6;
  EXPECT_FALSE(generate_dummy(spec).data.features() == a.data.features());
}

TEST(GenerateDummy, InvalidCountsRejected) {
  DummySpec spec{10, 3, 3, 3};
  EXPECT_THROW(generate_dummy(spec), SpecificationError);
  DummySpec bad_range{3, 1, 1, 1};
  bad_range.positive_range = {0.0, 1.0};
  EXPECT_THROW(generate_dummy(bad_range), SpecificationError);
  DummySpec bad_neg{3, 1, 1, 1};
  bad_neg.negative_range = {-1.0, 0.0};
  EXPECT_THROW(generate_dummy(bad_neg), SpecificationError);
}

TEST(GroundTruthTable, RoundTrip) {
  DummySpec spec{6, 2, 2, 2};
  spec.n_samples = 3;
  const auto d = generate_dummy(spec);
  std::istringstream in(to_csv_string(ground_truth_table(d.truth)));
  const auto back = ground_truth_from_table(parse_csv(in));
  EXPECT_EQ(back.coefficients, d.truth.coefficients);
  EXPECT_EQ(back.zero_indices, d.truth.zero_indices);
}

TEST(FitScaler, TwoPointColumn) {
  const auto d = make({{1.0}, {3.0}}, {0, 0});
  const RowIndices rows{0, 1};
  const auto s = fit_scaler(d, rows);
  EXPECT_DOUBLE_EQ(s.means(0), 2.0);
  EXPECT_DOUBLE_EQ(s.stds(0), 1.0);
  EXPECT_EQ(s.fitted_on, 2u);
}

TEST(FitScaler, IdempotentOnStandardizedData) {
  const auto d = random_dataset(100, 4, 1);
  const auto rows = iota_indices(100);
  const auto z = fit_scaler(d, rows).transform(d);
  const auto s = fit_scaler(z, rows);
  for (Eigen::Index c = 0; c < 4; ++c) {
    EXPECT_NEAR(s.means(c), 0.0, 1e-12);
    EXPECT_NEAR(s.stds(c), 1.0, 1e-12);
  }
}

TEST(FitScaler, MatchesTwoPassOracle) {
  const auto d = random_dataset(100, 5, 2);
  RowIndices rows;
  for (std::size_t r = 0; r < 100; r += 1) rows.push_back(r);
  const auto s = fit_scaler(d, rows);
  for (std::size_t c = 0; c < 5; ++c) {
    double mean = 0.0;
    for (std::size_t r : rows) mean += d.row(r)[c];
    mean /= static_cast<double>(rows.size());
    double var = 0.0;
    for (std::size_t r : rows) var += (d.row(r)[c] - mean) * (d.row(r)[c] - mean);
    const double sd = std::sqrt(var / static_cast<double>(rows.size()));
    EXPECT_NEAR(s.means(static_cast<Eigen::Index>(c)), mean, 1e-12 * std::max(1.0, std::abs(mean)));
    EXPECT_NEAR(s.stds(static_cast<Eigen::Index>(c)), sd, 1e-12 * std::max(1.0, sd));
  }
}

TEST(FitScaler, ConstantColumnShiftsOnly) {
  const auto d = make({{4.0, 1.0}, {4.0, 2.0}, {4.0, 3.0}}, {0, 0, 0});
  const RowIndices rows{0, 1, 2};
  const auto s = fit_scaler(d, rows);
  EXPECT_EQ(s.stds(0), 1.0);
  const auto z = s.transform(d);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(z.row(r)[0], 0.0);
}

TEST(FitScaler, EmptyRowsRejected) {
  const auto d = random_dataset(5, 2, 3);
  EXPECT_THROW(fit_scaler(d, RowIndices{}), SpecificationError);
}

TEST(FitScaler, NoLeakageFromOtherRows) {
  const auto d = random_dataset(50, 3, 4);
  RowIndices train;
  for (std::size_t r = 0; r < 35; ++r) train.push_back(r);
  const auto a = fit_scaler(d, train);
  Matrix x = d.features();
  Vector y = d.target();
  for (Eigen::Index r = 35; r < 50; ++r) {
    x.row(r).setConstant(1e6);
    y(r) = -1e6;
  }
  const auto b = fit_scaler(Dataset(x, y, d.column_names()), train);
  EXPECT_TRUE(a.means == b.means);
  EXPECT_TRUE(a.stds == b.stds);
  EXPECT_EQ(a.target_mean, b.target_mean);
  EXPECT_EQ(a.target_std, b.target_std);
}

TEST(Transform, MeanMapsToZeroAndMeanPlusStdToOne) {
  const auto d = random_dataset(40, 3, 5);
  const auto s = fit_scaler(d, iota_indices(40));
  Matrix probe(2, 3);
  probe.row(0) = s.means.transpose();
  probe.row(1) = (s.means + s.stds).transpose();
  const auto z = s.transform(Dataset(probe, Vector::Zero(2), d.column_names()));
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(z.row(0)[c], 0.0, 1e-12);
    EXPECT_NEAR(z.row(1)[c], 1.0, 1e-12);
  }
}

TEST(Transform, TrainingBlockIsStandardized) {
  const auto d = random_dataset(300, 4, 6);
  SplitPlan plan;
  plan.seed = 9;
  const auto sp = split(d, plan);
  const auto s = fit_scaler(d, sp.train);
  const auto z = s.transform(d, TargetScaling::Standardize);
  for (std::size_t c = 0; c < 4; ++c) {
    double mean = 0.0, ss = 0.0;
    for (std::size_t r : sp.train) mean += z.row(r)[c];
    mean /= static_cast<double>(sp.train.size());
    for (std::size_t r : sp.train) ss += (z.row(r)[c] - mean) * (z.row(r)[c] - mean);
    EXPECT_NEAR(mean, 0.0, 1e-10);
    EXPECT_NEAR(std::sqrt(ss / static_cast<double>(sp.train.size())), 1.0, 1e-10);
  }
  double tm = 0.0;
  for (std::size_t r : sp.train) tm += z.target()(static_cast<Eigen::Index>(r));
  EXPECT_NEAR(tm / static_cast<double>(sp.train.size()), 0.0, 1e-10);
}

TEST(Transform, RawTargetByDefault) {
  const auto d = random_dataset(20, 2, 7);
  const auto z = fit_scaler(d, iota_indices(20)).transform(d);
  EXPECT_TRUE(z.target() == d.target());
}

TEST(Transform, RoundTrip) {
  const auto d = random_dataset(80, 6, 8);
  const auto s = fit_scaler(d, iota_indices(60));
  const Matrix back = s.inverse_transform(s.transform(d).features());
  for (Eigen::Index i = 0; i < back.size(); ++i) {
    const double orig = d.features().data()[i];
    EXPECT_NEAR(back.data()[i], orig, 1e-10 * std::max(1.0, std::abs(orig)));
  }
  const double t = 3.25;
  EXPECT_NEAR(s.inverse_target((t - s.target_mean) / s.target_std, TargetScaling::Standardize), t, 1e-12);
}

TEST(Transform, ColumnMismatch) {
  const auto d = random_dataset(10, 3, 9);
  const auto s = fit_scaler(d, iota_indices(10));
  EXPECT_THROW(s.transform(random_dataset(10, 2, 9)), ShapeError);
}

TEST(OrdinalEncode, LexicographicCodes) {
  CsvTable t{{"c", "y"}, {{"b", "1"}, {"a", "2"}, {"b", "3"}}};
  const std::vector<std::size_t> cols{0};
  const auto e = ordinal_encode(t, cols);
  EXPECT_EQ(e.rows[0][0], "1");
  EXPECT_EQ(e.rows[1][0], "0");
  EXPECT_EQ(e.rows[2][0], "1");
  EXPECT_EQ(e.rows[0][1], "1");
}

TEST(OrdinalEncode, SingleLabelAllZero) {
  CsvTable t{{"c"}, {{"q"}, {"q"}, {"q"}}};
  const std::vector<std::size_t> cols{0};
  for (const auto& r : ordinal_encode(t, cols).rows) EXPECT_EQ(r[0], "0");
}

TEST(OrdinalEncode, CardinalityPreserved) {
  CsvTable t{{"c"}, {}};
  const char* labels[] = {"red", "green", "blue"};
  for (int i = 0; i < 10; ++i) t.rows.push_back({labels[i % 3]});
  const std::vector<std::size_t> cols{0};
  std::set<std::string> codes;
  for (const auto& r : ordinal_encode(t, cols).rows) codes.insert(r[0]);
  EXPECT_EQ(codes, (std::set<std::string>{"0", "1", "2"}));
}

TEST(OrdinalEncode, UnseenLabelRejected) {
  CsvTable fit{{"c"}, {{"a"}, {"b"}}};
  const std::vector<std::size_t> cols{0};
  const auto enc = OrdinalEncoder::fit(fit, cols);
  CsvTable other{{"c"}, {{"z"}}};
  EXPECT_THROW(enc.transform(other), EncodingError);
}

TEST(DatasetFromTable, CategoricalAndTarget) {
  CsvTable t{{"colour", "size", "y"}, {{"red", "1.5", "3"}, {"blue", "2.5", "4"}}};
  const std::vector<std::size_t> cols{0};
  const auto d = dataset_from_table(ordinal_encode(t, cols), "y", {0});
  EXPECT_EQ(d.n_features(), 2u);
  EXPECT_EQ(d.column_names(), (std::vector<std::string>{"colour", "size"}));
  EXPECT_EQ(d.row(0)[0], 1.0);
  EXPECT_EQ(d.row(1)[0], 0.0);
  EXPECT_EQ(d.target()(1), 4.0);
  EXPECT_TRUE(d.categorical_columns().count(0));
}

TEST(Split, TenRows) {
  SplitPlan plan{0.7, 5, 1};
  const auto s = split(10, plan);
  EXPECT_EQ(s.train.size(), 7u);
  EXPECT_EQ(s.test.size(), 3u);
  std::multiset<std::size_t> sizes;
  for (const auto& f : s.folds) sizes.insert(f.size());
  EXPECT_EQ(sizes, (std::multiset<std::size_t>{1, 1, 1, 2, 2}));
}

TEST(Split, Deterministic) {
  SplitPlan plan{0.7, 5, 42};
  const auto a = split(500, plan), b = split(500, plan);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.folds, b.folds);
  plan.seed = 43;
  EXPECT_NE(split(500, plan).train, a.train);
}

TEST(Split, FoldsPartitionTrain) {
  for (std::size_t n : {7u, 10u, 97u, 1000u}) {
    SplitPlan plan{0.7, 5, n};
    const auto s = split(n, plan);
    std::set<std::size_t> train(s.train.begin(), s.train.end()), test(s.test.begin(), s.test.end());
    EXPECT_EQ(train.size() + test.size(), n);
    for (std::size_t r : test) EXPECT_FALSE(train.count(r));
    std::set<std::size_t> seen;
    for (const auto& f : s.folds) {
      for (std::size_t r : f) EXPECT_TRUE(seen.insert(r).second) << "row " << r << " in two folds";
    }
    EXPECT_EQ(seen, train);
    for (std::size_t f = 0; f < s.folds.size(); ++f) {
      const auto rest = s.train_without_fold(f);
      EXPECT_EQ(rest.size() + s.folds[f].size(), s.train.size());
    }
  }
}

TEST(Split, InvalidPlans) {
  EXPECT_THROW(split(10, SplitPlan{0.0, 5, 0}), SpecificationError);
  EXPECT_THROW(split(10, SplitPlan{1.0, 5, 0}), SpecificationError);
  EXPECT_THROW(split(10, SplitPlan{0.7, 1, 0}), SpecificationError);
  EXPECT_THROW(split(10, SplitPlan{0.7, 8, 0}), SpecificationError);
}

TEST(Clean, NoMissingDropsNanRow) {
  const auto d = make({{1, 2}, {std::nan(""), 3}, {4, 5}}, {1, 2, 3});
  const std::vector<RowPredicate> rules{rules::no_missing()};
  const auto c = clean(d, rules);
  EXPECT_EQ(c.n_samples(), 2u);
  EXPECT_TRUE(c.all_finite());
  EXPECT_EQ(c.row(1)[0], 4.0);
}

TEST(Clean, NoRulesIsIdentity) {
  const auto d = random_dataset(25, 3, 10);
  const auto c = clean(d, std::vector<RowPredicate>{});
  EXPECT_TRUE(c.features() == d.features());
  EXPECT_TRUE(c.target() == d.target());
  EXPECT_EQ(c.column_names(), d.column_names());
}

TEST(Clean, PositiveTargetCount) {
  const auto d = random_dataset(400, 2, 11);
  std::size_t positives = 0;
  for (Eigen::Index r = 0; r < d.target().size(); ++r) positives += d.target()(r) > 0.0 ? 1 : 0;
  const std::vector<RowPredicate> rules{rules::parse("target > 0", d)};
  EXPECT_EQ(clean(d, rules).n_samples(), positives);
}

TEST(Clean, ParsedFeatureRule) {
  const auto d = make({{1, 0}, {2, 0}, {3, 0}}, {0, 0, 0});
  const std::vector<RowPredicate> rules{rules::parse("x0 <= 2", d)};
  EXPECT_EQ(clean(d, rules).n_samples(), 2u);
  EXPECT_THROW(rules::parse("nope > 1", d), SpecificationError);
  EXPECT_THROW(rules::parse("x0 ~ 1", d), SpecificationError);
}

TEST(Clean, EmptyResultPermitted) {
  const auto d = random_dataset(10, 2, 12);
  const std::vector<RowPredicate> rules{rules::target_compare(rules::Compare::Greater, 1e9)};
  EXPECT_EQ(clean(d, rules).n_samples(), 0u);
}

TEST(Csv, QuotedCellsRoundTrip) {
  CsvTable t{{"name", "value"}, {{"a,b", "1"}, {"say \"hi\"", "2"}}};
  std::istringstream in(to_csv_string(t));
  const auto back = parse_csv(in);
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
}

TEST(Csv, RealFormattingRoundTrips) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = uniform(rng, -1e3, 1e3) * std::pow(10.0, uniform(rng, -8, 8));
    EXPECT_EQ(parse_real(format_real(v)), v);
  }
  EXPECT_EQ(format_fixed(1.5, 2), "1.50");
}
