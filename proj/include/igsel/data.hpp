#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "igsel/csv.hpp"
#include "igsel/error.hpp"
#include "igsel/random.hpp"

namespace igsel {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowIndices = std::vector<std::size_t>;

/// Feature matrix, target vector and column metadata. Immutable once built.
class Dataset {
public:
  Dataset() = default;

  Dataset(Matrix features, Vector target, std::vector<std::string> column_names,
          std::set<std::size_t> categorical_columns = {}, std::string target_name = "target")
      : features_(std::move(features)),
        target_(std::move(target)),
        column_names_(std::move(column_names)),
        categorical_(std::move(categorical_columns)),
        target_name_(std::move(target_name)) {
    if (features_.rows() != target_.size()) {
      throw ShapeError("feature rows (" + std::to_string(features_.rows()) +
                       ") differ from target length (" + std::to_string(target_.size()) + ")");
    }
    if (static_cast<Eigen::Index>(column_names_.size()) != features_.cols()) {
      throw ShapeError("column_names has " + std::to_string(column_names_.size()) +
                       " entries for " + std::to_string(features_.cols()) + " feature columns");
    }
    for (std::size_t c : categorical_) {
      if (c >= column_names_.size()) throw ShapeError("categorical column index out of range");
    }
  }

  const Matrix& features() const noexcept { return features_; }
  const Vector& target() const noexcept { return target_; }
  const std::vector<std::string>& column_names() const noexcept { return column_names_; }
  const std::set<std::size_t>& categorical_columns() const noexcept { return categorical_; }
  const std::string& target_name() const noexcept { return target_name_; }

  std::size_t n_samples() const noexcept { return static_cast<std::size_t>(features_.rows()); }
  std::size_t n_features() const noexcept { return static_cast<std::size_t>(features_.cols()); }

  std::span<const double> row(std::size_t r) const {
    return {features_.data() + r * features_.cols(), static_cast<std::size_t>(features_.cols())};
  }

  bool all_finite() const { return features_.allFinite() && target_.allFinite(); }

  /// Keeps the given columns (in the given order).
  Dataset select_columns(std::span<const std::size_t> columns) const {
    Matrix f(features_.rows(), static_cast<Eigen::Index>(columns.size()));
    std::vector<std::string> names;
    std::set<std::size_t> cats;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j] >= n_features()) throw ShapeError("column index out of range");
      f.col(static_cast<Eigen::Index>(j)) = features_.col(static_cast<Eigen::Index>(columns[j]));
      names.push_back(column_names_[columns[j]]);
      if (categorical_.count(columns[j])) cats.insert(j);
    }
    return Dataset(std::move(f), target_, std::move(names), std::move(cats), target_name_);
  }

  Dataset select_rows(std::span<const std::size_t> rows) const {
    Matrix f(static_cast<Eigen::Index>(rows.size()), features_.cols());
    Vector t(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] >= n_samples()) throw ShapeError("row index out of range");
      f.row(static_cast<Eigen::Index>(i)) = features_.row(static_cast<Eigen::Index>(rows[i]));
      t(static_cast<Eigen::Index>(i)) = target_(static_cast<Eigen::Index>(rows[i]));
    }
    return Dataset(std::move(f), std::move(t), column_names_, categorical_, target_name_);
  }

private:
  Matrix features_;
  Vector target_;
  std::vector<std::string> column_names_;
  std::set<std::size_t> categorical_;
  std::string target_name_ = "target";
};

// ---------------------------------------------------------------------------
// Synthetic linear data with known coefficients.

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct DummySpec {
  std::size_t n_features = 86;
  std::size_t n_positive = 29;
  std::size_t n_negative = 29;
  std::size_t n_zero = 28;
  Interval positive_range{0.1, 1.0};
  Interval negative_range{-1.0, -0.1};
  // Feature values are drawn uniformly from this interval.
  Interval feature_range{0.0, 1.0};
  std::size_t n_samples = 27857;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_positive + n_negative + n_zero != n_features) {
      throw SpecificationError("n_positive + n_negative + n_zero must equal n_features");
    }
    if (n_features == 0 || n_samples == 0) throw SpecificationError("empty dummy dataset");
    if (!(positive_range.lo > 0.0) || positive_range.hi < positive_range.lo) {
      throw SpecificationError("positive_range must be a non-empty interval above zero");
    }
    if (!(negative_range.hi < 0.0) || negative_range.hi < negative_range.lo) {
      throw SpecificationError("negative_range must be a non-empty interval below zero");
    }
    if (!(feature_range.hi > feature_range.lo)) throw SpecificationError("empty feature_range");
  }
};

struct GroundTruth {
  std::vector<double> coefficients;
  std::set<std::size_t> zero_indices;
};

struct DummyData {
  Dataset data;
  GroundTruth truth;
};

inline std::vector<std::string> default_column_names(std::size_t n) {
  std::vector<std::string> names;
  names.reserve(n);
  for (std::size_t i = 0; i < n; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

/// target[j] = sum_i coefficients[i] * features[j][i], no noise, no interactions.
inline DummyData generate_dummy(const DummySpec& spec) {
  spec.validate();
  Rng coef_rng(derive_seed(spec.seed, "dummy.coefficients"));
  Rng feat_rng(derive_seed(spec.seed, "dummy.features"));

  GroundTruth truth;
  truth.coefficients.resize(spec.n_features, 0.0);
  for (std::size_t i = 0; i < spec.n_positive; ++i) {
    truth.coefficients[i] = uniform(coef_rng, spec.positive_range.lo, spec.positive_range.hi);
  }
  for (std::size_t i = spec.n_positive; i < spec.n_positive + spec.n_negative; ++i) {
    truth.coefficients[i] = uniform(coef_rng, spec.negative_range.lo, spec.negative_range.hi);
  }
  for (std::size_t i = spec.n_positive + spec.n_negative; i < spec.n_features; ++i) {
    truth.zero_indices.insert(i);
  }

  const auto n = static_cast<Eigen::Index>(spec.n_samples);
  const auto m = static_cast<Eigen::Index>(spec.n_features);
  Matrix x(n, m);
  Vector y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < m; ++c) {
      const double v = uniform(feat_rng, spec.feature_range.lo, spec.feature_range.hi);
      x(r, c) = v;
      acc += truth.coefficients[static_cast<std::size_t>(c)] * v;
    }
    y(r) = acc;
  }
  return {Dataset(std::move(x), std::move(y), default_column_names(spec.n_features), {}, "y"),
          std::move(truth)};
}

inline CsvTable ground_truth_table(const GroundTruth& truth) {
  CsvTable t;
  t.header = {"index", "coefficient"};
  for (std::size_t i = 0; i < truth.coefficients.size(); ++i) {
    t.rows.push_back({std::to_string(i), format_real(truth.coefficients[i])});
  }
  return t;
}

inline GroundTruth ground_truth_from_table(const CsvTable& t) {
  GroundTruth truth;
  const std::size_t ic = t.column_index("index");
  const std::size_t cc = t.column_index("coefficient");
  truth.coefficients.resize(t.rows.size(), 0.0);
  for (const auto& r : t.rows) {
    const auto i = static_cast<std::size_t>(std::stoul(r[ic]));
    if (i >= truth.coefficients.size()) throw ShapeError("ground-truth index out of range");
    truth.coefficients[i] = parse_real(r[cc]);
    if (truth.coefficients[i] == 0.0) truth.zero_indices.insert(i);
  }
  return truth;
}

// ---------------------------------------------------------------------------
// Ordinal encoding of categorical columns.

/// Maps every distinct label of each categorical column to its rank in
/// lexicographic order.
class OrdinalEncoder {
public:
  static OrdinalEncoder fit(const CsvTable& table, std::span<const std::size_t> columns) {
    OrdinalEncoder enc;
    for (std::size_t c : columns) {
      if (c >= table.header.size()) throw ShapeError("categorical column index out of range");
      std::set<std::string> labels;
      for (const auto& r : table.rows) labels.insert(r[c]);
      auto& levels = enc.levels_[c];
      levels.assign(labels.begin(), labels.end());
    }
    return enc;
  }

  bool encodes(std::size_t column) const { return levels_.count(column) != 0; }

  double encode(std::size_t column, const std::string& label) const {
    const auto& levels = levels_.at(column);
    auto it = std::lower_bound(levels.begin(), levels.end(), label);
    if (it == levels.end() || *it != label) {
      throw EncodingError("unseen label '" + label + "' in categorical column " +
                          std::to_string(column));
    }
    return static_cast<double>(it - levels.begin());
  }

  const std::vector<std::string>& levels(std::size_t column) const { return levels_.at(column); }

  /// Replaces labels in the encoded columns by their codes.
  CsvTable transform(const CsvTable& table) const {
    CsvTable out = table;
    for (auto& r : out.rows) {
      for (const auto& [c, levels] : levels_) {
        r[c] = std::to_string(static_cast<long long>(encode(c, r[c])));
      }
    }
    return out;
  }

private:
  std::map<std::size_t, std::vector<std::string>> levels_;
};

inline CsvTable ordinal_encode(const CsvTable& table, std::span<const std::size_t> columns) {
  return OrdinalEncoder::fit(table, columns).transform(table);
}

/// Interprets a table as numeric features plus one target column. Empty, "NA"
/// and "nan" cells become NaN so cleaning rules can drop them.
inline Dataset dataset_from_table(const CsvTable& table, const std::string& target_column,
                                  const std::set<std::size_t>& categorical_table_columns = {}) {
  const std::size_t tc = table.column_index(target_column);
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto m = static_cast<Eigen::Index>(table.header.size() - 1);
  Matrix x(n, m);
  Vector y(n);
  std::vector<std::string> names;
  std::set<std::size_t> cats;
  for (std::size_t c = 0, j = 0; c < table.header.size(); ++c) {
    if (c == tc) continue;
    names.push_back(table.header[c]);
    if (categorical_table_columns.count(c)) cats.insert(j);
    ++j;
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& cells = table.rows[static_cast<std::size_t>(r)];
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == tc) {
        y(r) = parse_real(cells[c]);
      } else {
        x(r, j++) = parse_real(cells[c]);
      }
    }
  }
  return Dataset(std::move(x), std::move(y), std::move(names), std::move(cats), target_column);
}

inline CsvTable dataset_to_table(const Dataset& data) {
  CsvTable t;
  t.header = data.column_names();
  t.header.push_back(data.target_name());
  for (std::size_t r = 0; r < data.n_samples(); ++r) {
    std::vector<std::string> cells;
    cells.reserve(data.n_features() + 1);
    for (double v : data.row(r)) cells.push_back(format_real(v));
    cells.push_back(format_real(data.target()(static_cast<Eigen::Index>(r))));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Cleaning.

using RowPredicate = std::function<bool(std::span<const double> features, double target)>;

namespace rules {

inline RowPredicate no_missing() {
  return [](std::span<const double> f, double t) {
    return std::isfinite(t) && std::all_of(f.begin(), f.end(), [](double v) { return std::isfinite(v); });
  };
}

enum class Compare { Less, LessEqual, Greater, GreaterEqual, Equal, NotEqual };

inline bool compare(double a, Compare op, double b) {
  switch (op) {
    case Compare::Less: return a < b;
    case Compare::LessEqual: return a <= b;
    case Compare::Greater: return a > b;
    case Compare::GreaterEqual: return a >= b;
    case Compare::Equal: return a == b;
    case Compare::NotEqual: return a != b;
  }
  return false;
}

/// Keeps rows where target `op` value holds.
inline RowPredicate target_compare(Compare op, double value) {
  return [op, value](std::span<const double>, double t) { return compare(t, op, value); };
}

/// Keeps rows where feature `column` `op` value holds.
inline RowPredicate feature_compare(std::size_t column, Compare op, double value) {
  return [column, op, value](std::span<const double> f, double) {
    return compare(f[column], op, value);
  };
}

/// Parses "<column> <op> <number>" where column is a feature name or the
/// target name, e.g. "target > 0" or "x3 <= 1.5".
inline RowPredicate parse(const std::string& text, const Dataset& data) {
  static const std::pair<const char*, Compare> ops[] = {
      {"<=", Compare::LessEqual}, {">=", Compare::GreaterEqual}, {"!=", Compare::NotEqual},
      {"==", Compare::Equal},     {"<", Compare::Less},          {">", Compare::Greater}};
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  if (trim(text) == "no_missing") return no_missing();
  for (const auto& [sym, op] : ops) {
    const auto pos = text.find(sym);
    if (pos == std::string::npos) continue;
    const std::string lhs = trim(text.substr(0, pos));
    const double rhs = parse_real(trim(text.substr(pos + std::char_traits<char>::length(sym))));
    if (lhs == data.target_name() || lhs == "target") return target_compare(op, rhs);
    const auto& names = data.column_names();
    auto it = std::find(names.begin(), names.end(), lhs);
    if (it == names.end()) throw SpecificationError("cleaning rule names unknown column '" + lhs + "'");
    return feature_compare(static_cast<std::size_t>(it - names.begin()), op, rhs);
  }
  throw SpecificationError("cannot parse cleaning rule '" + text + "'");
}

}  // namespace rules

/// Retains the rows that pass every predicate.
inline Dataset clean(const Dataset& data, std::span<const RowPredicate> predicates) {
  RowIndices keep;
  for (std::size_t r = 0; r < data.n_samples(); ++r) {
    const double t = data.target()(static_cast<Eigen::Index>(r));
    const auto f = data.row(r);
    if (std::all_of(predicates.begin(), predicates.end(), [&](const RowPredicate& p) { return p(f, t); })) {
      keep.push_back(r);
    }
  }
  return data.select_rows(keep);
}

// ---------------------------------------------------------------------------
// Standard scaling.

enum class TargetScaling { None, Standardize };

/// Per-column mean and population standard deviation over the fitting rows.
/// Zero deviations are stored as 1 so constant columns are only shifted.
struct StandardScaler {
  Vector means;
  Vector stds;
  double target_mean = 0.0;
  double target_std = 1.0;
  std::size_t fitted_on = 0;

  Dataset transform(const Dataset& data, TargetScaling target = TargetScaling::None) const {
    if (static_cast<Eigen::Index>(data.n_features()) != means.size()) {
      throw ShapeError("scaler fitted on " + std::to_string(means.size()) + " columns, got " +
                       std::to_string(data.n_features()));
    }
    Matrix x = (data.features().rowwise() - means.transpose()).array().rowwise() /
               stds.transpose().array();
    Vector y = data.target();
    if (target == TargetScaling::Standardize) y = (y.array() - target_mean) / target_std;
    return Dataset(std::move(x), std::move(y), data.column_names(), data.categorical_columns(),
                   data.target_name());
  }

  Matrix inverse_transform(const Matrix& scaled) const {
    if (scaled.cols() != means.size()) throw ShapeError("column mismatch in inverse_transform");
    return (scaled.array().rowwise() * stds.transpose().array()).rowwise() + means.transpose().array();
  }

  double inverse_target(double scaled, TargetScaling target) const {
    return target == TargetScaling::Standardize ? scaled * target_std + target_mean : scaled;
  }
};

inline StandardScaler fit_scaler(const Dataset& data, std::span<const std::size_t> rows) {
  if (rows.empty()) throw SpecificationError("fit_scaler needs at least one row");
  const auto m = static_cast<Eigen::Index>(data.n_features());
  StandardScaler s;
  s.means = Vector::Zero(m);
  s.stds = Vector::Zero(m);
  const double n = static_cast<double>(rows.size());
  double tsum = 0.0;
  for (std::size_t r : rows) {
    if (r >= data.n_samples()) throw ShapeError("row index out of range in fit_scaler");
    s.means += data.features().row(static_cast<Eigen::Index>(r)).transpose();
    tsum += data.target()(static_cast<Eigen::Index>(r));
  }
  s.means /= n;
  s.target_mean = tsum / n;
  double tss = 0.0;
  for (std::size_t r : rows) {
    s.stds += (data.features().row(static_cast<Eigen::Index>(r)).transpose() - s.means).array().square().matrix();
    const double d = data.target()(static_cast<Eigen::Index>(r)) - s.target_mean;
    tss += d * d;
  }
  s.stds = (s.stds / n).array().sqrt();
  for (Eigen::Index c = 0; c < m; ++c) {
    if (!(s.stds(c) > 0.0)) s.stds(c) = 1.0;
  }
  s.target_std = std::sqrt(tss / n);
  if (!(s.target_std > 0.0)) s.target_std = 1.0;
  s.fitted_on = rows.size();
  return s;
}

// ---------------------------------------------------------------------------
// Train/test split and k-fold partition.

struct SplitPlan {
  double train_fraction = 0.7;
  std::size_t n_folds = 5;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
      throw SpecificationError("train_fraction must lie in (0, 1)");
    }
    if (n_folds < 2) throw SpecificationError("n_folds must be at least 2");
  }
};

struct Split {
  RowIndices train;
  RowIndices test;
  std::vector<RowIndices> folds;

  /// All training rows outside fold `f`.
  RowIndices train_without_fold(std::size_t f) const {
    RowIndices out;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) out.insert(out.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

/// |train| = round(train_fraction * n); the remaining rows form the test set.
/// Folds partition the training rows; the first (|train| mod n_folds) folds
/// hold one extra row. All index lists are sorted ascending.
inline Split split(std::size_t n_samples, const SplitPlan& plan) {
  plan.validate();
  Rng rng(derive_seed(plan.seed, "split"));
  const auto perm = permutation(n_samples, rng);
  const auto n_train = static_cast<std::size_t>(std::llround(plan.train_fraction * static_cast<double>(n_samples)));
  if (plan.n_folds > n_train) {
    throw SpecificationError("n_folds (" + std::to_string(plan.n_folds) + ") exceeds training size (" +
                             std::to_string(n_train) + ")");
  }
  Split s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());

  // perm[0, n_train) is already a random order of the training rows.
  const std::size_t base = n_train / plan.n_folds;
  const std::size_t extra = n_train % plan.n_folds;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < plan.n_folds; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    RowIndices fold(s.train.begin() + static_cast<std::ptrdiff_t>(pos),
                    s.train.begin() + static_cast<std::ptrdiff_t>(pos + len));
    std::sort(fold.begin(), fold.end());
    s.folds.push_back(std::move(fold));
    pos += len;
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

inline Split split(const Dataset& data, const SplitPlan& plan) { return split(data.n_samples(), plan); }

}  // namespace igsel
