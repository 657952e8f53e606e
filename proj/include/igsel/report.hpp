#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "igsel/attribution.hpp"
#include "igsel/csv.hpp"
#include "igsel/data.hpp"
#include "igsel/error.hpp"
#include "igsel/experiments.hpp"
#include "igsel/selection.hpp"
#include "igsel/svg.hpp"
#include "igsel/tuning.hpp"

namespace igsel {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// JSON round-trip. Non-finite reals are stored as the strings "inf", "-inf"
// and "nan" since JSON has no literal for them.

namespace json_io {

inline Json real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double real(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

inline Json reals(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(real(x));
  return a;
}

inline std::vector<double> reals(const Json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(real(x));
  return v;
}

inline Json to_json(const CvReport& r) {
  return {{"fold_mses", reals(r.fold_mses)},
          {"mean_mse", real(r.mean_mse)},
          {"sd_mse", real(r.sd_mse)},
          {"failed_folds", r.failed_folds}};
}

inline CvReport cv_from_json(const Json& j) {
  CvReport r;
  r.fold_mses = reals(j.at("fold_mses"));
  r.mean_mse = real(j.at("mean_mse"));
  r.sd_mse = real(j.at("sd_mse"));
  r.failed_folds = j.at("failed_folds").get<std::vector<std::size_t>>();
  return r;
}

inline Json to_json(const TuningRun& t) {
  Json obs = Json::array();
  for (const auto& o : t.observations) {
    obs.push_back({{"point", reals(o.point.values)},
                   {"value", real(o.value)},
                   {"detail", to_json(o.detail)},
                   {"initial", o.from_initial_design},
                   {"random_fallback", o.random_fallback},
                   {"expected_improvement", real(o.expected_improvement)}});
  }
  Json design = Json::array();
  for (const auto& p : t.design) design.push_back(reals(p.values));
  return {{"design", design},
          {"observations", obs},
          {"best_index", t.best_index},
          {"incumbent", reals(t.incumbent)},
          {"surrogate",
           {{"fitted", t.surrogate.fitted},
            {"theta", reals(t.surrogate.theta)},
            {"nugget", real(t.surrogate.nugget)},
            {"neg_log_likelihood", real(t.surrogate.neg_log_likelihood)},
            {"process_mean", real(t.surrogate.process_mean)},
            {"process_variance", real(t.surrogate.process_variance)}}}};
}

inline TuningRun tuning_from_json(const Json& j) {
  TuningRun t;
  for (const auto& p : j.at("design")) t.design.push_back({reals(p)});
  for (const auto& o : j.at("observations")) {
    Observation ob;
    ob.point = {reals(o.at("point"))};
    ob.value = real(o.at("value"));
    ob.detail = cv_from_json(o.at("detail"));
    ob.from_initial_design = o.at("initial").get<bool>();
    ob.random_fallback = o.at("random_fallback").get<bool>();
    ob.expected_improvement = real(o.at("expected_improvement"));
    t.observations.push_back(std::move(ob));
  }
  t.best_index = j.at("best_index").get<std::size_t>();
  t.incumbent = reals(j.at("incumbent"));
  const auto& s = j.at("surrogate");
  t.surrogate.fitted = s.at("fitted").get<bool>();
  t.surrogate.theta = reals(s.at("theta"));
  t.surrogate.nugget = real(s.at("nugget"));
  t.surrogate.neg_log_likelihood = real(s.at("neg_log_likelihood"));
  t.surrogate.process_mean = real(s.at("process_mean"));
  t.surrogate.process_variance = real(s.at("process_variance"));
  return t;
}

inline Json to_json(const SearchSpace& space) {
  Json a = Json::array();
  for (const auto& p : space.params) {
    const char* kind = p.kind == ParamKind::Integer ? "integer" : p.kind == ParamKind::Real ? "real" : "categorical";
    a.push_back({{"name", p.name}, {"kind", kind}, {"lo", p.lo}, {"hi", p.hi}, {"pow2", p.pow2}, {"levels", p.levels}});
  }
  return a;
}

inline SearchSpace space_from_json(const Json& j) {
  SearchSpace s;
  for (const auto& p : j) {
    ParamSpec ps;
    ps.name = p.at("name").get<std::string>();
    const auto kind = p.at("kind").get<std::string>();
    ps.kind = kind == "integer" ? ParamKind::Integer : kind == "real" ? ParamKind::Real : ParamKind::Categorical;
    ps.lo = p.at("lo").get<double>();
    ps.hi = p.at("hi").get<double>();
    ps.pow2 = p.at("pow2").get<bool>();
    ps.levels = p.at("levels").get<std::vector<std::string>>();
    s.params.push_back(std::move(ps));
  }
  return s;
}

inline Json to_json(const GlobalImportance& g) {
  return {{"aggregation", to_string(g.aggregation)}, {"scores", reals(g.scores)}};
}

inline GlobalImportance importance_from_json(const Json& j) {
  GlobalImportance g;
  g.aggregation = j.at("aggregation").get<std::string>() == "mean_signed" ? Aggregation::MeanSigned : Aggregation::MeanAbsolute;
  g.scores = reals(j.at("scores"));
  return g;
}

inline Json to_json(const ClusterResult& c) {
  return {{"k", c.k},
          {"assignments", c.assignments},
          {"centroids", reals(c.centroids)},
          {"lowest_cluster", c.lowest_cluster},
          {"inertia", real(c.inertia)},
          {"iterations", c.iterations},
          {"inertia_trace", reals(c.inertia_trace)}};
}

inline ClusterResult cluster_from_json(const Json& j) {
  ClusterResult c;
  c.k = j.at("k").get<std::size_t>();
  c.assignments = j.at("assignments").get<std::vector<std::size_t>>();
  c.centroids = reals(j.at("centroids"));
  c.lowest_cluster = j.at("lowest_cluster").get<std::size_t>();
  c.inertia = real(j.at("inertia"));
  c.iterations = j.at("iterations").get<std::size_t>();
  c.inertia_trace = reals(j.at("inertia_trace"));
  return c;
}

}  // namespace json_io

inline Json report_to_json(const ExperimentReport& r) {
  using namespace json_io;
  Json j;
  j["kind"] = r.kind;
  j["seed"] = r.seed;
  j["config"] = r.config_text;
  j["objective"] = r.objective;
  j["n_folds"] = r.n_folds;
  j["feature_names"] = r.feature_names;
  j["space"] = to_json(r.space);
  if (r.truth) j["ground_truth"] = reals(r.truth->coefficients);
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"experiment", row.experiment},
                    {"indices", row.subset.indices},
                    {"provenance", row.subset.provenance},
                    {"cv", to_json(row.cv)},
                    {"test_mse", real(row.test_mse)},
                    {"tuning", to_json(row.tuning)}});
  }
  j["rows"] = rows;
  j["best_row"] = r.best_row;
  if (r.importance) j["importance"] = to_json(*r.importance);
  Json cl = Json::array();
  for (const auto& c : r.clusterings) cl.push_back(to_json(c));
  j["clusterings"] = cl;
  if (r.shap_importance) j["shap_importance"] = to_json(*r.shap_importance);
  if (r.lasso_exact) j["lasso_exact"] = *r.lasso_exact;
  j["warnings"] = r.warnings;
  return j;
}

inline ExperimentReport report_from_json(const Json& j) {
  using namespace json_io;
  ExperimentReport r;
  r.kind = j.at("kind").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config_text = j.at("config").get<std::string>();
  r.objective = j.at("objective").get<std::string>();
  r.n_folds = j.at("n_folds").get<std::size_t>();
  r.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  r.space = space_from_json(j.at("space"));
  if (j.contains("ground_truth")) {
    GroundTruth t;
    t.coefficients = reals(j.at("ground_truth"));
    for (std::size_t i = 0; i < t.coefficients.size(); ++i) {
      if (t.coefficients[i] == 0.0) t.zero_indices.insert(i);
    }
    r.truth = std::move(t);
  }
  for (const auto& row : j.at("rows")) {
    ReportRow rr;
    rr.experiment = row.at("experiment").get<std::string>();
    rr.subset.indices = row.at("indices").get<std::vector<std::size_t>>();
    rr.subset.provenance = row.at("provenance").get<std::vector<std::string>>();
    rr.cv = cv_from_json(row.at("cv"));
    rr.test_mse = real(row.at("test_mse"));
    rr.tuning = tuning_from_json(row.at("tuning"));
    r.rows.push_back(std::move(rr));
  }
  r.best_row = j.at("best_row").get<std::size_t>();
  if (j.contains("importance")) r.importance = importance_from_json(j.at("importance"));
  for (const auto& c : j.at("clusterings")) r.clusterings.push_back(cluster_from_json(c));
  if (j.contains("shap_importance")) r.shap_importance = importance_from_json(j.at("shap_importance"));
  if (j.contains("lasso_exact")) r.lasso_exact = j.at("lasso_exact").get<bool>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

inline std::string report_json_text(const ExperimentReport& r) { return report_to_json(r).dump(1) + "\n"; }

inline ExperimentReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report " + path.string());
  try {
    return report_from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw IoError("malformed report " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Tables.

inline std::string file_slug(const std::string& label) {
  std::string out;
  for (char c : label) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-') {
      out.push_back(c);
    } else if (!out.empty() && out.back() != '_' && c != '=') {
      out.push_back('_');
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "subset" : out;
}

namespace tables {

inline std::string join_indices(const std::vector<std::size_t>& v, const char* sep = ";") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + std::to_string(v[i] + 1);
  return out;
}

/// One row per experiment with the fold MSEs,
/// their mean and sample SD. Failed folds are listed 1-based.
inline CsvTable results(const ExperimentReport& r) {
  CsvTable t;
  t.header = {"experiment", "k", "n_features"};
  for (std::size_t f = 0; f < r.n_folds; ++f) t.header.push_back("fold_" + std::to_string(f + 1));
  for (const char* h : {"mean_mse", "sd_mse", "failed_folds", "test_mse"}) t.header.push_back(h);
  for (const auto& row : r.rows) {
    std::vector<std::string> cells{row.experiment, format_k_list(row.subset.provenance), std::to_string(row.subset.size())};
    for (std::size_t f = 0; f < r.n_folds; ++f) {
      cells.push_back(f < row.cv.fold_mses.size() ? format_real(row.cv.fold_mses[f]) : "");
    }
    cells.push_back(format_real(row.cv.mean_mse));
    cells.push_back(format_real(row.cv.sd_mse));
    cells.push_back(join_indices(row.cv.failed_folds));
    cells.push_back(format_real(row.test_mse));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline CsvTable subsets(const ExperimentReport& r) {
  CsvTable t;
  t.header = {"experiment", "feature_index", "feature", "provenance"};
  for (const auto& row : r.rows) {
    std::string prov;
    for (std::size_t i = 0; i < row.subset.provenance.size(); ++i) prov += (i ? ";" : "") + row.subset.provenance[i];
    for (std::size_t i : row.subset.indices) t.rows.push_back({row.experiment, std::to_string(i), r.feature_names.at(i), prov});
  }
  return t;
}

/// Inverse of subsets(): one FeatureSubset per experiment, in file order.
inline std::vector<std::pair<std::string, FeatureSubset>> subsets_from_table(const CsvTable& t) {
  const std::size_t ec = t.column_index("experiment"), ic = t.column_index("feature_index"),
                    pc = t.column_index("provenance");
  std::vector<std::pair<std::string, FeatureSubset>> out;
  for (const auto& row : t.rows) {
    const std::string& name = row.at(ec);
    if (out.empty() || out.back().first != name) {
      FeatureSubset s;
      std::istringstream prov(row.at(pc));
      std::string item;
      while (std::getline(prov, item, ';')) s.provenance.push_back(item);
      out.emplace_back(name, std::move(s));
    }
    out.back().second.indices.push_back(static_cast<std::size_t>(std::stoull(row.at(ic))));
  }
  for (auto& [name, s] : out) std::sort(s.indices.begin(), s.indices.end());
  return out;
}

inline std::vector<double> reference_scale(const ExperimentReport& r, const GlobalImportance& g) {
  double lo = 0.0, hi = 1.0;
  if (r.truth) {
    std::vector<double> a;
    for (double c : r.truth->coefficients) a.push_back(std::abs(c));
    lo = *std::min_element(a.begin(), a.end());
    hi = *std::max_element(a.begin(), a.end());
  }
  try {
    return scale_to_range(g, lo, hi > lo ? hi : lo + 1.0);
  } catch (const SpecificationError&) {
    return std::vector<double>(g.scores.size(), std::numeric_limits<double>::quiet_NaN());
  }
}

/// Per-feature scores, their min-max scaling onto the |coefficient| range
/// (or [0, 1] without ground truth) and the coefficients when known.
inline CsvTable importance(const ExperimentReport& r, const GlobalImportance& g) {
  CsvTable t;
  t.header = {"feature_index", "feature", "score", "scaled_score"};
  if (r.truth) {
    t.header.push_back("coefficient");
    t.header.push_back("abs_coefficient");
  }
  const auto scaled = reference_scale(r, g);
  for (std::size_t i = 0; i < g.scores.size(); ++i) {
    std::vector<std::string> cells{std::to_string(i), r.feature_names.at(i), format_real(g.scores[i]), format_real(scaled[i])};
    if (r.truth) {
      cells.push_back(format_real(r.truth->coefficients.at(i)));
      cells.push_back(format_real(std::abs(r.truth->coefficients.at(i))));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline CsvTable clusters(const ExperimentReport& r) {
  CsvTable t;
  t.header = {"k", "feature_index", "feature", "score", "cluster", "centroid", "eliminated"};
  if (!r.importance) return t;
  for (const auto& c : r.clusterings) {
    for (std::size_t i = 0; i < c.assignments.size(); ++i) {
      t.rows.push_back({std::to_string(c.k), std::to_string(i), r.feature_names.at(i), format_real(r.importance->scores[i]),
                        std::to_string(c.assignments[i]), format_real(c.centroids[c.assignments[i]]),
                        c.assignments[i] == c.lowest_cluster ? "1" : "0"});
    }
  }
  return t;
}

inline std::string param_cell(const SearchSpace& space, const HyperPoint& p, std::size_t i) {
  const auto& spec = space.params[i];
  if (spec.kind == ParamKind::Categorical) return spec.levels.at(static_cast<std::size_t>(p.values[i]));
  if (spec.kind == ParamKind::Integer) return std::to_string(static_cast<long long>(space.value(p, spec.name)));
  return format_real(p.values[i]);
}

/// One row per objective evaluation with materialized hyperparameters.
inline CsvTable tuning(const SearchSpace& space, const TuningRun& run) {
  CsvTable t;
  std::size_t n_folds = 0;
  for (const auto& o : run.observations) n_folds = std::max(n_folds, o.detail.fold_mses.size());
  t.header = {"evaluation", "phase"};
  for (const auto& p : space.params) t.header.push_back(p.name);
  for (std::size_t f = 0; f < n_folds; ++f) t.header.push_back("fold_" + std::to_string(f + 1));
  for (const char* h : {"mean_mse", "sd_mse", "objective", "expected_improvement", "random_fallback", "incumbent"}) {
    t.header.push_back(h);
  }
  for (std::size_t e = 0; e < run.observations.size(); ++e) {
    const auto& o = run.observations[e];
    std::vector<std::string> cells{std::to_string(e + 1), o.from_initial_design ? "initial" : "infill"};
    for (std::size_t i = 0; i < space.size(); ++i) cells.push_back(param_cell(space, o.point, i));
    for (std::size_t f = 0; f < n_folds; ++f) {
      cells.push_back(f < o.detail.fold_mses.size() ? format_real(o.detail.fold_mses[f]) : "");
    }
    cells.push_back(format_real(o.detail.mean_mse));
    cells.push_back(format_real(o.detail.sd_mse));
    cells.push_back(format_real(o.value));
    cells.push_back(format_real(o.expected_improvement));
    cells.push_back(o.random_fallback ? "1" : "0");
    cells.push_back(format_real(run.incumbent.at(e)));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

/// Best point of every row's tuning run.
inline CsvTable best_points(const ExperimentReport& r) {
  CsvTable t;
  t.header = {"experiment", "n_features"};
  for (const auto& p : r.space.params) t.header.push_back(p.name);
  t.header.push_back("objective");
  for (const auto& row : r.rows) {
    std::vector<std::string> cells{row.experiment, std::to_string(row.subset.size())};
    for (std::size_t i = 0; i < r.space.size(); ++i) cells.push_back(param_cell(r.space, row.best_point(), i));
    cells.push_back(format_real(row.tuning.best().value));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

/// Raw coordinates of a point: the file `tune` writes and `attribute` reads.
inline CsvTable point_table(const SearchSpace& space, const HyperPoint& p) {
  CsvTable t;
  t.header = {"parameter", "coordinate", "value"};
  for (std::size_t i = 0; i < space.size(); ++i) {
    t.rows.push_back({space.params[i].name, format_real(p.values[i]), param_cell(space, p, i)});
  }
  return t;
}

inline HyperPoint point_from_table(const SearchSpace& space, const CsvTable& t) {
  HyperPoint p;
  p.values.assign(space.size(), std::numeric_limits<double>::quiet_NaN());
  const std::size_t nc = t.column_index("parameter"), vc = t.column_index("coordinate");
  for (const auto& row : t.rows) p.values.at(space.index(row.at(nc))) = parse_real(row.at(vc));
  if (!space.feasible(p)) throw SpecificationError("hyperparameter point is infeasible for the configured space");
  return p;
}

}  // namespace tables

// ---------------------------------------------------------------------------
// Figures.

namespace figures {

/// Bars: scores scaled onto the |coefficient| range, coloured by whether the
/// best subset keeps the feature. Dots: |coefficient| when known.
inline std::string attribution(const ExperimentReport& r, const GlobalImportance& g, const std::string& title) {
  const auto scaled = tables::reference_scale(r, g);
  const std::size_t m = g.scores.size();
  double y_max = 0.0;
  for (double v : scaled) {
    if (std::isfinite(v)) y_max = std::max(y_max, v);
  }
  if (r.truth) {
    for (double c : r.truth->coefficients) y_max = std::max(y_max, std::abs(c));
  }
  svg::Plot plot(std::max(640.0, 8.0 * static_cast<double>(m) + 100.0), 360, -1, static_cast<double>(m), 0, y_max * 1.08);
  plot.title(title);
  plot.labels("feature index", "scaled attribution");
  std::vector<char> kept(m, 1);
  if (r.kind == "pipeline" && r.best_row > 0) {
    std::fill(kept.begin(), kept.end(), 0);
    for (std::size_t i : r.best().subset.indices) kept[i] = 1;
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (std::isfinite(scaled[i])) plot.bar(static_cast<double>(i), 0.8, scaled[i], kept[i] ? "#1f77b4" : "#bbbbbb");
  }
  if (r.truth) {
    for (std::size_t i = 0; i < m; ++i) plot.circle(static_cast<double>(i), std::abs(r.truth->coefficients[i]), 2.2, "black");
  }
  std::vector<std::pair<std::string, std::string>> legend{{"kept", "#1f77b4"}, {"eliminated", "#bbbbbb"}};
  if (r.truth) legend.push_back({"|coefficient|", "black"});
  plot.legend(legend);
  return plot.render();
}

/// Feature index against score, coloured by cluster, with a dashed red rule
/// at the largest score of the eliminated cluster.
inline std::string clusters(const ExperimentReport& r, const ClusterResult& c) {
  const auto& s = r.importance->scores;
  const double y_max = *std::max_element(s.begin(), s.end());
  svg::Plot plot(640, 360, -1, static_cast<double>(s.size()), 0, y_max * 1.08);
  plot.title("k-means clustering of attribution scores, k = " + std::to_string(c.k));
  plot.labels("feature index", "attribution score");
  const auto& pal = svg::palette();
  for (std::size_t i = 0; i < s.size(); ++i) plot.circle(static_cast<double>(i), s[i], 3.0, pal[c.assignments[i] % pal.size()]);
  const double thr = c.lowest_threshold(s);
  plot.line(-1, thr, static_cast<double>(s.size()), thr, "red", 1.2, "6,4");
  return plot.render();
}

/// Per experiment: grey dot per fold, black dot at the mean, whisker of one SD.
inline std::string mse(const ExperimentReport& r, bool by_feature_count) {
  double y_min = std::numeric_limits<double>::infinity(), y_max = 0.0;
  double x_min = std::numeric_limits<double>::infinity(), x_max = -std::numeric_limits<double>::infinity();
  std::vector<double> xs;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    const double x = by_feature_count ? static_cast<double>(row.subset.size()) : static_cast<double>(i);
    xs.push_back(x);
    x_min = std::min(x_min, x);
    x_max = std::max(x_max, x);
    for (double v : row.cv.fold_mses) {
      if (std::isfinite(v)) {
        y_min = std::min(y_min, v);
        y_max = std::max(y_max, v);
      }
    }
    if (std::isfinite(row.cv.mean_mse) && std::isfinite(row.cv.sd_mse)) {
      y_min = std::min(y_min, row.cv.mean_mse - row.cv.sd_mse);
      y_max = std::max(y_max, row.cv.mean_mse + row.cv.sd_mse);
    }
  }
  if (!std::isfinite(y_min)) y_min = 0.0;
  const double pad_y = 0.08 * std::max(y_max - y_min, 1e-12);
  const double pad_x = by_feature_count ? std::max(1.0, 0.05 * (x_max - x_min)) : 0.6;
  svg::Plot plot(640, 380, x_min - pad_x, x_max + pad_x, std::max(0.0, y_min - pad_y), y_max + pad_y);
  plot.title(by_feature_count ? "Cross-validated MSE by number of features" : "Cross-validated MSE by experiment");
  plot.labels(by_feature_count ? "number of features" : "experiment", "MSE");
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& cv = r.rows[i].cv;
    const double x = xs[i];
    if (std::isfinite(cv.mean_mse) && std::isfinite(cv.sd_mse)) {
      plot.line(x, cv.mean_mse - cv.sd_mse, x, cv.mean_mse + cv.sd_mse, "black", 1.2);
      const double cap = 0.15 * pad_x;
      plot.line(x - cap, cv.mean_mse - cv.sd_mse, x + cap, cv.mean_mse - cv.sd_mse, "black", 1.2);
      plot.line(x - cap, cv.mean_mse + cv.sd_mse, x + cap, cv.mean_mse + cv.sd_mse, "black", 1.2);
    }
    for (double v : cv.fold_mses) {
      if (std::isfinite(v)) plot.circle(x, v, 3.0, "#aaaaaa", 0.8);
    }
    if (std::isfinite(cv.mean_mse)) plot.circle(x, cv.mean_mse, 3.6, "black");
  }
  if (!by_feature_count) {
    std::vector<std::pair<double, std::string>> cats;
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      std::string name = r.rows[i].experiment;
      const auto paren = name.find(" (");
      if (paren != std::string::npos) name.resize(paren);
      cats.push_back({xs[i], name});
    }
    plot.x_categories(cats);
  }
  plot.legend({{"fold MSE", "#aaaaaa"}, {"mean MSE (+/- SD)", "black"}});
  return plot.render();
}

}  // namespace figures

// ---------------------------------------------------------------------------
// Manifest and emission.

inline std::string sha256_hex(const std::string& content) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(content.data(), content.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 computation failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return out.str();
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct ManifestEntry {
  std::string file;
  std::size_t bytes = 0;
  std::string sha256;
};

/// Every regular file under `dir` except manifest.csv, sorted by path.
inline std::vector<ManifestEntry> build_manifest(const std::filesystem::path& dir) {
  std::vector<ManifestEntry> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = std::filesystem::relative(e.path(), dir).generic_string();
    if (rel == "manifest.csv") continue;
    const std::string content = read_file(e.path());
    out.push_back({rel, content.size(), sha256_hex(content)});
  }
  std::sort(out.begin(), out.end(), [](const ManifestEntry& a, const ManifestEntry& b) { return a.file < b.file; });
  return out;
}

inline std::vector<ManifestEntry> write_manifest(const std::filesystem::path& dir) {
  const auto entries = build_manifest(dir);
  CsvTable t;
  t.header = {"file", "bytes", "sha256"};
  for (const auto& e : entries) t.rows.push_back({e.file, std::to_string(e.bytes), e.sha256});
  write_csv((dir / "manifest.csv").string(), t);
  return entries;
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  try {
    write_text_file(p.string(), content);
  } catch (const std::exception& e) {
    throw IoError("cannot write " + p.string() + ": " + e.what());
  }
}

/// Writes whatever the report holds so far; partial reports produce the
/// subset of artifacts they can support.
inline void emit_partial(const ExperimentReport& r, const std::filesystem::path& dir) {
  ensure_directory(dir);
  const bool validation = r.kind == "validation";
  const std::string prefix = validation ? "validation" : "pipeline";
  if (r.truth && !validation) write_file(dir / "ground_truth.csv", to_csv_string(ground_truth_table(*r.truth)));
  if (!r.rows.empty()) {
    write_file(dir / (validation ? "validation.csv" : "results.csv"), to_csv_string(tables::results(r)));
    write_file(dir / (prefix + "_subsets.csv"), to_csv_string(tables::subsets(r)));
    write_file(dir / (prefix + "_best_points.csv"), to_csv_string(tables::best_points(r)));
    ensure_directory(dir / "tuning");
    for (std::size_t i = validation ? 1 : 0; i < r.rows.size(); ++i) {
      const auto& row = r.rows[i];
      if (row.tuning.observations.empty()) continue;
      write_file(dir / "tuning" / (prefix + "_" + file_slug(row.experiment) + ".csv"),
                 to_csv_string(tables::tuning(r.space, row.tuning)));
    }
  }
  if (r.importance) {
    write_file(dir / "importance.csv", to_csv_string(tables::importance(r, *r.importance)));
    write_file(dir / "attribution.svg", figures::attribution(r, *r.importance, "Integrated Gradients attribution"));
  }
  if (!r.clusterings.empty()) {
    write_file(dir / "clusters.csv", to_csv_string(tables::clusters(r)));
    ensure_directory(dir / "figures");
    for (const auto& c : r.clusterings) {
      write_file(dir / "figures" / ("clusters_k" + std::to_string(c.k) + ".svg"), figures::clusters(r, c));
    }
  }
  if (r.shap_importance) {
    write_file(dir / "shap_importance.csv", to_csv_string(tables::importance(r, *r.shap_importance)));
    write_file(dir / "shap_attribution.svg", figures::attribution(r, *r.shap_importance, "KernelSHAP attribution"));
  }
}

/// Writes every table and figure plus report JSON, then refreshes the manifest.
inline std::vector<ManifestEntry> emit_report(const ExperimentReport& r, const std::filesystem::path& dir) {
  emit_partial(r, dir);
  const bool validation = r.kind == "validation";
  write_file(dir / (validation ? "validation.json" : "report.json"), report_json_text(r));
  if (!r.rows.empty()) {
    write_file(dir / (validation ? "validation_mse.svg" : "mse.svg"), figures::mse(r, !validation));
  }
  write_file(dir / (validation ? "validation_config.txt" : "config.txt"), r.config_text);
  return write_manifest(dir);
}

}  // namespace igsel
