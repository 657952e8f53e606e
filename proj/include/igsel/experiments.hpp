#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "igsel/attribution.hpp"
#include "igsel/config.hpp"
#include "igsel/csv.hpp"
#include "igsel/data.hpp"
#include "igsel/error.hpp"
#include "igsel/lasso.hpp"
#include "igsel/nn.hpp"
#include "igsel/parallel.hpp"
#include "igsel/random.hpp"
#include "igsel/selection.hpp"
#include "igsel/tuning.hpp"

namespace igsel {

// ---------------------------------------------------------------------------
// Data preparation.

/// Cleaned data, its scaled copy and the split every stage shares.
struct PreparedData {
  Dataset raw;
  Dataset scaled;
  StandardScaler scaler;
  Split split;
  std::optional<GroundTruth> truth;
  std::size_t rows_loaded = 0;
  std::vector<std::string> warnings;

  ModelContext context(std::size_t workers) const { return {&scaled, &split, workers}; }
};

inline Dataset load_dataset(const PipelineConfig& cfg, std::optional<GroundTruth>* truth = nullptr) {
  if (cfg.data_source == "dummy") {
    DummySpec spec = cfg.dummy;
    spec.seed = cfg.dummy_seed();
    auto d = generate_dummy(spec);
    if (truth) *truth = std::move(d.truth);
    return std::move(d.data);
  }
  const CsvTable table = read_csv(cfg.data_source);
  std::set<std::size_t> cats;
  for (const auto& name : cfg.categorical_columns) cats.insert(table.column_index(name));
  const std::vector<std::size_t> cat_list(cats.begin(), cats.end());
  return dataset_from_table(cat_list.empty() ? table : ordinal_encode(table, cat_list), cfg.target_column, cats);
}

inline PreparedData prepare_data(const PipelineConfig& cfg) {
  PreparedData p;
  Dataset loaded = load_dataset(cfg, &p.truth);
  p.rows_loaded = loaded.n_samples();
  std::vector<RowPredicate> predicates;
  for (const auto& r : cfg.clean_rules) predicates.push_back(rules::parse(r, loaded));
  Dataset cleaned = clean(loaded, predicates);
  if (!cleaned.all_finite()) {
    const std::vector<RowPredicate> finite{rules::no_missing()};
    const std::size_t before = cleaned.n_samples();
    cleaned = clean(cleaned, finite);
    p.warnings.push_back("dropped " + std::to_string(before - cleaned.n_samples()) +
                         " rows with missing or non-finite values");
  }
  if (cleaned.n_samples() != p.rows_loaded) {
    p.warnings.push_back("cleaning kept " + std::to_string(cleaned.n_samples()) + " of " +
                         std::to_string(p.rows_loaded) + " rows");
  }
  if (cleaned.n_samples() == 0) throw SpecificationError("no rows left after cleaning");
  SplitPlan plan = cfg.split;
  plan.seed = derive_seed(cfg.seed, "split");
  p.split = split(cleaned, plan);
  p.scaler = fit_scaler(cleaned, p.split.train);
  p.scaled = p.scaler.transform(cleaned, cfg.target_scaling);
  p.raw = std::move(cleaned);
  return p;
}

// ---------------------------------------------------------------------------
// Per-subset tuning and scoring.

/// One line of a results table: a subset, its tuning run and its scores.
struct ReportRow {
  std::string experiment;
  FeatureSubset subset;
  TuningRun tuning;
  CvReport cv;
  /// MSE on the held-out test rows of a model trained on all training rows.
  double test_mse = std::numeric_limits<double>::quiet_NaN();

  const HyperPoint& best_point() const { return tuning.best().point; }
};

/// Seeds depend on the subset's contents, never on its position in a list,
/// so any subset can be re-run in isolation.
inline std::uint64_t subset_seed(std::uint64_t master, const FeatureSubset& s) {
  std::string key;
  for (std::size_t i : s.indices) key += std::to_string(i) + ',';
  return derive_seed(master, "subset", {hash_tag(key)});
}

inline std::string experiment_label(const FeatureSubset& s) {
  if (!s.provenance.empty() && s.provenance.front().rfind("k=", 0) == 0) return "k=" + format_k_list(s.provenance);
  if (s.provenance.empty()) return "subset";
  std::string out;
  for (std::size_t i = 0; i < s.provenance.size(); ++i) out += (i ? "; " : "") + s.provenance[i];
  return out;
}

inline ReportRow tune_row(const PipelineConfig& cfg, const PreparedData& data, const FeatureSubset& subset,
                          std::size_t workers) {
  ReportRow row;
  row.experiment = experiment_label(subset);
  row.subset = subset;
  row.tuning = tune(data.context(workers), subset, cfg.space, cfg.budget, derive_seed(subset_seed(cfg.seed, subset), "tune"),
                    cfg.objective);
  if (!std::isfinite(row.tuning.best().value)) {
    throw Error("every tuning evaluation failed for " + row.experiment);
  }
  return row;
}

inline void score_row(const PipelineConfig& cfg, const PreparedData& data, ReportRow& row, std::size_t workers) {
  const std::uint64_t seed = subset_seed(cfg.seed, row.subset);
  const NetworkSettings net = materialize(cfg.space, row.best_point());
  row.cv = cross_validate(data.context(workers), row.subset, net, derive_seed(seed, "cv"));
  if (data.split.test.empty()) return;
  const Dataset d = data.scaled.select_columns(row.subset.indices);
  try {
    row.test_mse = detail::fit_and_score(d, data.split.train, data.split.test, net, derive_seed(seed, "test"));
  } catch (const TrainingError&) {
    row.test_mse = std::numeric_limits<double>::infinity();
  }
}

/// Tunes and scores every subset. Subsets run concurrently when workers > 1.
inline std::vector<ReportRow> evaluate_subsets(const PipelineConfig& cfg, const PreparedData& data,
                                               const std::vector<FeatureSubset>& subsets) {
  std::vector<ReportRow> rows(subsets.size());
  const bool outer = cfg.workers > 1 && subsets.size() > 1;
  const std::size_t inner = outer ? 1 : cfg.workers;
  parallel_for(subsets.size(), outer ? cfg.workers : 1, [&](std::size_t i) {
    rows[i] = tune_row(cfg, data, subsets[i], inner);
    score_row(cfg, data, rows[i], inner);
  });
  return rows;
}

/// The network behind the attribution analysis: best settings for `subset`,
/// trained on every training row.
inline Mlp train_final_model(const PipelineConfig& cfg, const PreparedData& data, const FeatureSubset& subset,
                             const HyperPoint& point) {
  const Dataset d = data.scaled.select_columns(subset.indices);
  const NetworkSettings net = materialize(cfg.space, point);
  const std::uint64_t seed = derive_seed(subset_seed(cfg.seed, subset), "final");
  Mlp model = build(net.architecture(d.n_features()), derive_seed(seed, "model"));
  return train(std::move(model), d, data.split.train, net.train_config(derive_seed(seed, "train")));
}

inline RowIndices attribution_rows(const PipelineConfig& cfg, const PreparedData& data) {
  return cfg.ig_rows == AttributionRows::Train ? data.split.train : iota_indices(data.scaled.n_samples());
}

// ---------------------------------------------------------------------------
// Reports.

struct ExperimentReport {
  /// "pipeline" or "validation".
  std::string kind = "pipeline";
  std::uint64_t seed = 0;
  /// Effective configuration without run-local keys (output.dir, workers).
  std::string config_text;
  std::vector<std::string> feature_names;
  SearchSpace space;
  std::optional<GroundTruth> truth;
  std::string objective;
  std::size_t n_folds = 0;
  std::vector<ReportRow> rows;
  /// Pipeline: index of the best elimination subset. Validation: the IG row.
  std::size_t best_row = 0;
  std::optional<GlobalImportance> importance;
  std::vector<ClusterResult> clusterings;
  std::optional<GlobalImportance> shap_importance;
  std::optional<bool> lasso_exact;
  std::vector<std::string> warnings;

  const ReportRow& best() const { return rows.at(best_row); }
};

using Logger = std::function<void(const std::string&)>;

struct PipelineHooks {
  Logger log;
  /// Called after every stage with the report as far as it is built, so
  /// callers can persist partial artifacts.
  std::function<void(const std::string& stage, const ExperimentReport&)> stage_done;
};

inline std::string run_config_text(const PipelineConfig& cfg) {
  std::string out;
  std::istringstream in(to_config_text(cfg));
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("output.dir", 0) == 0 || line.rfind("workers", 0) == 0) continue;
    out += line + '\n';
  }
  return out;
}

namespace detail {

template <typename Fn>
void run_stage(const std::string& name, const PipelineHooks& hooks, const ExperimentReport& rep, Fn&& fn) {
  if (hooks.log) hooks.log("stage " + name);
  try {
    fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
  if (hooks.stage_done) hooks.stage_done(name, rep);
}

inline ExperimentReport report_header(const PipelineConfig& cfg, const std::string& kind) {
  ExperimentReport rep;
  rep.kind = kind;
  rep.seed = cfg.seed;
  rep.config_text = run_config_text(cfg);
  rep.space = cfg.space;
  rep.objective = to_string(cfg.objective);
  rep.n_folds = cfg.split.n_folds;
  return rep;
}

}  // namespace detail

/// Tune on all features, cross-validate, attribute, eliminate clusters for
/// every k, then re-tune and cross-validate each distinct subset.
inline ExperimentReport run_pipeline(const PipelineConfig& cfg, const PipelineHooks& hooks = {}) {
  cfg.validate();
  ExperimentReport rep = detail::report_header(cfg, "pipeline");
  PreparedData data;
  Elimination elim;

  detail::run_stage("data", hooks, rep, [&] {
    data = prepare_data(cfg);
    rep.feature_names = data.scaled.column_names();
    rep.truth = data.truth;
    rep.warnings = data.warnings;
  });
  detail::run_stage("tune_full", hooks, rep, [&] {
    rep.rows.push_back(tune_row(cfg, data, all_features(data.scaled.n_features()), cfg.workers));
  });
  detail::run_stage("cv_full", hooks, rep, [&] { score_row(cfg, data, rep.rows.front(), cfg.workers); });
  detail::run_stage("attribute", hooks, rep, [&] {
    const FeatureSubset all = rep.rows.front().subset;
    const Mlp model = train_final_model(cfg, data, all, rep.rows.front().best_point());
    const auto rows = attribution_rows(cfg, data);
    rep.importance = aggregate(attribute_dataset(model, data.scaled, rows, cfg.ig, cfg.workers), cfg.aggregation);
  });
  detail::run_stage("select", hooks, rep, [&] {
    KMeansOptions km;
    km.restarts = cfg.kmeans_restarts;
    elim = eliminate_lowest(*rep.importance, cfg.k_values, derive_seed(cfg.seed, "kmeans"), km);
    rep.clusterings = elim.clusterings;
    rep.warnings.insert(rep.warnings.end(), elim.warnings.begin(), elim.warnings.end());
  });
  detail::run_stage("retune", hooks, rep, [&] {
    auto rows = evaluate_subsets(cfg, data, elim.subsets);
    for (auto& r : rows) rep.rows.push_back(std::move(r));
    rep.best_row = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
      if (rep.rows[i].cv.mean_mse < best) {
        best = rep.rows[i].cv.mean_mse;
        rep.best_row = i;
      }
    }
    if (rep.best_row == 0) rep.warnings.push_back("no elimination subset was scored; the full feature set is the best row");
  });
  return rep;
}

/// Subsets proposed by the comparison selectors, each of size |best|.
struct ValidationSubsets {
  std::vector<FeatureSubset> subsets;
  std::optional<GlobalImportance> shap_importance;
  std::optional<bool> lasso_exact;
  std::vector<std::string> warnings;
};

inline ValidationSubsets validation_subsets(const PipelineConfig& cfg, const PreparedData& data,
                                            const FeatureSubset& best, const HyperPoint& full_point) {
  ValidationSubsets out;
  const std::size_t n = best.size();
  const std::size_t m = data.scaled.n_features();
  for (const auto& sel : cfg.selectors) {
    if (sel == "cross_check") {
      if (n == m) {
        out.warnings.push_back("cross-check skipped: the best subset keeps every feature");
        continue;
      }
      out.subsets.push_back(complement(best, m));
    } else if (sel == "pearson") {
      out.subsets.push_back(pearson_top_n(data.scaled, data.split.train, n));
    } else if (sel == "lasso") {
      auto ls = lasso_select(data.scaled, data.split.train, n);
      out.lasso_exact = ls.exact;
      if (!ls.exact) {
        out.warnings.push_back("lasso: no penalty gave exactly " + std::to_string(n) + " nonzeros; kept " +
                               std::to_string(ls.subset.size()));
      }
      if (ls.subset.indices.empty()) {
        out.warnings.push_back("lasso selected no features; skipped");
        continue;
      }
      out.subsets.push_back(std::move(ls.subset));
    } else if (sel == "kernel_shap") {
      const FeatureSubset all = all_features(m);
      const Mlp model = train_final_model(cfg, data, all, full_point);
      Rng bg_rng(derive_seed(cfg.seed, "kernel_shap.background"));
      Rng ex_rng(derive_seed(cfg.seed, "kernel_shap.explain"));
      const auto& train_rows = data.split.train;
      const auto bg_order = permutation(train_rows.size(), bg_rng);
      const auto ex_order = permutation(train_rows.size(), ex_rng);
      const std::size_t n_bg = std::min(cfg.shap_background, train_rows.size());
      const std::size_t n_ex = std::min(cfg.shap_explain, train_rows.size());
      Matrix background(static_cast<Eigen::Index>(n_bg), static_cast<Eigen::Index>(m));
      for (std::size_t i = 0; i < n_bg; ++i) {
        background.row(static_cast<Eigen::Index>(i)) =
            data.scaled.features().row(static_cast<Eigen::Index>(train_rows[bg_order[i]]));
      }
      RowIndices explain;
      for (std::size_t i = 0; i < n_ex; ++i) explain.push_back(train_rows[ex_order[i]]);
      std::sort(explain.begin(), explain.end());
      KernelShapConfig sc;
      sc.budget = cfg.shap_budget;
      sc.seed = derive_seed(cfg.seed, "kernel_shap");
      const auto attr = attribute_dataset_shap(model, data.scaled, explain, background, sc, cfg.workers);
      out.shap_importance = aggregate(attr, Aggregation::MeanAbsolute);
      out.subsets.push_back(top_n_by_score(*out.shap_importance, n, "kernel_shap"));
    }
  }
  return out;
}

/// Re-tunes and cross-validates the cross-check, Pearson, Lasso and
/// KernelSHAP subsets (n = size of the pipeline's best subset). The first
/// row repeats the pipeline's best subset for comparison.
inline ExperimentReport run_validation(const PipelineConfig& cfg, const ExperimentReport& pipeline,
                                       const PipelineHooks& hooks = {}) {
  cfg.validate();
  if (pipeline.kind != "pipeline" || pipeline.rows.empty()) {
    throw SpecificationError("validation needs a completed pipeline report");
  }
  ExperimentReport rep = detail::report_header(cfg, "validation");
  PreparedData data;
  ValidationSubsets vs;

  detail::run_stage("data", hooks, rep, [&] {
    data = prepare_data(cfg);
    if (data.scaled.column_names() != pipeline.feature_names) {
      throw SpecificationError("pipeline report columns do not match the configured data");
    }
    rep.feature_names = pipeline.feature_names;
    rep.truth = data.truth;
    rep.warnings = data.warnings;
    ReportRow ig = pipeline.best();
    ig.experiment = "integrated_gradients (" + ig.experiment + ")";
    rep.rows.push_back(std::move(ig));
    rep.best_row = 0;
  });
  detail::run_stage("selectors", hooks, rep, [&] {
    vs = validation_subsets(cfg, data, pipeline.best().subset, pipeline.rows.front().best_point());
    rep.shap_importance = vs.shap_importance;
    rep.lasso_exact = vs.lasso_exact;
    rep.warnings.insert(rep.warnings.end(), vs.warnings.begin(), vs.warnings.end());
  });
  detail::run_stage("retune", hooks, rep, [&] {
    auto rows = evaluate_subsets(cfg, data, vs.subsets);
    for (auto& r : rows) rep.rows.push_back(std::move(r));
  });
  return rep;
}

}  // namespace igsel
