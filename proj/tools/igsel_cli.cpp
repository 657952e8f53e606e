// igsel: attribution-driven feature selection for MLP regression.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "igsel/igsel.hpp"

namespace fs = std::filesystem;
using namespace igsel;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string profile;
  std::optional<std::size_t> workers;
  bool quiet = false;
};

class Clock {
public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

PipelineConfig resolve_config(const GlobalOptions& g) {
  std::optional<Profile> profile;
  if (!g.profile.empty()) profile = profile_from_string(g.profile);
  PipelineConfig cfg = g.config_path.empty() ? preset(profile.value_or(Profile::Full)) : load_config(g.config_path, profile);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out.empty()) cfg.output_dir = g.out;
  if (g.workers) cfg.workers = *g.workers;
  cfg.validate();
  return cfg;
}

Logger make_logger(const GlobalOptions& g, const Clock& clock) {
  if (g.quiet) return {};
  return [&clock](const std::string& msg) {
    std::fprintf(stderr, "[%8.1fs] %s\n", clock.seconds(), msg.c_str());
  };
}

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

void print_rows(const ExperimentReport& r) {
  std::printf("%-36s %10s %14s %14s\n", "experiment", "n_features", "mean_mse", "sd_mse");
  for (const auto& row : r.rows) {
    std::printf("%-36s %10zu %14.6g %14.6g\n", row.experiment.c_str(), row.subset.size(), row.cv.mean_mse, row.cv.sd_mse);
  }
}

int cmd_generate(const PipelineConfig& cfg, const Logger& log) {
  if (cfg.data_source != "dummy") throw ConfigError("generate needs data.source = dummy");
  DummySpec spec = cfg.dummy;
  spec.seed = cfg.dummy_seed();
  const auto d = generate_dummy(spec);
  const fs::path dir = cfg.output_dir;
  ensure_directory(dir);
  write_file(dir / "data.csv", to_csv_string(dataset_to_table(d.data)));
  write_file(dir / "ground_truth.csv", to_csv_string(ground_truth_table(d.truth)));
  write_manifest(dir);
  say(log, "wrote " + std::to_string(d.data.n_samples()) + " x " + std::to_string(d.data.n_features()) + " to " +
               (dir / "data.csv").string());
  return 0;
}

int cmd_tune(const PipelineConfig& cfg, const Logger& log, const std::string& subsets_file, const std::string& experiment) {
  const PreparedData data = prepare_data(cfg);
  FeatureSubset subset = all_features(data.scaled.n_features());
  if (!subsets_file.empty()) {
    const auto all = tables::subsets_from_table(read_csv(subsets_file));
    auto it = std::find_if(all.begin(), all.end(), [&](const auto& p) { return p.first == experiment; });
    if (it == all.end()) throw SpecificationError("no experiment '" + experiment + "' in " + subsets_file);
    subset = it->second;
  }
  say(log, "tuning on " + std::to_string(subset.size()) + " features");
  ReportRow row = tune_row(cfg, data, subset, cfg.workers);
  say(log, "cross-validating best point");
  score_row(cfg, data, row, cfg.workers);

  ExperimentReport rep;
  rep.kind = "tune";
  rep.feature_names = data.scaled.column_names();
  rep.space = cfg.space;
  rep.n_folds = cfg.split.n_folds;
  rep.rows.push_back(row);
  const fs::path dir = cfg.output_dir;
  ensure_directory(dir / "tuning");
  write_file(dir / "tuning" / ("tune_" + file_slug(row.experiment) + ".csv"), to_csv_string(tables::tuning(cfg.space, row.tuning)));
  write_file(dir / "best_point.csv", to_csv_string(tables::point_table(cfg.space, row.best_point())));
  write_file(dir / "cv.csv", to_csv_string(tables::results(rep)));
  write_manifest(dir);
  print_rows(rep);
  std::printf("best: %s\n", cfg.space.describe(row.best_point()).c_str());
  return 0;
}

int cmd_attribute(const PipelineConfig& cfg, const Logger& log, std::string point_file) {
  const fs::path dir = cfg.output_dir;
  if (point_file.empty()) point_file = (dir / "best_point.csv").string();
  if (!fs::exists(point_file)) throw IoError(point_file + " not found; run `igsel tune` first or pass --point");
  const HyperPoint point = tables::point_from_table(cfg.space, read_csv(point_file));
  const PreparedData data = prepare_data(cfg);
  const FeatureSubset all = all_features(data.scaled.n_features());
  say(log, "training " + cfg.space.describe(point));
  const Mlp model = train_final_model(cfg, data, all, point);
  const auto rows = attribution_rows(cfg, data);
  say(log, "integrated gradients over " + std::to_string(rows.size()) + " rows");
  const auto attr = attribute_dataset(model, data.scaled, rows, cfg.ig, cfg.workers);

  ExperimentReport rep;
  rep.kind = "attribute";
  rep.feature_names = data.scaled.column_names();
  rep.truth = data.truth;
  rep.importance = aggregate(attr, cfg.aggregation);
  ensure_directory(dir);
  CsvTable per_sample;
  per_sample.header = {"row"};
  for (const auto& n : rep.feature_names) per_sample.header.push_back(n);
  for (Eigen::Index r = 0; r < attr.values.rows(); ++r) {
    std::vector<std::string> cells{std::to_string(attr.rows[static_cast<std::size_t>(r)])};
    for (Eigen::Index c = 0; c < attr.values.cols(); ++c) cells.push_back(format_real(attr.values(r, c)));
    per_sample.rows.push_back(std::move(cells));
  }
  write_file(dir / "attributions.csv", to_csv_string(per_sample));
  write_file(dir / "importance.csv", to_csv_string(tables::importance(rep, *rep.importance)));
  write_file(dir / "attribution.svg", figures::attribution(rep, *rep.importance, "Integrated Gradients attribution"));
  save_checkpoint(model, (dir / "model.txt").string());
  write_manifest(dir);
  return 0;
}

int cmd_select(const PipelineConfig& cfg, const Logger& log, std::string importance_file) {
  const fs::path dir = cfg.output_dir;
  if (importance_file.empty()) importance_file = (dir / "importance.csv").string();
  if (!fs::exists(importance_file)) throw IoError(importance_file + " not found; run `igsel attribute` first");
  const CsvTable t = read_csv(importance_file);
  ExperimentReport rep;
  rep.kind = "select";
  GlobalImportance g;
  g.aggregation = cfg.aggregation;
  const std::size_t fc = t.column_index("feature"), sc = t.column_index("score");
  for (const auto& row : t.rows) {
    rep.feature_names.push_back(row.at(fc));
    g.scores.push_back(parse_real(row.at(sc)));
  }
  rep.importance = g;
  KMeansOptions km;
  km.restarts = cfg.kmeans_restarts;
  const Elimination elim = eliminate_lowest(g, cfg.k_values, derive_seed(cfg.seed, "kmeans"), km);
  rep.clusterings = elim.clusterings;
  for (const auto& w : elim.warnings) say(log, "warning: " + w);
  for (const auto& s : elim.subsets) {
    ReportRow row;
    row.experiment = experiment_label(s);
    row.subset = s;
    rep.rows.push_back(std::move(row));
  }
  ensure_directory(dir / "figures");
  write_file(dir / "subsets.csv", to_csv_string(tables::subsets(rep)));
  write_file(dir / "clusters.csv", to_csv_string(tables::clusters(rep)));
  for (const auto& c : rep.clusterings) {
    write_file(dir / "figures" / ("clusters_k" + std::to_string(c.k) + ".svg"), figures::clusters(rep, c));
  }
  write_manifest(dir);
  for (const auto& row : rep.rows) std::printf("%-16s %zu features\n", row.experiment.c_str(), row.subset.size());
  return 0;
}

PipelineHooks hooks_for(const fs::path& dir, const Logger& log) {
  PipelineHooks h;
  h.log = log;
  h.stage_done = [dir](const std::string&, const ExperimentReport& partial) { emit_partial(partial, dir); };
  return h;
}

int cmd_pipeline(const PipelineConfig& cfg, const Logger& log) {
  const fs::path dir = cfg.output_dir;
  ensure_directory(dir);
  const ExperimentReport rep = run_pipeline(cfg, hooks_for(dir, log));
  const auto manifest = emit_report(rep, dir);
  for (const auto& w : rep.warnings) say(log, "warning: " + w);
  print_rows(rep);
  std::printf("best subset: %s (%zu features)\n", rep.best().experiment.c_str(), rep.best().subset.size());
  say(log, "wrote " + std::to_string(manifest.size()) + " files to " + dir.string());
  return 0;
}

int cmd_validate(const PipelineConfig& cfg, const Logger& log, std::string report_file) {
  const fs::path dir = cfg.output_dir;
  if (report_file.empty()) report_file = (dir / "report.json").string();
  if (!fs::exists(report_file)) throw IoError(report_file + " not found; run `igsel pipeline` first");
  const ExperimentReport pipeline = load_report(report_file);
  ensure_directory(dir);
  const ExperimentReport rep = run_validation(cfg, pipeline, hooks_for(dir, log));
  emit_report(rep, dir);
  for (const auto& w : rep.warnings) say(log, "warning: " + w);
  print_rows(rep);
  return 0;
}

int cmd_report(const PipelineConfig& cfg, const Logger& log, std::string report_file) {
  const fs::path dir = cfg.output_dir;
  if (report_file.empty()) report_file = (dir / "report.json").string();
  bool any = false;
  for (const fs::path& p : {fs::path(report_file), fs::path(report_file).parent_path() / "validation.json"}) {
    if (!fs::exists(p)) continue;
    const ExperimentReport rep = load_report(p);
    emit_report(rep, dir);
    say(log, "re-emitted " + p.string());
    print_rows(rep);
    any = true;
  }
  if (!any) throw IoError(report_file + " not found; run `igsel pipeline` first");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribution-driven feature selection for MLP regression"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out", g.out, "output directory (overrides output.dir)");
  app.add_option("--profile", g.profile, "preset applied before the config keys")->check(CLI::IsMember({"desk", "full"}));
  app.add_option("--workers", g.workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("-q,--quiet", g.quiet, "no progress output");

  auto* generate = app.add_subcommand("generate", "write the synthetic dataset and its coefficients");
  std::string subsets_file, experiment = "all";
  auto* tune_cmd = app.add_subcommand("tune", "tune the network and cross-validate the best point");
  tune_cmd->add_option("--subsets", subsets_file, "subsets CSV to take the feature subset from")->check(CLI::ExistingFile);
  tune_cmd->add_option("--experiment", experiment, "experiment name inside --subsets");
  std::string point_file;
  auto* attribute = app.add_subcommand("attribute", "train at the tuned point and compute Integrated Gradients");
  attribute->add_option("--point", point_file, "best_point.csv from `tune`");
  std::string importance_file;
  auto* select = app.add_subcommand("select", "cluster importance scores and eliminate the lowest cluster per k");
  select->add_option("--importance", importance_file, "importance.csv from `attribute`");
  auto* pipeline = app.add_subcommand("pipeline", "run the full feature-selection pipeline");
  std::string report_file;
  auto* validate = app.add_subcommand("validate", "compare against cross-check, Pearson, Lasso and KernelSHAP");
  validate->add_option("--report", report_file, "report.json from `pipeline`");
  auto* report = app.add_subcommand("report", "re-emit tables, figures and manifest from saved reports");
  report->add_option("--report", report_file, "report.json from `pipeline`");

  CLI11_PARSE(app, argc, argv);

  const Clock clock;
  try {
    const PipelineConfig cfg = resolve_config(g);
    const Logger log = make_logger(g, clock);
    if (generate->parsed()) return cmd_generate(cfg, log);
    if (tune_cmd->parsed()) return cmd_tune(cfg, log, subsets_file, experiment);
    if (attribute->parsed()) return cmd_attribute(cfg, log, point_file);
    if (select->parsed()) return cmd_select(cfg, log, importance_file);
    if (pipeline->parsed()) return cmd_pipeline(cfg, log);
    if (validate->parsed()) return cmd_validate(cfg, log, report_file);
    if (report->parsed()) return cmd_report(cfg, log, report_file);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
