#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "igsel/attribution.hpp"
#include "igsel/data.hpp"
#include "igsel/error.hpp"
#include "igsel/tuning.hpp"

namespace igsel {

enum class Profile { Desk, Full };

inline const char* to_string(Profile p) { return p == Profile::Desk ? "desk" : "full"; }

inline Profile profile_from_string(const std::string& s) {
  if (s == "desk") return Profile::Desk;
  if (s == "full") return Profile::Full;
  throw ConfigError("unknown profile '" + s + "' (expected desk or full)");
}

enum class AttributionRows { Train, All };

/// Every knob of an experiment run. Defaults are the full-scale values.
struct PipelineConfig {
  Profile profile = Profile::Full;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::size_t workers = 1;

  /// "dummy" or a CSV path.
  std::string data_source = "dummy";
  std::string target_column = "y";
  std::vector<std::string> categorical_columns;
  std::vector<std::string> clean_rules;
  TargetScaling target_scaling = TargetScaling::None;
  DummySpec dummy;
  /// Unset means the dummy generator uses the master seed.
  bool dummy_seed_set = false;

  SplitPlan split;
  IgConfig ig;
  AttributionRows ig_rows = AttributionRows::Train;
  Aggregation aggregation = Aggregation::MeanAbsolute;

  std::vector<std::size_t> k_values = {2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t kmeans_restarts = 10;

  TuneBudget budget;
  TuningObjective objective = TuningObjective::CrossValidation;
  SearchSpace space = SearchSpace::network_default();

  std::size_t shap_budget = 2048;
  std::size_t shap_background = 100;
  /// Training rows explained by KernelSHAP for the validation top-n selector.
  std::size_t shap_explain = 100;

  std::vector<std::string> selectors = {"cross_check", "pearson", "lasso", "kernel_shap"};

  std::uint64_t dummy_seed() const { return dummy_seed_set ? dummy.seed : seed; }

  void validate() const {
    if (k_values.empty()) throw ConfigError("select.k_values must not be empty");
    for (std::size_t k : k_values) {
      if (k < 2) throw ConfigError("select.k_values entries must be >= 2");
    }
    if (workers == 0) throw ConfigError("workers must be >= 1");
    if (ig.n_steps == 0) throw ConfigError("ig.n_steps must be >= 1");
    if (budget.initial < 2) throw ConfigError("tune.initial must be >= 2");
    if (shap_background == 0 || shap_explain == 0) throw ConfigError("shap.background and shap.explain must be >= 1");
    for (const auto& s : selectors) {
      if (s != "cross_check" && s != "pearson" && s != "lasso" && s != "kernel_shap") {
        throw ConfigError("unknown selector '" + s + "'");
      }
    }
    try {
      split.validate();
      space.validate();
      if (data_source == "dummy") dummy.validate();
    } catch (const SpecificationError& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

/// "2-10" or "2,3,5" (ranges allowed inside lists).
inline std::vector<std::size_t> to_count_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(v)) {
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto a = to_uint(key, trim(item.substr(0, dash)));
      const auto b = to_uint(key, trim(item.substr(dash + 1)));
      if (b < a) throw ConfigError(key + ": descending range '" + item + "'");
      for (auto k = a; k <= b; ++k) out.push_back(static_cast<std::size_t>(k));
    } else {
      out.push_back(static_cast<std::size_t>(to_uint(key, item)));
    }
  }
  return out;
}

inline std::pair<double, double> to_bounds(const std::string& key, const std::string& v) {
  const auto parts = split_list(v);
  if (parts.size() != 2) throw ConfigError(key + ": expected 'lo,hi'");
  return {to_real(key, parts[0]), to_real(key, parts[1])};
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["profile"] = [](PipelineConfig& c, const std::string&, const std::string& v) { c.profile = profile_from_string(v); };
    t["seed"] = [](PipelineConfig& c, const std::string& k, const std::string& v) { c.seed = to_uint(k, v); };
    t["output.dir"] = [](PipelineConfig& c, const std::string&, const std::string& v) { c.output_dir = v; };
    t["workers"] = [](PipelineConfig& c, const std::string& k, const std::string& v) { c.workers = to_uint(k, v); };

    t["data.source"] = [](PipelineConfig& c, const std::string&, const std::string& v) { c.data_source = v; };
    t["data.target"] = [](PipelineConfig& c, const std::string&, const std::string& v) { c.target_column = v; };
    t["data.categorical"] = [](PipelineConfig& c, const std::string&, const std::string& v) {
      c.categorical_columns = split_list(v);
    };
    t["data.clean"] = [](PipelineConfig& c, const std::string&, const std::string& v) { c.clean_rules = split_list(v, ';'); };
    t["data.scale_target"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
      c.target_scaling = to_bool(k, v) ? TargetScaling::Standardize : TargetScaling::None;
    };

    t["dummy.n_features"] = [](PipelineConfig& c, const std::string& k, const std::string& v) { c.dummy.n_features = to_uint(k, v); };
    t["dummy.n_positive"] = [](PipelineConfig& c, const std::string& k, const std::string& v) { c.dummy.n_positive = to_uint(k, v); };
    t["dummy.n_negative"] = [](PipelineConfig& c, const std::string& k, const std::string& v) { c.dummy.n_negative = to_uint(k, v); };
    t["dummy.n_zero"] = [](PipelineConfig& c, const std::string& k, const std::string& v) { c.dummy.n_zero = to_uint(k, v); };
    t["dummy.n_samples"] = [](PipelineConfig& c, const std::string& k, const std::string& v) { c.dummy.n_samples = to_uint(k, v); };
    t["dummy.positive_range"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
      const auto [lo, hi] = to_bounds(k, v);
      c.dummy.positive_range = {lo, hi};
    };
    t["dummy.negative_range"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
      const auto [lo, hi] = to_bounds(k, v);
      c.dummy.negative_range = {lo, hi};
    };
    t["dummy.feature_range"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
      const auto [lo, hi] = to_bounds(k, v);
      c.dummy.feature_range = {lo, hi};
    };
    t["dummy.seed"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
      c.dummy.seed = to_uint(k, v);
      c.dummy_seed_set = true;
    };

    t["split.train_fraction"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
      c.split.train_fraction = to_real(k, v);
    };
    t["split.n_folds"] = [](PipelineConfig& c, const std::string& k, const std::string& v) { c.split.n_folds = to_uint(k, v); };

    t["ig.n_steps"] = [](PipelineConfig& c, const std::string& k, const std::string& v) { c.ig.n_steps = to_uint(k, v); };
    t["ig.quadrature"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
      if (v == "gauss_legendre") {
        c.ig.quadrature = Quadrature::GaussLegendre;
      } else if (v == "riemann") {
        c.ig.quadrature = Quadrature::Riemann;
      } else {
        throw ConfigError(k + ": expected gauss_legendre or riemann");
      }
    };
    t["ig.rows"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
      if (v == "train") {
        c.ig_rows = AttributionRows::Train;
      } else if (v == "all") {
        c.ig_rows = AttributionRows::All;
      } else {
        throw ConfigError(k + ": expected train or all");
      }
    };
    t["ig.aggregation"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
      if (v == "mean_absolute") {
        c.aggregation = Aggregation::MeanAbsolute;
      } else if (v == "mean_signed") {
        c.aggregation = Aggregation::MeanSigned;
      } else {
        throw ConfigError(k + ": expected mean_absolute or mean_signed");
      }
    };

    t["select.k_values"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
      c.k_values = to_count_list(k, v);
    };
    t["select.kmeans_restarts"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
      c.kmeans_restarts = to_uint(k, v);
    };

    t["tune.initial"] = [](PipelineConfig& c, const std::string& k, const std::string& v) { c.budget.initial = to_uint(k, v); };
    t["tune.infill"] = [](PipelineConfig& c, const std::string& k, const std::string& v) { c.budget.infill = to_uint(k, v); };
    t["tune.objective"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
      if (v == "cv") {
        c.objective = TuningObjective::CrossValidation;
      } else if (v == "holdout") {
        c.objective = TuningObjective::Holdout;
      } else {
        throw ConfigError(k + ": expected cv or holdout");
      }
    };
    for (const auto& p : SearchSpace::network_default().params) {
      if (p.kind == ParamKind::Categorical) {
        t["space." + p.name] = [name = p.name](PipelineConfig& c, const std::string& k, const std::string& v) {
          auto levels = split_list(v);
          if (levels.empty()) throw ConfigError(k + ": needs at least one level");
          for (const auto& l : levels) {
            if (name == "optimizer") {
              optimizer_from_string(l);
            } else {
              activation_from_string(l);
            }
          }
          c.space[name].levels = levels;
        };
      } else {
        t["space." + p.name] = [name = p.name](PipelineConfig& c, const std::string& k, const std::string& v) {
          const auto [lo, hi] = to_bounds(k, v);
          c.space[name].lo = lo;
          c.space[name].hi = hi;
        };
      }
    }

    t["shap.budget"] = [](PipelineConfig& c, const std::string& k, const std::string& v) { c.shap_budget = to_uint(k, v); };
    t["shap.background"] = [](PipelineConfig& c, const std::string& k, const std::string& v) {
      c.shap_background = to_uint(k, v);
    };
    t["shap.explain"] = [](PipelineConfig& c, const std::string& k, const std::string& v) { c.shap_explain = to_uint(k, v); };
    t["validate.selectors"] = [](PipelineConfig& c, const std::string&, const std::string& v) { c.selectors = split_list(v); };
    return t;
  }();
  return table;
}

}  // namespace config_detail

/// Overrides applied on top of the full-scale defaults by `profile = desk`.
inline void apply_profile(PipelineConfig& c, Profile p) {
  c.profile = p;
  if (p == Profile::Full) return;
  c.dummy.n_samples = 2000;
  c.budget = {5, 10};
  c.objective = TuningObjective::Holdout;
  c.space["l1"].hi = 7;
  c.space["epochs"].hi = 8;
  c.shap_budget = 512;
  c.shap_background = 20;
  c.shap_explain = 20;
}

inline std::vector<std::pair<std::string, std::string>> parse_config_entries(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = config_detail::trim(line.substr(0, eq));
    std::string value = config_detail::trim(line.substr(eq + 1));
    if (!config_detail::setters().contains(key)) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    for (const auto& [k, v] : entries) {
      if (k == key) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

inline void apply_entry(PipelineConfig& c, const std::string& key, const std::string& value) {
  const auto it = config_detail::setters().find(key);
  if (it == config_detail::setters().end()) throw ConfigError("unknown key '" + key + "'");
  try {
    it->second(c, key, value);
  } catch (const SpecificationError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

/// Builds a config from key = value text. The profile preset (from the
/// `profile` key unless `profile_override` is given) is applied first, so the
/// remaining keys override it.
inline PipelineConfig parse_config(std::istream& in, std::optional<Profile> profile_override = std::nullopt) {
  const auto entries = parse_config_entries(in);
  PipelineConfig c;
  Profile p = Profile::Full;
  for (const auto& [k, v] : entries) {
    if (k == "profile") p = profile_from_string(v);
  }
  if (profile_override) p = *profile_override;
  apply_profile(c, p);
  for (const auto& [k, v] : entries) {
    if (k != "profile") apply_entry(c, k, v);
  }
  c.validate();
  return c;
}

inline PipelineConfig parse_config(const std::string& text, std::optional<Profile> profile_override = std::nullopt) {
  std::istringstream in(text);
  return parse_config(in, profile_override);
}

inline PipelineConfig load_config(const std::string& path, std::optional<Profile> profile_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  return parse_config(in, profile_override);
}

inline PipelineConfig preset(Profile p) {
  PipelineConfig c;
  apply_profile(c, p);
  return c;
}

namespace config_detail {

inline std::string bounds(double lo, double hi) { return format_real(lo) + "," + format_real(hi); }

inline std::string join(const std::vector<std::string>& v, const std::string& sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

}  // namespace config_detail

/// Serializes every field; parse_config(to_config_text(c)) reproduces c.
inline std::string to_config_text(const PipelineConfig& c) {
  using namespace config_detail;
  std::ostringstream o;
  o << "profile = " << to_string(c.profile) << '\n';
  o << "seed = " << c.seed << '\n';
  o << "output.dir = " << c.output_dir << '\n';
  o << "workers = " << c.workers << '\n';
  o << "data.source = " << c.data_source << '\n';
  o << "data.target = " << c.target_column << '\n';
  o << "data.categorical = " << join(c.categorical_columns) << '\n';
  o << "data.clean = " << join(c.clean_rules, "; ") << '\n';
  o << "data.scale_target = " << (c.target_scaling == TargetScaling::Standardize ? "true" : "false") << '\n';
  o << "dummy.n_features = " << c.dummy.n_features << '\n';
  o << "dummy.n_positive = " << c.dummy.n_positive << '\n';
  o << "dummy.n_negative = " << c.dummy.n_negative << '\n';
  o << "dummy.n_zero = " << c.dummy.n_zero << '\n';
  o << "dummy.n_samples = " << c.dummy.n_samples << '\n';
  o << "dummy.positive_range = " << bounds(c.dummy.positive_range.lo, c.dummy.positive_range.hi) << '\n';
  o << "dummy.negative_range = " << bounds(c.dummy.negative_range.lo, c.dummy.negative_range.hi) << '\n';
  o << "dummy.feature_range = " << bounds(c.dummy.feature_range.lo, c.dummy.feature_range.hi) << '\n';
  if (c.dummy_seed_set) o << "dummy.seed = " << c.dummy.seed << '\n';
  o << "split.train_fraction = " << format_real(c.split.train_fraction) << '\n';
  o << "split.n_folds = " << c.split.n_folds << '\n';
  o << "ig.n_steps = " << c.ig.n_steps << '\n';
  o << "ig.quadrature = " << to_string(c.ig.quadrature) << '\n';
  o << "ig.rows = " << (c.ig_rows == AttributionRows::Train ? "train" : "all") << '\n';
  o << "ig.aggregation = " << to_string(c.aggregation) << '\n';
  std::vector<std::string> ks;
  for (auto k : c.k_values) ks.push_back(std::to_string(k));
  o << "select.k_values = " << join(ks) << '\n';
  o << "select.kmeans_restarts = " << c.kmeans_restarts << '\n';
  o << "tune.initial = " << c.budget.initial << '\n';
  o << "tune.infill = " << c.budget.infill << '\n';
  o << "tune.objective = " << to_string(c.objective) << '\n';
  for (const auto& p : c.space.params) {
    o << "space." << p.name << " = " << (p.kind == ParamKind::Categorical ? join(p.levels) : bounds(p.lo, p.hi)) << '\n';
  }
  o << "shap.budget = " << c.shap_budget << '\n';
  o << "shap.background = " << c.shap_background << '\n';
  o << "shap.explain = " << c.shap_explain << '\n';
  o << "validate.selectors = " << join(c.selectors) << '\n';
  return o.str();
}

}  // namespace igsel
