#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "igsel/data.hpp"
#include "igsel/error.hpp"
#include "igsel/gp.hpp"
#include "igsel/nn.hpp"
#include "igsel/parallel.hpp"
#include "igsel/random.hpp"
#include "igsel/selection.hpp"

namespace igsel {

// ---------------------------------------------------------------------------
// Search space.

enum class ParamKind { Integer, Real, Categorical };

struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::Real;
  double lo = 0.0;
  double hi = 1.0;
  /// Integer values are exponents: the materialized value is 2^x.
  bool pow2 = false;
  std::vector<std::string> levels;

  std::size_t n_levels() const { return levels.size(); }
};

/// Raw coordinates in parameter order. Integer parameters hold integral
/// values (the exponent for 2^x parameters), categorical ones a level index.
struct HyperPoint {
  std::vector<double> values;
  bool operator==(const HyperPoint&) const = default;
};

struct SearchSpace {
  std::vector<ParamSpec> params;

  /// Bounds and levels of the tuned network.
  static SearchSpace network_default() {
    SearchSpace s;
    s.params = {
        {"l1", ParamKind::Integer, 5, 9, true, {}},
        {"epochs", ParamKind::Integer, 5, 10, true, {}},
        {"batch_size", ParamKind::Integer, 3, 6, true, {}},
        {"dropout_prob", ParamKind::Real, 0.005, 0.25, false, {}},
        {"lr_mult", ParamKind::Real, 0.25, 5.0, false, {}},
        {"patience", ParamKind::Integer, 3, 5, true, {}},
        {"optimizer", ParamKind::Categorical, 0, 0, false, {"Adadelta", "Adamax", "Adagrad"}},
        {"act_fn", ParamKind::Categorical, 0, 0, false, {"ReLU", "LeakyReLU"}},
    };
    return s;
  }

  std::size_t size() const { return params.size(); }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].name == name) return i;
    }
    return std::nullopt;
  }

  std::size_t index(const std::string& name) const {
    if (auto i = find(name)) return *i;
    throw SpecificationError("search space has no parameter '" + name + "'");
  }

  ParamSpec& operator[](const std::string& name) { return params[index(name)]; }
  const ParamSpec& operator[](const std::string& name) const { return params[index(name)]; }

  void validate() const {
    for (const auto& p : params) {
      if (p.kind == ParamKind::Categorical) {
        if (p.levels.empty()) throw SpecificationError("categorical parameter '" + p.name + "' has no levels");
      } else if (!(p.hi >= p.lo)) {
        throw SpecificationError("parameter '" + p.name + "' has hi < lo");
      } else if (p.kind == ParamKind::Integer && (p.lo != std::floor(p.lo) || p.hi != std::floor(p.hi))) {
        throw SpecificationError("integer parameter '" + p.name + "' needs integral bounds");
      }
    }
  }

  /// Maps a unit-interval coordinate onto parameter i's grid.
  double from_unit(std::size_t i, double u) const {
    const auto& p = params[i];
    u = std::clamp(u, 0.0, 1.0);
    switch (p.kind) {
      case ParamKind::Real: return p.lo + u * (p.hi - p.lo);
      case ParamKind::Integer: return std::min(p.hi, p.lo + std::floor(u * (p.hi - p.lo + 1.0)));
      case ParamKind::Categorical:
        return std::min(static_cast<double>(p.n_levels() - 1), std::floor(u * static_cast<double>(p.n_levels())));
    }
    return 0.0;
  }

  /// Clamps to bounds and rounds integer and categorical coordinates.
  HyperPoint snap(HyperPoint pt) const {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& p = params[i];
      double& v = pt.values[i];
      if (p.kind == ParamKind::Categorical) {
        v = std::clamp(std::round(v), 0.0, static_cast<double>(p.n_levels() - 1));
      } else {
        v = std::clamp(v, p.lo, p.hi);
        if (p.kind == ParamKind::Integer) v = std::round(v);
      }
    }
    return pt;
  }

  bool feasible(const HyperPoint& pt) const {
    if (pt.values.size() != params.size()) return false;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& p = params[i];
      const double v = pt.values[i];
      if (!std::isfinite(v)) return false;
      if (p.kind == ParamKind::Categorical) {
        if (v != std::floor(v) || v < 0 || v >= static_cast<double>(p.n_levels())) return false;
      } else {
        if (v < p.lo || v > p.hi) return false;
        if (p.kind == ParamKind::Integer && v != std::floor(v)) return false;
      }
    }
    return true;
  }

  HyperPoint sample_uniform(Rng& rng) const {
    HyperPoint pt;
    for (std::size_t i = 0; i < params.size(); ++i) pt.values.push_back(from_unit(i, uniform01(rng)));
    return pt;
  }

  /// Dimension of the surrogate input: numeric parameters plus one column per level.
  std::size_t embedding_dim() const {
    std::size_t d = 0;
    for (const auto& p : params) d += p.kind == ParamKind::Categorical ? p.n_levels() : 1;
    return d;
  }

  /// Numeric parameters scaled to [0, 1], categorical ones one-hot.
  Vector embed(const HyperPoint& pt) const {
    Vector e = Vector::Zero(static_cast<Eigen::Index>(embedding_dim()));
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& p = params[i];
      if (p.kind == ParamKind::Categorical) {
        e(k + static_cast<Eigen::Index>(pt.values[i])) = 1.0;
        k += static_cast<Eigen::Index>(p.n_levels());
      } else {
        e(k++) = p.hi > p.lo ? (pt.values[i] - p.lo) / (p.hi - p.lo) : 0.0;
      }
    }
    return e;
  }

  /// Materialized value: 2^x for exponent parameters, the raw value otherwise.
  double value(const HyperPoint& pt, const std::string& name) const {
    const std::size_t i = index(name);
    return params[i].pow2 ? std::ldexp(1.0, static_cast<int>(pt.values[i])) : pt.values[i];
  }

  const std::string& level(const HyperPoint& pt, const std::string& name) const {
    const std::size_t i = index(name);
    return params[i].levels.at(static_cast<std::size_t>(pt.values[i]));
  }

  /// "l1=64 epochs=256 ..." with transforms applied.
  std::string describe(const HyperPoint& pt) const {
    std::string out;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (i) out += ' ';
      out += params[i].name + '=';
      if (params[i].kind == ParamKind::Categorical) {
        out += params[i].levels.at(static_cast<std::size_t>(pt.values[i]));
      } else if (params[i].kind == ParamKind::Integer) {
        out += std::to_string(static_cast<long long>(value(pt, params[i].name)));
      } else {
        out += format_real(pt.values[i]);
      }
    }
    return out;
  }
};

/// Network and optimizer settings materialized from a point of the network space.
struct NetworkSettings {
  std::size_t l1 = 32;
  std::size_t epochs = 32;
  std::size_t batch_size = 32;
  double dropout_prob = 0.0;
  double lr_mult = 1.0;
  std::size_t patience = 8;
  Optimizer optimizer = Optimizer::Adamax;
  Activation activation = Activation::ReLU;
  double validation_fraction = 0.2;

  Architecture architecture(std::size_t input_dim) const {
    return Architecture::from_first_width(input_dim, l1, activation, dropout_prob);
  }

  TrainConfig train_config(std::uint64_t seed) const {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.optimizer = optimizer;
    c.lr_mult = lr_mult;
    c.patience = patience;
    c.seed = seed;
    c.validation_fraction = validation_fraction;
    return c;
  }
};

inline NetworkSettings materialize(const SearchSpace& space, const HyperPoint& pt) {
  if (!space.feasible(pt)) throw SpecificationError("infeasible hyperparameter point: " + space.describe(space.snap(pt)));
  NetworkSettings s;
  s.l1 = static_cast<std::size_t>(space.value(pt, "l1"));
  s.epochs = static_cast<std::size_t>(space.value(pt, "epochs"));
  s.batch_size = static_cast<std::size_t>(space.value(pt, "batch_size"));
  s.dropout_prob = space.value(pt, "dropout_prob");
  s.lr_mult = space.value(pt, "lr_mult");
  s.patience = static_cast<std::size_t>(space.value(pt, "patience"));
  s.optimizer = optimizer_from_string(space.level(pt, "optimizer"));
  s.activation = activation_from_string(space.level(pt, "act_fn"));
  return s;
}

// ---------------------------------------------------------------------------
// Design and surrogate.

/// Latin hypercube in the unit cube: each coordinate visits every one of the
/// `size` strata once, then is mapped onto its parameter's grid.
inline std::vector<HyperPoint> initial_design(const SearchSpace& space, std::size_t size, std::uint64_t seed) {
  space.validate();
  if (size < 2) throw SpecificationError("initial design needs at least 2 points");
  Rng rng(derive_seed(seed, "initial_design"));
  std::vector<HyperPoint> pts(size);
  for (auto& p : pts) p.values.resize(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto strata = permutation(size, rng);
    for (std::size_t j = 0; j < size; ++j) {
      const double u = (static_cast<double>(strata[j]) + uniform01(rng)) / static_cast<double>(size);
      pts[j].values[i] = space.from_unit(i, u);
    }
  }
  return pts;
}

struct Surrogate {
  GaussianProcess gp;
  double best_observed = 0.0;
};

inline Surrogate fit_surrogate(const SearchSpace& space, const std::vector<HyperPoint>& points,
                               const std::vector<double>& values, const GpOptions& opt = {}) {
  if (points.size() != values.size()) throw ShapeError("fit_surrogate: points and values differ in length");
  std::vector<std::size_t> finite;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isfinite(values[i])) finite.push_back(i);
  }
  if (finite.size() < 2) throw SpecificationError("fit_surrogate needs at least 2 finite observations");
  Matrix x(static_cast<Eigen::Index>(finite.size()), static_cast<Eigen::Index>(space.embedding_dim()));
  Vector y(static_cast<Eigen::Index>(finite.size()));
  for (std::size_t r = 0; r < finite.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) = space.embed(points[finite[r]]).transpose();
    y(static_cast<Eigen::Index>(r)) = values[finite[r]];
  }
  return {GaussianProcess::fit(x, y, opt), y.minCoeff()};
}

struct ProposalOptions {
  std::size_t n_candidates = 2000;
  std::size_t n_refine = 5;
  std::size_t refine_steps = 60;
  /// Expected improvement at or below this counts as none at all.
  double min_improvement = 1e-12;
};

struct Proposal {
  HyperPoint point;
  double expected_improvement = 0.0;
  bool random_fallback = false;
};

/// Maximizes expected improvement over random feasible candidates followed by
/// a perturbation hill-climb from the best few. Never returns an evaluated
/// point unless the space is exhausted.
inline Proposal propose_next(const Surrogate& s, const SearchSpace& space, const std::vector<HyperPoint>& evaluated,
                             std::uint64_t seed, const ProposalOptions& opt = {}) {
  Rng rng(derive_seed(seed, "propose"));
  auto seen = [&](const HyperPoint& p) { return std::find(evaluated.begin(), evaluated.end(), p) != evaluated.end(); };
  auto ei = [&](const HyperPoint& p) { return expected_improvement(s.gp.predict(space.embed(p)), s.best_observed); };

  auto perturb = [&](HyperPoint p, double scale) {
    for (std::size_t i = 0; i < space.size(); ++i) {
      const auto& spec = space.params[i];
      if (spec.kind == ParamKind::Categorical) {
        if (uniform01(rng) < 0.2) p.values[i] = static_cast<double>(uniform_index(rng, spec.n_levels()));
      } else {
        const double width = spec.hi - spec.lo + (spec.kind == ParamKind::Integer ? 1.0 : 0.0);
        p.values[i] += scale * width * (2.0 * uniform01(rng) - 1.0);
      }
    }
    return space.snap(p);
  };

  struct Scored {
    HyperPoint p;
    double ei;
  };
  std::vector<Scored> cands;
  for (std::size_t c = 0; c < opt.n_candidates; ++c) {
    HyperPoint p = space.sample_uniform(rng);
    if (!seen(p)) cands.push_back({p, ei(p)});
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Scored& a, const Scored& b) { return a.ei > b.ei; });

  Proposal best;
  best.expected_improvement = -1.0;
  const std::size_t n_refine = std::min(opt.n_refine, cands.size());
  for (std::size_t r = 0; r < n_refine; ++r) {
    Scored cur = cands[r];
    double scale = 0.1;
    for (std::size_t step = 0; step < opt.refine_steps; ++step) {
      HyperPoint q = perturb(cur.p, scale);
      if (seen(q)) continue;
      const double e = ei(q);
      if (e > cur.ei) {
        cur = {q, e};
      } else if (step % 10 == 9) {
        scale *= 0.5;
      }
    }
    if (cur.ei > best.expected_improvement) {
      best.point = cur.p;
      best.expected_improvement = cur.ei;
    }
  }
  if (!cands.empty() && best.expected_improvement > opt.min_improvement) return best;

  // No useful improvement anywhere (or every candidate already evaluated):
  // fall back to a feasible point that has not been evaluated yet.
  best.random_fallback = true;
  best.expected_improvement = 0.0;
  if (!cands.empty()) {
    best.point = cands[uniform_index(rng, cands.size())].p;
    return best;
  }
  HyperPoint p = evaluated.empty() ? space.sample_uniform(rng) : evaluated.back();
  for (int attempt = 0; attempt < 10000; ++attempt) {
    p = perturb(p, 0.5);
    if (!seen(p)) break;
  }
  best.point = p;
  return best;
}

// ---------------------------------------------------------------------------
// Cross-validation.

struct CvReport {
  std::vector<double> fold_mses;
  double mean_mse = 0.0;
  /// Sample standard deviation (n - 1) over the finite folds.
  double sd_mse = 0.0;
  /// Folds whose training diverged; their MSE is +inf and excluded from the summary.
  std::vector<std::size_t> failed_folds;

  bool partial() const { return !failed_folds.empty(); }

  static CvReport from_folds(std::vector<double> folds, std::vector<std::size_t> failed = {}) {
    CvReport r;
    r.fold_mses = std::move(folds);
    r.failed_folds = std::move(failed);
    std::vector<double> ok;
    for (double v : r.fold_mses) {
      if (std::isfinite(v)) ok.push_back(v);
    }
    if (ok.empty()) {
      r.mean_mse = std::numeric_limits<double>::infinity();
      r.sd_mse = std::numeric_limits<double>::quiet_NaN();
      return r;
    }
    double sum = 0.0;
    for (double v : ok) sum += v;
    r.mean_mse = sum / static_cast<double>(ok.size());
    double ss = 0.0;
    for (double v : ok) ss += (v - r.mean_mse) * (v - r.mean_mse);
    r.sd_mse = ok.size() > 1 ? std::sqrt(ss / static_cast<double>(ok.size() - 1)) : 0.0;
    return r;
  }
};

/// Scaled data plus the fixed split every evaluation shares.
struct ModelContext {
  const Dataset* data = nullptr;
  const Split* split = nullptr;
  std::size_t workers = 1;
};

namespace detail {

inline double fit_and_score(const Dataset& data, const RowIndices& fit_rows, const RowIndices& eval_rows,
                            const NetworkSettings& net, std::uint64_t seed) {
  Mlp model = build(net.architecture(data.n_features()), derive_seed(seed, "model"));
  model = train(std::move(model), data, fit_rows, net.train_config(derive_seed(seed, "train")));
  return evaluate_mse(model, data, eval_rows);
}

}  // namespace detail

/// For each fold: train on the remaining training folds (subset columns only)
/// and score MSE on the held-out fold.
inline CvReport cross_validate(const ModelContext& ctx, const FeatureSubset& subset, const NetworkSettings& net,
                               std::uint64_t seed) {
  subset.validate(ctx.data->n_features());
  const Dataset data = ctx.data->select_columns(subset.indices);
  const std::size_t k = ctx.split->folds.size();
  std::vector<double> mses(k, std::numeric_limits<double>::infinity());
  std::vector<char> failed(k, 0);
  parallel_for(k, ctx.workers, [&](std::size_t f) {
    try {
      mses[f] = detail::fit_and_score(data, ctx.split->train_without_fold(f), ctx.split->folds[f], net,
                                      derive_seed(seed, "cv.fold", {f}));
    } catch (const TrainingError&) {
      failed[f] = 1;
    }
    if (!std::isfinite(mses[f])) failed[f] = 1;
  });
  std::vector<std::size_t> failed_idx;
  for (std::size_t f = 0; f < k; ++f) {
    if (failed[f]) {
      mses[f] = std::numeric_limits<double>::infinity();
      failed_idx.push_back(f);
    }
  }
  return CvReport::from_folds(std::move(mses), std::move(failed_idx));
}

inline CvReport cross_validate(const ModelContext& ctx, const FeatureSubset& subset, const SearchSpace& space,
                               const HyperPoint& pt, std::uint64_t seed) {
  return cross_validate(ctx, subset, materialize(space, pt), seed);
}

/// Single split: train on every training fold but the first, score on the first.
inline CvReport holdout_score(const ModelContext& ctx, const FeatureSubset& subset, const NetworkSettings& net,
                              std::uint64_t seed) {
  subset.validate(ctx.data->n_features());
  const Dataset data = ctx.data->select_columns(subset.indices);
  try {
    const double mse = detail::fit_and_score(data, ctx.split->train_without_fold(0), ctx.split->folds[0], net,
                                             derive_seed(seed, "holdout"));
    if (std::isfinite(mse)) return CvReport::from_folds({mse});
  } catch (const TrainingError&) {
  }
  return CvReport::from_folds({std::numeric_limits<double>::infinity()}, {0});
}

// ---------------------------------------------------------------------------
// Sequential surrogate-based optimization.

struct TuneBudget {
  std::size_t initial = 10;
  std::size_t infill = 30;
};

struct Observation {
  HyperPoint point;
  double value = std::numeric_limits<double>::infinity();
  CvReport detail;
  bool from_initial_design = false;
  bool random_fallback = false;
  double expected_improvement = 0.0;
};

struct SurrogateSummary {
  std::vector<double> theta;
  double nugget = 0.0;
  double neg_log_likelihood = 0.0;
  double process_mean = 0.0;
  double process_variance = 0.0;
  bool fitted = false;
};

struct TuningRun {
  std::vector<HyperPoint> design;
  std::vector<Observation> observations;
  SurrogateSummary surrogate;
  std::size_t best_index = 0;
  /// Best value seen after each observation.
  std::vector<double> incumbent;

  const Observation& best() const { return observations.at(best_index); }
};

/// Evaluates one point; returns the objective and its per-fold breakdown.
/// A thrown exception records +inf and the loop continues.
using Objective = std::function<CvReport(const HyperPoint&, std::size_t evaluation_index)>;

struct TuneOptions {
  GpOptions gp;
  ProposalOptions proposal;
  std::size_t workers = 1;
};

/// Initial design, evaluate, then `infill` rounds of: fit surrogate, maximize
/// expected improvement, evaluate, add the point to the design.
inline TuningRun tune(const SearchSpace& space, const TuneBudget& budget, std::uint64_t seed,
                      const Objective& objective, const TuneOptions& opt = {}) {
  if (budget.initial < 2) throw SpecificationError("tuning budget needs at least 2 initial points");
  space.validate();
  TuningRun run;
  run.design = initial_design(space, budget.initial, seed);

  auto evaluate = [&](const HyperPoint& p, std::size_t idx) {
    try {
      return objective(p, idx);
    } catch (const Error&) {
      return CvReport::from_folds({std::numeric_limits<double>::infinity()}, {0});
    }
  };

  std::vector<CvReport> initial(run.design.size());
  parallel_for(run.design.size(), opt.workers, [&](std::size_t i) { initial[i] = evaluate(run.design[i], i); });
  double best = std::numeric_limits<double>::infinity();
  auto record = [&](Observation obs) {
    if (obs.value < best) {
      best = obs.value;
      run.best_index = run.observations.size();
    }
    run.observations.push_back(std::move(obs));
    run.incumbent.push_back(best);
  };
  for (std::size_t i = 0; i < run.design.size(); ++i) {
    Observation o;
    o.point = run.design[i];
    o.detail = initial[i];
    o.value = initial[i].mean_mse;
    o.from_initial_design = true;
    record(std::move(o));
  }

  for (std::size_t it = 0; it < budget.infill; ++it) {
    std::vector<HyperPoint> pts;
    std::vector<double> vals;
    for (const auto& o : run.observations) {
      pts.push_back(o.point);
      vals.push_back(o.value);
    }
    Proposal prop;
    const std::uint64_t iter_seed = derive_seed(seed, "tune.infill", {it});
    const auto n_finite = std::count_if(vals.begin(), vals.end(), [](double v) { return std::isfinite(v); });
    std::optional<Surrogate> sur;
    if (n_finite >= 2) {
      GpOptions g = opt.gp;
      g.seed = derive_seed(iter_seed, "gp");
      try {
        sur = fit_surrogate(space, pts, vals, g);
      } catch (const SurrogateError&) {
        sur.reset();
      }
    }
    if (sur) {
      prop = propose_next(*sur, space, pts, iter_seed, opt.proposal);
      const auto& gp = sur->gp;
      const Vector theta = gp.theta();
      run.surrogate.theta.assign(theta.data(), theta.data() + theta.size());
      run.surrogate.nugget = gp.nugget();
      run.surrogate.neg_log_likelihood = gp.neg_log_likelihood();
      run.surrogate.process_mean = gp.process_mean();
      run.surrogate.process_variance = gp.process_variance();
      run.surrogate.fitted = true;
    } else {
      Rng rng(derive_seed(iter_seed, "random"));
      prop.point = space.sample_uniform(rng);
      prop.random_fallback = true;
    }
    Observation o;
    o.point = prop.point;
    o.detail = evaluate(prop.point, run.design.size());
    o.value = o.detail.mean_mse;
    o.random_fallback = prop.random_fallback;
    o.expected_improvement = prop.expected_improvement;
    run.design.push_back(prop.point);
    record(std::move(o));
  }
  return run;
}

enum class TuningObjective { CrossValidation, Holdout };

inline const char* to_string(TuningObjective o) { return o == TuningObjective::CrossValidation ? "cv" : "holdout"; }

/// Tunes the network on the subset's columns; the objective is the mean CV
/// MSE or, for the holdout variant, a single train/validation split.
inline TuningRun tune(const ModelContext& ctx, const FeatureSubset& subset, const SearchSpace& space,
                      const TuneBudget& budget, std::uint64_t seed, TuningObjective mode = TuningObjective::CrossValidation,
                      TuneOptions opt = {}) {
  subset.validate(ctx.data->n_features());
  ModelContext inner = ctx;
  // Concurrency goes to the initial design; folds inside one evaluation run inline.
  inner.workers = 1;
  opt.workers = ctx.workers;
  Objective objective = [&](const HyperPoint& p, std::size_t idx) {
    const auto net = materialize(space, p);
    const std::uint64_t s = derive_seed(seed, "tune.eval", {idx});
    return mode == TuningObjective::CrossValidation ? cross_validate(inner, subset, net, s)
                                                    : holdout_score(inner, subset, net, s);
  };
  return tune(space, budget, seed, objective, opt);
}

}  // namespace igsel
