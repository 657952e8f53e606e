#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "igsel/data.hpp"
#include "igsel/error.hpp"
#include "igsel/random.hpp"

namespace igsel {

enum class Activation { ReLU, LeakyReLU };
enum class Optimizer { Adadelta, Adamax, Adagrad };

inline constexpr double kLeakySlope = 0.01;

inline const char* to_string(Activation a) { return a == Activation::ReLU ? "ReLU" : "LeakyReLU"; }

inline const char* to_string(Optimizer o) {
  switch (o) {
    case Optimizer::Adadelta: return "Adadelta";
    case Optimizer::Adamax: return "Adamax";
    case Optimizer::Adagrad: return "Adagrad";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "ReLU") return Activation::ReLU;
  if (s == "LeakyReLU") return Activation::LeakyReLU;
  throw SpecificationError("unknown activation '" + s + "'");
}

inline Optimizer optimizer_from_string(const std::string& s) {
  if (s == "Adadelta") return Optimizer::Adadelta;
  if (s == "Adamax") return Optimizer::Adamax;
  if (s == "Adagrad") return Optimizer::Adagrad;
  throw SpecificationError("unknown optimizer '" + s + "'");
}

/// Learning rate before the tuned multiplier is applied.
inline double base_learning_rate(Optimizer o) {
  switch (o) {
    case Optimizer::Adadelta: return 1.0;
    case Optimizer::Adamax: return 0.002;
    case Optimizer::Adagrad: return 0.01;
  }
  return 0.0;
}

struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_widths;
  Activation activation = Activation::ReLU;
  double dropout_prob = 0.0;

  /// The tuned network: four hidden layers of widths l1, l1/2, l1/2, l1/4.
  static Architecture from_first_width(std::size_t input_dim, std::size_t l1, Activation act,
                                       double dropout) {
    if (l1 < 4 || l1 % 4 != 0) throw SpecificationError("first hidden width must be a positive multiple of 4");
    Architecture a{input_dim, {l1, l1 / 2, l1 / 2, l1 / 4}, act, dropout};
    a.validate();
    return a;
  }

  void validate() const {
    if (input_dim == 0) throw SpecificationError("input_dim must be positive");
    if (std::any_of(hidden_widths.begin(), hidden_widths.end(), [](std::size_t w) { return w == 0; })) {
      throw SpecificationError("hidden widths must be positive");
    }
    if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) throw SpecificationError("dropout_prob must lie in [0, 1)");
  }

  bool operator==(const Architecture&) const = default;
};

struct TrainConfig {
  std::size_t epochs = 64;
  std::size_t batch_size = 32;
  Optimizer optimizer = Optimizer::Adamax;
  double lr_mult = 1.0;
  std::size_t patience = 8;
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;

  double learning_rate() const { return base_learning_rate(optimizer) * lr_mult; }

  void validate() const {
    if (epochs < 1 || batch_size < 1 || patience < 1) {
      throw SpecificationError("epochs, batch_size and patience must be at least 1");
    }
    if (!(lr_mult > 0.0)) throw SpecificationError("lr_mult must be positive");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
      throw SpecificationError("validation_fraction must lie in [0, 1)");
    }
  }
};

/// Dense layer, weight is (out x in).
struct Layer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

struct EpochLog {
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;  // 1-based, 0 if never trained
  bool stopped_early = false;
};

/// Counts epochs without strict improvement and signals when the budget of
/// `patience` such epochs is used up.
class EarlyStopping {
public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true when training should stop after this epoch.
  bool update(double loss) {
    ++epoch_;
    if (loss < best_) {
      best_ = loss;
      best_epoch_ = epoch_;
      stale_ = 0;
      return false;
    }
    return ++stale_ >= patience_;
  }

  bool improved_last() const { return stale_ == 0 && best_epoch_ == epoch_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

namespace detail {

inline void activate(Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::ReLU) {
    z = z.cwiseMax(0.0);
  } else {
    z = z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
  }
}

/// Multiplies `delta` in place by the activation derivative at pre-activation `z`.
inline void activation_backward(Eigen::MatrixXd& delta, const Eigen::MatrixXd& z, Activation a) {
  const double neg = a == Activation::ReLU ? 0.0 : kLeakySlope;
  delta = delta.binaryExpr(z, [neg](double d, double v) { return v > 0.0 ? d : neg * d; });
}

}  // namespace detail

/// Multi-layer perceptron with scalar output. Inference never applies dropout.
class Mlp {
public:
  Mlp() = default;

  Mlp(Architecture arch, std::vector<Layer> layers, std::uint64_t seed = 0)
      : arch_(std::move(arch)), layers_(std::move(layers)), seed_(seed) {
    arch_.validate();
    check_shapes();
  }

  const Architecture& architecture() const noexcept { return arch_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& mutable_layers() noexcept { return layers_; }
  const TrainingLog& training_log() const noexcept { return log_; }
  TrainingLog& mutable_training_log() noexcept { return log_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t input_dim() const noexcept { return arch_.input_dim; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  double forward(std::span<const double> x) const {
    check_input(x.size());
    Eigen::MatrixXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    return forward_columns(a)(0, 0);
  }

  /// One prediction per row of `x`.
  Vector forward_batch(const Matrix& x) const {
    check_input(static_cast<std::size_t>(x.cols()));
    Vector out(x.rows());
    constexpr Eigen::Index kChunk = 512;
    for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
      const Eigen::Index len = std::min(kChunk, x.rows() - start);
      Eigen::MatrixXd a = x.middleRows(start, len).transpose();
      out.segment(start, len) = forward_columns(a).row(0).transpose();
    }
    return out;
  }

  /// dF/dx at a single input, by reverse-mode differentiation.
  Vector input_gradient(std::span<const double> x) const {
    Matrix m = Eigen::Map<const Matrix>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
    return input_gradients(m).row(0).transpose();
  }

  /// Row r of the result is dF/dx evaluated at row r of `x`.
  Matrix input_gradients(const Matrix& x) const {
    check_input(static_cast<std::size_t>(x.cols()));
    const std::size_t n_layers = layers_.size();
    std::vector<Eigen::MatrixXd> pre(n_layers);
    Eigen::MatrixXd a = x.transpose();
    for (std::size_t l = 0; l < n_layers; ++l) {
      Eigen::MatrixXd z = (layers_[l].weight * a).colwise() + layers_[l].bias;
      if (l + 1 < n_layers) {
        pre[l] = z;
        detail::activate(z, arch_.activation);
      }
      a = std::move(z);
    }
    Eigen::MatrixXd delta = Eigen::MatrixXd::Ones(1, x.rows());
    for (std::size_t l = n_layers; l-- > 0;) {
      delta = layers_[l].weight.transpose() * delta;
      if (l > 0) detail::activation_backward(delta, pre[l - 1], arch_.activation);
    }
    return delta.transpose();
  }

private:
  Eigen::MatrixXd forward_columns(Eigen::MatrixXd a) const {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Eigen::MatrixXd z = (layers_[l].weight * a).colwise() + layers_[l].bias;
      if (l + 1 < layers_.size()) detail::activate(z, arch_.activation);
      a = std::move(z);
    }
    return a;
  }

  void check_input(std::size_t n) const {
    if (n != arch_.input_dim) {
      throw ShapeError("model expects " + std::to_string(arch_.input_dim) + " inputs, got " + std::to_string(n));
    }
  }

  void check_shapes() const {
    if (layers_.size() != arch_.hidden_widths.size() + 1) throw ShapeError("layer count does not match architecture");
    std::size_t in = arch_.input_dim;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const std::size_t out = l < arch_.hidden_widths.size() ? arch_.hidden_widths[l] : 1;
      if (static_cast<std::size_t>(layers_[l].weight.rows()) != out ||
          static_cast<std::size_t>(layers_[l].weight.cols()) != in ||
          static_cast<std::size_t>(layers_[l].bias.size()) != out) {
        throw ShapeError("weight shapes inconsistent with architecture at layer " + std::to_string(l));
      }
      in = out;
    }
  }

  Architecture arch_;
  std::vector<Layer> layers_;
  TrainingLog log_;
  std::uint64_t seed_ = 0;
};

/// Fresh model; weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
inline Mlp build(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(derive_seed(seed, "mlp.init"));
  std::vector<Layer> layers;
  std::size_t in = arch.input_dim;
  for (std::size_t l = 0; l <= arch.hidden_widths.size(); ++l) {
    const std::size_t out = l < arch.hidden_widths.size() ? arch.hidden_widths[l] : 1;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Layer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = uniform(rng, -bound, bound);
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = uniform(rng, -bound, bound);
    layers.push_back(std::move(layer));
    in = out;
  }
  return Mlp(arch, std::move(layers), seed);
}

// ---------------------------------------------------------------------------
// Optimizers.

/// Per-parameter optimizer state for one tensor (weight or bias).
struct ParamState {
  Eigen::ArrayXXd s1;
  Eigen::ArrayXXd s2;
};

class OptimizerStep {
public:
  OptimizerStep(Optimizer kind, double lr, const std::vector<Layer>& layers) : kind_(kind), lr_(lr) {
    for (const auto& l : layers) {
      states_.push_back(zero_state(l.weight.rows(), l.weight.cols()));
      states_.push_back(zero_state(l.bias.size(), 1));
    }
  }

  void apply(std::vector<Layer>& layers, const std::vector<Layer>& grads) {
    ++t_;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      update(layers[l].weight.array(), grads[l].weight.array(), states_[2 * l]);
      Eigen::Map<Eigen::ArrayXXd> b(layers[l].bias.data(), layers[l].bias.size(), 1);
      Eigen::Map<const Eigen::ArrayXXd> gb(grads[l].bias.data(), grads[l].bias.size(), 1);
      update(b, gb, states_[2 * l + 1]);
    }
  }

  static constexpr double kAdadeltaRho = 0.9;
  static constexpr double kAdadeltaEps = 1e-6;
  static constexpr double kAdamaxBeta1 = 0.9;
  static constexpr double kAdamaxBeta2 = 0.999;
  static constexpr double kAdamaxEps = 1e-8;
  static constexpr double kAdagradEps = 1e-10;

private:
  static ParamState zero_state(Eigen::Index r, Eigen::Index c) {
    return {Eigen::ArrayXXd::Zero(r, c), Eigen::ArrayXXd::Zero(r, c)};
  }

  template <typename P, typename G>
  void update(P&& p, const G& g, ParamState& st) {
    switch (kind_) {
      case Optimizer::Adagrad:
        st.s1 += g.square();
        p -= lr_ * g / (st.s1.sqrt() + kAdagradEps);
        break;
      case Optimizer::Adadelta: {
        st.s1 = kAdadeltaRho * st.s1 + (1.0 - kAdadeltaRho) * g.square();
        const Eigen::ArrayXXd delta = (st.s2 + kAdadeltaEps).sqrt() / (st.s1 + kAdadeltaEps).sqrt() * g;
        st.s2 = kAdadeltaRho * st.s2 + (1.0 - kAdadeltaRho) * delta.square();
        p -= lr_ * delta;
        break;
      }
      case Optimizer::Adamax: {
        st.s1 = kAdamaxBeta1 * st.s1 + (1.0 - kAdamaxBeta1) * g;
        st.s2 = (kAdamaxBeta2 * st.s2).max(g.abs() + kAdamaxEps);
        const double step = lr_ / (1.0 - std::pow(kAdamaxBeta1, static_cast<double>(t_)));
        p -= step * st.s1 / st.s2;
        break;
      }
    }
  }

  Optimizer kind_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<ParamState> states_;
};

// ---------------------------------------------------------------------------
// Training.

namespace detail {

/// Forward with dropout masks, backward to parameter gradients, for one
/// mini-batch whose samples are the columns of `input`. Returns the batch MSE.
class BackpropWorkspace {
public:
  double run(const Mlp& model, const Eigen::MatrixXd& input, const Eigen::RowVectorXd& target,
             Rng* dropout_rng, std::vector<Layer>& grads) {
    const auto& layers = model.layers();
    const auto& arch = model.architecture();
    const std::size_t n_layers = layers.size();
    const std::size_t n_hidden = n_layers - 1;
    pre_.resize(n_hidden);
    act_.resize(n_hidden);
    mask_.resize(n_hidden);
    const bool drop = dropout_rng != nullptr && arch.dropout_prob > 0.0;
    const double keep_scale = 1.0 / (1.0 - arch.dropout_prob);

    const Eigen::MatrixXd* a = &input;
    for (std::size_t l = 0; l < n_hidden; ++l) {
      pre_[l].noalias() = layers[l].weight * (*a);
      pre_[l].colwise() += layers[l].bias;
      act_[l] = pre_[l];
      activate(act_[l], arch.activation);
      if (drop) {
        mask_[l].resize(act_[l].rows(), act_[l].cols());
        for (Eigen::Index i = 0; i < mask_[l].size(); ++i) {
          mask_[l].data()[i] = uniform01(*dropout_rng) < arch.dropout_prob ? 0.0 : keep_scale;
        }
        act_[l].array() *= mask_[l].array();
      }
      a = &act_[l];
    }
    out_.noalias() = layers[n_hidden].weight * (*a);
    out_.colwise() += layers[n_hidden].bias;

    const double batch = static_cast<double>(input.cols());
    const Eigen::RowVectorXd resid = out_.row(0) - target;
    const double loss = resid.squaredNorm() / batch;

    delta_ = (2.0 / batch) * resid;
    for (std::size_t l = n_layers; l-- > 0;) {
      const Eigen::MatrixXd& a_in = l == 0 ? input : act_[l - 1];
      grads[l].weight.noalias() = delta_ * a_in.transpose();
      grads[l].bias = delta_.rowwise().sum();
      if (l == 0) break;
      back_.noalias() = layers[l].weight.transpose() * delta_;
      if (drop) back_.array() *= mask_[l - 1].array();
      activation_backward(back_, pre_[l - 1], arch.activation);
      std::swap(delta_, back_);
    }
    return loss;
  }

private:
  std::vector<Eigen::MatrixXd> pre_, act_, mask_;
  Eigen::MatrixXd out_, delta_, back_;
};

inline double mse_on_rows(const Mlp& model, const Dataset& data, std::span<const std::size_t> rows) {
  constexpr std::size_t kChunk = 512;
  double sum = 0.0;
  Matrix x;
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, rows.size() - start);
    x.resize(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(data.n_features()));
    for (std::size_t i = 0; i < len; ++i) {
      x.row(static_cast<Eigen::Index>(i)) = data.features().row(static_cast<Eigen::Index>(rows[start + i]));
    }
    const Vector pred = model.forward_batch(x);
    for (std::size_t i = 0; i < len; ++i) {
      const double r = data.target()(static_cast<Eigen::Index>(rows[start + i])) - pred(static_cast<Eigen::Index>(i));
      sum += r * r;
    }
  }
  return sum / static_cast<double>(rows.size());
}

}  // namespace detail

/// Mean of squared residuals over the given rows.
inline double evaluate_mse(const Mlp& model, const Dataset& data, std::span<const std::size_t> rows) {
  if (rows.empty()) throw SpecificationError("evaluate_mse needs at least one row");
  return detail::mse_on_rows(model, data, rows);
}

/// Mini-batch MSE training with early stopping on a held-out share of `rows`.
/// The weights of the best validation epoch are kept. With
/// validation_fraction == 0 the epoch training loss drives early stopping.
inline Mlp train(Mlp model, const Dataset& data, std::span<const std::size_t> rows, const TrainConfig& cfg) {
  cfg.validate();
  if (rows.empty()) throw SpecificationError("train needs at least one row");
  if (data.n_features() != model.input_dim()) {
    throw ShapeError("model expects " + std::to_string(model.input_dim()) + " features, data has " +
                     std::to_string(data.n_features()));
  }

  Rng split_rng(derive_seed(cfg.seed, "train.validation"));
  Rng order_rng(derive_seed(cfg.seed, "train.order"));
  Rng dropout_rng(derive_seed(cfg.seed, "train.dropout"));

  RowIndices fit_rows(rows.begin(), rows.end());
  RowIndices val_rows;
  if (cfg.validation_fraction > 0.0 && fit_rows.size() >= 2) {
    shuffle(fit_rows, split_rng);
    auto n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(fit_rows.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, fit_rows.size() - 1);
    val_rows.assign(fit_rows.begin(), fit_rows.begin() + static_cast<std::ptrdiff_t>(n_val));
    fit_rows.erase(fit_rows.begin(), fit_rows.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::sort(val_rows.begin(), val_rows.end());
  }
  std::sort(fit_rows.begin(), fit_rows.end());

  std::vector<Layer> grads = model.layers();
  OptimizerStep opt(cfg.optimizer, cfg.learning_rate(), model.layers());
  detail::BackpropWorkspace ws;
  EarlyStopping stopper(cfg.patience);
  std::vector<Layer> best_layers = model.layers();

  const auto n_in = static_cast<Eigen::Index>(data.n_features());
  Eigen::MatrixXd batch_x;
  Eigen::RowVectorXd batch_y;
  TrainingLog log;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(fit_rows, order_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < fit_rows.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, fit_rows.size() - start);
      batch_x.resize(n_in, static_cast<Eigen::Index>(len));
      batch_y.resize(static_cast<Eigen::Index>(len));
      for (std::size_t i = 0; i < len; ++i) {
        const auto r = static_cast<Eigen::Index>(fit_rows[start + i]);
        batch_x.col(static_cast<Eigen::Index>(i)) = data.features().row(r).transpose();
        batch_y(static_cast<Eigen::Index>(i)) = data.target()(r);
      }
      const double loss = ws.run(model, batch_x, batch_y, &dropout_rng, grads);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite training loss in epoch " + std::to_string(epoch) + " (lr " +
                                std::to_string(cfg.learning_rate()) + ", " + to_string(cfg.optimizer) + ")",
                            epoch, loss);
      }
      loss_sum += loss * static_cast<double>(len);
      opt.apply(model.mutable_layers(), grads);
    }
    EpochLog entry;
    entry.train_loss = loss_sum / static_cast<double>(fit_rows.size());
    entry.validation_loss = val_rows.empty() ? entry.train_loss : detail::mse_on_rows(model, data, val_rows);
    log.epochs.push_back(entry);
    if (!std::isfinite(entry.validation_loss)) {
      throw TrainingError("non-finite validation loss in epoch " + std::to_string(epoch), epoch, entry.validation_loss);
    }
    const bool stop = stopper.update(entry.validation_loss);
    if (stopper.best_epoch() == epoch) best_layers = model.layers();
    if (stop) {
      log.stopped_early = true;
      break;
    }
  }
  log.best_epoch = stopper.best_epoch();
  model.mutable_layers() = std::move(best_layers);
  model.mutable_training_log() = std::move(log);
  return model;
}

// ---------------------------------------------------------------------------
// Checkpoints: a line-oriented text format with hexadecimal floats so a load
// reproduces every weight bit for bit.

inline std::string serialize(const Mlp& model) {
  const auto& arch = model.architecture();
  std::ostringstream out;
  out << "igsel-mlp 1\n";
  out << "input_dim " << arch.input_dim << "\n";
  out << "hidden " << arch.hidden_widths.size();
  for (auto w : arch.hidden_widths) out << ' ' << w;
  out << "\n";
  out << "activation " << to_string(arch.activation) << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", arch.dropout_prob);
  out << "dropout " << buf << "\n";
  out << "seed " << model.seed() << "\n";
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto& layer = model.layers()[l];
    out << "layer " << l << ' ' << layer.weight.rows() << ' ' << layer.weight.cols() << "\n";
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%a", layer.weight(r, c));
        out << (c ? " " : "") << buf;
      }
      out << "\n";
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      std::snprintf(buf, sizeof buf, "%a", layer.bias(r));
      out << (r ? " " : "") << buf;
    }
    out << "\n";
  }
  return out.str();
}

inline Mlp deserialize_mlp(const std::string& text) {
  std::istringstream in(text);
  auto expect = [&](const std::string& key) {
    std::string got;
    if (!(in >> got) || got != key) throw IoError("checkpoint: expected '" + key + "', got '" + got + "'");
  };
  auto read_hex = [&]() {
    std::string tok;
    if (!(in >> tok)) throw IoError("checkpoint truncated");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw IoError("checkpoint: bad number '" + tok + "'");
    return v;
  };
  expect("igsel-mlp");
  int version = 0;
  in >> version;
  if (version != 1) throw IoError("checkpoint: unsupported version");
  Architecture arch;
  expect("input_dim");
  in >> arch.input_dim;
  expect("hidden");
  std::size_t n_hidden = 0;
  in >> n_hidden;
  arch.hidden_widths.resize(n_hidden);
  for (auto& w : arch.hidden_widths) in >> w;
  expect("activation");
  std::string act;
  in >> act;
  arch.activation = activation_from_string(act);
  expect("dropout");
  arch.dropout_prob = read_hex();
  expect("seed");
  std::uint64_t seed = 0;
  in >> seed;
  std::vector<Layer> layers;
  for (std::size_t l = 0; l <= n_hidden; ++l) {
    expect("layer");
    std::size_t idx = 0;
    Eigen::Index rows = 0, cols = 0;
    in >> idx >> rows >> cols;
    if (!in || idx != l) throw IoError("checkpoint: bad layer header");
    Layer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = read_hex();
    }
    for (Eigen::Index r = 0; r < rows; ++r) layer.bias(r) = read_hex();
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(arch), std::move(layers), seed);
}

inline void save_checkpoint(const Mlp& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out << serialize(model);
}

inline Mlp load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_mlp(ss.str());
}

}  // namespace igsel
