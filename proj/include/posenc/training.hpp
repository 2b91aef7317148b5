#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "posenc/checkpoint.hpp"
#include "posenc/config.hpp"
#include "posenc/data/dataset.hpp"
#include "posenc/model.hpp"
#include "posenc/ops.hpp"
#include "posenc/params.hpp"
#include "posenc/tape.hpp"

namespace posenc {

enum class Optimizer { adam, sgd };

inline std::string to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

/// Unset optimizer and lr resolve per branch: SGD at 0.1 for pose-only
/// runs, Adam at 1e-3 otherwise.
struct TrainConfig {
  std::optional<Optimizer> optimizer;
  std::optional<double> lr;
  double lr_decay = 1e-6;
  double l2_lambda = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 4;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  /// Share of each class held out for evaluation.
  double test_fraction = 0.2;

  Optimizer resolved_optimizer(Branch b) const {
    return optimizer.value_or(b == Branch::pose ? Optimizer::sgd : Optimizer::adam);
  }
  double resolved_lr(Branch b) const {
    return lr.value_or(resolved_optimizer(b) == Optimizer::sgd ? 0.1 : 1e-3);
  }

  void validate() const {
    if (lr && !(*lr >= 0.0)) throw ContractError("train config: lr must be >= 0");
    if (batch_size == 0) throw ContractError("train config: batch_size must be >= 1");
    if (!(lr_decay >= 0.0) || !(l2_lambda >= 0.0)) throw ContractError("train config: lr_decay and l2_lambda must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_epsilon > 0.0)) {
      throw ContractError("train config: invalid Adam hyper-parameters");
    }
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ContractError("train config: test_fraction must be in [0, 1)");
  }
};

inline FieldSet fields_of(TrainConfig& c) {
  FieldSet f;
  f.bind(
      "optimizer",
      [&c](const std::string& v) {
        if (v == "adam") c.optimizer = Optimizer::adam;
        else if (v == "sgd") c.optimizer = Optimizer::sgd;
        else if (v == "auto") c.optimizer.reset();
        else throw ConfigError("config key 'optimizer': expected adam|sgd|auto, got '" + v + "'");
      },
      [&c] { return c.optimizer ? to_string(*c.optimizer) : std::string("auto"); });
  f.bind(
      "lr",
      [&c](const std::string& v) {
        if (v == "auto") c.lr.reset();
        else c.lr = FieldSet::parse_double("lr", v);
      },
      [&c] { return c.lr ? format_double(*c.lr) : std::string("auto"); });
  f.bind("lr_decay", c.lr_decay);
  f.bind("l2_lambda", c.l2_lambda);
  f.bind("beta1", c.beta1);
  f.bind("beta2", c.beta2);
  f.bind("adam_epsilon", c.adam_epsilon);
  f.bind("batch_size", c.batch_size);
  f.bind("epochs", c.epochs);
  f.bind("seed", c.seed);
  f.bind("test_fraction", c.test_fraction);
  return f;
}

/// Everything a training run reads from a config file.
struct RunConfig {
  TrainConfig train;
  ModelDims model;
};

inline RunConfig run_config_from(const std::vector<ConfigEntry>& entries) {
  require_sections(entries, {"train", "model", "synthetic"});
  RunConfig rc;
  apply_section(fields_of(rc.train), "train", entries);
  apply_section(fields_of(rc.model), "model", entries);
  rc.train.validate();
  rc.model.validate();
  return rc;
}

// ---------------------------------------------------------------- loss

/// -log(probs[label]) with probabilities clamped at 1e-12.
inline Tensor cross_entropy(Tape& tape, const Tensor& probs, std::size_t label) {
  return ops::negative_log_likelihood(tape, probs, label, 1e-12);
}

// ----------------------------------------------------------- optimizers

/// Inverse-time decay: lr / (1 + decay * step), step counted from 0.
inline double decayed_lr(double lr, double decay, std::size_t step) {
  return lr / (1.0 + decay * static_cast<double>(step));
}

/// p <- p - lr * (g + l2 * p) for every parameter.
inline void sgd_step(ParamTree& params, double lr, double l2_lambda) {
  for (auto& [name, p] : params.entries()) {
    if (!p.has_grad()) throw ContractError("sgd_step: parameter '" + name + "' has no gradient");
  }
  for (const auto& [name, p] : params.entries()) {
    Tensor t = p;
    auto v = t.mutable_values();
    auto g = t.grad();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * (g[i] + l2_lambda * v[i]);
  }
}

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

/// First and second moments per parameter name plus the step count.
struct AdamState {
  std::map<std::string, AdamMoments> moments;
  std::size_t step = 0;

  static AdamState zeros_like(const ParamTree& params) {
    AdamState s;
    for (const auto& [name, p] : params.entries()) s.moments[name] = {std::vector<double>(p.size(), 0.0), std::vector<double>(p.size(), 0.0)};
    return s;
  }
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double l2_lambda = 0.0;
};

/// Bias-corrected Adam with L2 folded into the gradient:
///   g' = g + l2 p;  m = b1 m + (1-b1) g';  v = b2 v + (1-b2) g'^2
///   p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
inline void adam_step(ParamTree& params, AdamState& state, const AdamHyper& h) {
  for (const auto& [name, p] : params.entries()) {
    if (!p.has_grad()) throw ContractError("adam_step: parameter '" + name + "' has no gradient");
    auto it = state.moments.find(name);
    if (it == state.moments.end() || it->second.m.size() != p.size() || it->second.v.size() != p.size()) {
      throw ContractError("adam_step: optimizer state does not match parameter '" + name + "'");
    }
  }
  if (state.moments.size() != params.tensor_count()) throw ContractError("adam_step: optimizer state has extra entries");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (const auto& [name, p] : params.entries()) {
    Tensor pt = p;
    AdamMoments& mo = state.moments.at(name);
    auto v = pt.mutable_values();
    auto g = pt.grad();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double gi = g[i] + h.l2_lambda * v[i];
      mo.m[i] = h.beta1 * mo.m[i] + (1.0 - h.beta1) * gi;
      mo.v[i] = h.beta2 * mo.v[i] + (1.0 - h.beta2) * gi * gi;
      v[i] -= h.lr * (mo.m[i] / c1) / (std::sqrt(mo.v[i] / c2) + h.epsilon);
    }
  }
}

// ------------------------------------------------------------ evaluation

struct EvalResult {
  double accuracy = 0.0;  // percent
  double mean_loss = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline EvalResult evaluate(const Model& m, const std::vector<data::PreparedExample>& examples) {
  EvalResult r;
  const std::size_t c = m.dims.num_classes;
  r.confusion.assign(c, std::vector<std::size_t>(c, 0));
  double loss = 0.0;
  for (const auto& e : examples) {
    Tape tape(Tape::Mode::inference);
    Tensor probs = predict(tape, m, e.input);
    loss += cross_entropy(tape, probs, e.label).item();
    const std::size_t guess = argmax(probs.values());
    ++r.confusion[e.label][guess];
    if (guess == e.label) ++r.correct;
    ++r.total;
  }
  if (r.total) {
    r.accuracy = 100.0 * static_cast<double>(r.correct) / static_cast<double>(r.total);
    r.mean_loss = loss / static_cast<double>(r.total);
  }
  return r;
}

/// Evaluates a model on a raw dataset; incompatible data is a contract error.
inline EvalResult evaluate(const Model& m, const data::Dataset& d) {
  std::vector<data::PreparedExample> prepared;
  try {
    prepared = data::prepare(d, m.dims, m.ablation.branch);
  } catch (const DimensionError& err) {
    throw ContractError(std::string("dataset does not match the checkpoint: ") + err.what());
  }
  return evaluate(m, prepared);
}

// -------------------------------------------------------------- training

struct EpochRecord {
  std::size_t epoch = 0;
  std::string split;  // "train" or "test"
  double loss = 0.0;
  double accuracy = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

/// Stable one-line text form: "epoch=3 split=train loss=0.412345 accuracy=87.50".
inline std::string format_record(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "epoch=%zu split=%s loss=%.6f accuracy=%.2f", r.epoch, r.split.c_str(), r.loss, r.accuracy);
  return buf;
}

struct TrainResult {
  std::vector<EpochRecord> log;
  /// Parameters after the last epoch are left in the model passed to
  /// train(); `best` holds the snapshot with the highest held-out accuracy.
  ParamTree best;
  std::size_t best_epoch = 0;
  double best_accuracy = 0.0;
  EvalResult final_eval;
  double seconds = 0.0;
};

struct TrainHooks {
  /// Receives every log line as it is produced.
  std::function<void(const std::string&)> on_line;
};

/// Mini-batch training. Each epoch shuffles the training order with an
/// RNG seeded from config.seed, accumulates per-sample gradients of the
/// batch-mean loss, and takes one optimizer step per batch. After each
/// epoch the held-out set (when non-empty) is evaluated.
inline TrainResult train(Model& model, const std::vector<data::PreparedExample>& train_set,
                         const std::vector<data::PreparedExample>& held_out, const TrainConfig& cfg,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  if (train_set.empty()) throw ContractError("train: empty training set");
  const auto started = std::chrono::steady_clock::now();
  const Branch branch = model.ablation.branch;
  const Optimizer opt = cfg.resolved_optimizer(branch);
  const double base_lr = cfg.resolved_lr(branch);
  AdamState adam = AdamState::zeros_like(model.params);
  std::size_t step = 0;
  Rng order_rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  result.best = model.params.clone();
  bool have_best = false;
  auto emit = [&](const EpochRecord& r) {
    result.log.push_back(r);
    if (hooks.on_line) hooks.on_line(format_record(r));
  };

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - begin);
      model.params.zero_grad();
      for (std::size_t k = begin; k < end; ++k) {
        const auto& ex = train_set[order[k]];
        Tape tape;
        Tensor probs = predict(tape, model, ex.input);
        Tensor loss = ops::scale(tape, cross_entropy(tape, probs, ex.label), inv);
        loss_sum += loss.item() / inv;
        if (argmax(probs.values()) == ex.label) ++correct;
        tape.backward(loss);
      }
      const double lr = decayed_lr(base_lr, cfg.lr_decay, step++);
      if (opt == Optimizer::sgd) {
        sgd_step(model.params, lr, cfg.l2_lambda);
      } else {
        adam_step(model.params, adam, {lr, cfg.beta1, cfg.beta2, cfg.adam_epsilon, cfg.l2_lambda});
      }
    }
    model.params.zero_grad();
    const double n = static_cast<double>(train_set.size());
    emit({epoch, "train", loss_sum / n, 100.0 * static_cast<double>(correct) / n});

    const bool has_test = !held_out.empty();
    const EvalResult ev = evaluate(model, has_test ? held_out : train_set);
    if (has_test) emit({epoch, "test", ev.mean_loss, ev.accuracy});
    if (!have_best || ev.accuracy > result.best_accuracy) {
      have_best = true;
      result.best = model.params.clone();
      result.best_epoch = epoch;
      result.best_accuracy = ev.accuracy;
    }
    result.final_eval = ev;
  }
  if (cfg.epochs == 0) result.final_eval = evaluate(model, held_out.empty() ? train_set : held_out);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

/// A complete run on a raw dataset: stratified split, model build, training.
struct RunResult {
  Model model;
  TrainResult train;
  std::size_t train_examples = 0;
  std::size_t test_examples = 0;
};

inline RunResult run_training(const data::Dataset& dataset, const AblationConfig& ablation, ModelDims dims,
                              const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  if (dataset.empty()) throw ContractError("train: empty dataset");
  auto [train_raw, test_raw] = data::stratified_split(dataset, cfg.test_fraction, cfg.seed);
  const auto train_set = data::prepare(train_raw, dims, ablation.branch);
  const auto test_set = data::prepare(test_raw, dims, ablation.branch);
  RunResult out{build_variant(ablation, dims, cfg.seed), {}, train_set.size(), test_set.size()};
  out.train = train(out.model, train_set, test_set, cfg, hooks);
  return out;
}

/// Writes <path> (last epoch) and <path>.best (best held-out accuracy).
inline void save_run_checkpoints(const std::filesystem::path& path, const RunResult& run) {
  save_checkpoint(path, run.model, {{"extra.epoch", std::to_string(run.train.log.empty() ? 0 : run.train.log.back().epoch)}});
  Model best{run.model.dims, run.model.ablation, run.model.seed, run.train.best};
  std::filesystem::path best_path = path;
  best_path += ".best";
  save_checkpoint(best_path, best, {{"extra.epoch", std::to_string(run.train.best_epoch)}});
}

}  // namespace posenc
