#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "diagraph/errors.hpp"
#include "diagraph/gnn.hpp"
#include "diagraph/metrics.hpp"
#include "diagraph/rng.hpp"

namespace diagraph {

struct Hyperparams {
  double learning_rate = 0.001;
  std::size_t batch_size = 8;
  std::size_t hidden_size = 10;
  double l2_penalty = 1e-4;
};

struct HyperRanges {
  double lr_lo = 1e-4, lr_hi = 1e-2;
  std::size_t batch_lo = 4, batch_hi = 32;
  std::size_t hidden_lo = 5, hidden_hi = 30;
  double l2_lo = 1e-5, l2_hi = 1e-3;
};

inline HyperRanges node_ranges() {
  HyperRanges r;
  r.batch_lo = 2;
  r.batch_hi = 16;
  return r;
}

inline HyperRanges graph_ranges() {
  HyperRanges r;
  r.batch_lo = 4;
  r.batch_hi = 32;
  return r;
}

// Draw order is fixed: rate, batch, hidden, penalty.
inline Hyperparams sample_hyperparams(const HyperRanges& r, Rng& rng) {
  Hyperparams hp;
  hp.learning_rate = rng.log_uniform(r.lr_lo, r.lr_hi);
  hp.batch_size = static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(r.batch_lo), static_cast<std::int64_t>(r.batch_hi)));
  hp.hidden_size = static_cast<std::size_t>(rng.uniform_int(
      static_cast<std::int64_t>(r.hidden_lo), static_cast<std::int64_t>(r.hidden_hi)));
  hp.l2_penalty = rng.log_uniform(r.l2_lo, r.l2_hi);
  return hp;
}

// w_c = N / (C * n_c) over the classes that actually occur; absent classes
// get weight zero.
inline std::vector<double> class_weights(const std::vector<int>& labels, std::size_t n_classes) {
  if (labels.empty()) throw LabelError("cannot derive class weights from an empty label list");
  std::vector<double> counts(n_classes, 0.0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes) {
      throw LabelError("label " + std::to_string(l) + " outside vocabulary of size " +
                       std::to_string(n_classes));
    }
    counts[static_cast<std::size_t>(l)] += 1.0;
  }
  double present = 0.0;
  for (double c : counts) present += (c > 0.0) ? 1.0 : 0.0;
  std::vector<double> weights(n_classes, 0.0);
  const double n = static_cast<double>(labels.size());
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (counts[c] > 0.0) weights[c] = n / (present * counts[c]);
  }
  return weights;
}

struct SplitSpec {
  std::size_t train = 0, val = 0, test = 0;
};

// 850/75/75 at corpus size 1000; proportional otherwise, rounding residue
// to the training side and splitting the rest evenly.
inline SplitSpec final_split_spec(std::size_t n) {
  if (n < 4) throw SpecError("corpus of " + std::to_string(n) + " diagrams cannot be split");
  SplitSpec s;
  s.val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.075 * static_cast<double>(n))));
  s.test = s.val;
  s.train = n - s.val - s.test;
  return s;
}

// 850/150 at corpus size 1000; no held-out test during the search.
inline SplitSpec search_split_spec(std::size_t n) {
  if (n < 2) throw SpecError("corpus of " + std::to_string(n) + " diagrams cannot be split");
  SplitSpec s;
  s.val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.15 * static_cast<double>(n))));
  s.train = n - s.val;
  s.test = 0;
  return s;
}

struct Splits {
  std::vector<std::size_t> train, val, test;
};

inline Splits make_splits(std::size_t n, const SplitSpec& spec, std::uint64_t seed) {
  if (spec.train + spec.val + spec.test != n) {
    throw SpecError("split sizes " + std::to_string(spec.train) + "+" + std::to_string(spec.val) +
                    "+" + std::to_string(spec.test) + " do not cover " + std::to_string(n));
  }
  Rng rng(seed);
  const std::vector<std::size_t> perm = random_permutation(n, rng);
  Splits s;
  s.train.assign(perm.begin(), perm.begin() + spec.train);
  s.val.assign(perm.begin() + spec.train, perm.begin() + spec.train + spec.val);
  s.test.assign(perm.begin() + spec.train + spec.val, perm.end());
  return s;
}

// One diagram-level dataset for a task: graphs, ids and the label vocabulary.
struct TaskData {
  TaskKind task = TaskKind::node;
  std::vector<ModelGraph> graphs;
  std::vector<std::string> diagram_ids;
  std::vector<std::string> class_names;
  std::string scheme_tag;

  std::size_t size() const { return graphs.size(); }
  std::size_t n_classes() const { return class_names.size(); }
  std::size_t in_dim() const { return graphs.empty() ? 0 : graphs[0].features.cols; }
};

struct TrainSettings {
  std::size_t max_epochs = 100;
  std::size_t patience = 15;
};

inline TrainSettings default_settings(TaskKind task) {
  TrainSettings s;
  s.patience = (task == TaskKind::node) ? 25 : 15;
  return s;
}

struct RunResult {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::size_t epochs = 0;
};

struct EpochStat {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_macro_f1 = 0.0;
};

struct TrainOutcome {
  RunResult result;
  double best_val_macro_f1 = 0.0;
  std::size_t best_epoch = 0;
  std::vector<EpochStat> history;
};

namespace detail {

constexpr std::uint64_t kShuffleSalt = 0x51u;
constexpr std::uint64_t kPermSalt = 0xA6u;
constexpr std::uint64_t kEvalSalt = 0xE7u;

inline std::vector<const ModelGraph*> gather(const TaskData& data,
                                             const std::vector<std::size_t>& indices,
                                             std::size_t from, std::size_t to) {
  std::vector<const ModelGraph*> out;
  out.reserve(to - from);
  for (std::size_t i = from; i < to; ++i) out.push_back(&data.graphs[indices[i]]);
  return out;
}

inline ConfusionMatrix evaluate(const Model& model, const TaskData& data,
                                const std::vector<std::size_t>& indices, std::uint64_t perm_seed) {
  ConfusionMatrix cm(data.n_classes());
  const std::size_t chunk = 64;
  for (std::size_t start = 0; start < indices.size(); start += chunk) {
    const std::size_t stop = std::min(indices.size(), start + chunk);
    const GraphBatch batch = make_batch(gather(data, indices, start, stop));
    const std::vector<int> pred = model.predict(batch, perm_seed);
    const std::vector<int>& truth =
        (data.task == TaskKind::node) ? batch.node_targets : batch.graph_targets;
    if (truth.size() != pred.size()) throw ShapeError("evaluation target/prediction mismatch");
    for (std::size_t i = 0; i < pred.size(); ++i) cm.add(truth[i], pred[i]);
  }
  return cm;
}

}  // namespace detail

// Mini-batch training with early stopping on validation macro F1. The best
// epoch's parameters are restored before the final evaluation; with an empty
// test split the validation split is evaluated instead (search mode).
inline TrainOutcome train_model(Model& model, const TaskData& data, const Splits& splits,
                                const Hyperparams& hp, const TrainSettings& settings,
                                std::uint64_t seed) {
  if (splits.train.empty() || splits.val.empty()) {
    throw UsageError("training needs non-empty train and validation splits");
  }
  if (data.task != model.config().task) throw UsageError("task mismatch between model and data");

  std::vector<int> train_targets;
  for (std::size_t i : splits.train) {
    const ModelGraph& g = data.graphs[i];
    if (data.task == TaskKind::node) {
      train_targets.insert(train_targets.end(), g.node_targets.begin(), g.node_targets.end());
    } else {
      train_targets.push_back(g.graph_target);
    }
  }
  const std::vector<double> weights = class_weights(train_targets, data.n_classes());

  TrainOutcome out;
  std::vector<Mat> best_params;
  double best_f1 = -1.0;
  std::size_t best_epoch = 0, streak = 0, epochs_run = 0;
  const std::size_t required_streak = std::max<std::size_t>(settings.patience, 1);

  std::vector<std::size_t> order = splits.train;
  for (std::size_t epoch = 1; epoch <= settings.max_epochs; ++epoch) {
    epochs_run = epoch;
    Rng shuffle_rng(mix_seed(seed, detail::kShuffleSalt + (epoch << 8)));
    shuffle_rng.shuffle(order);
    const std::uint64_t perm_seed = mix_seed(seed, detail::kPermSalt + (epoch << 8));

    double loss_sum = 0.0;
    double sample_count = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const std::size_t stop = std::min(order.size(), start + hp.batch_size);
      const GraphBatch batch = make_batch(detail::gather(data, order, start, stop));
      Tape tape;
      std::vector<Var> param_vars;
      const Var logits = model.forward(tape, batch, true, &param_vars, perm_seed);
      const std::vector<int>& targets =
          (data.task == TaskKind::node) ? batch.node_targets : batch.graph_targets;
      const Var loss = tape.weighted_cross_entropy(logits, targets, weights);
      const double loss_value = tape.val(loss).at(0, 0);
      if (!std::isfinite(loss_value)) throw NumericError("training loss diverged");
      tape.backward(loss);
      std::vector<Parameter>& params = model.parameters();
      for (std::size_t i = 0; i < params.size(); ++i) params[i].grad = tape.grad(param_vars[i]);
      adam_step(params, hp.learning_rate, hp.l2_penalty);
      loss_sum += loss_value * static_cast<double>(targets.size());
      sample_count += static_cast<double>(targets.size());
    }

    const ConfusionMatrix val_cm =
        detail::evaluate(model, data, splits.val, mix_seed(seed, detail::kEvalSalt));
    const double val_f1 = macro_f1(val_cm);
    out.history.push_back({epoch, loss_sum / sample_count, val_f1});

    if (val_f1 > best_f1) {  // strict: ties keep the earlier epoch
      best_f1 = val_f1;
      best_epoch = epoch;
      streak = 0;
      best_params.clear();
      for (const Parameter& p : model.parameters()) best_params.push_back(p.value);
    } else {
      streak += 1;
      if (streak >= required_streak) break;
    }
  }

  if (!best_params.empty()) {
    std::vector<Parameter>& params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i].value = best_params[i];
  }

  const std::vector<std::size_t>& eval_split = splits.test.empty() ? splits.val : splits.test;
  const ConfusionMatrix cm =
      detail::evaluate(model, data, eval_split, mix_seed(seed, detail::kEvalSalt));
  out.result.accuracy = accuracy(cm);
  out.result.macro_f1 = macro_f1(cm);
  out.result.weighted_f1 = weighted_f1(cm);
  out.result.epochs = epochs_run;
  out.result.seed = seed;
  out.best_val_macro_f1 = best_f1;
  out.best_epoch = best_epoch;
  return out;
}

inline ModelConfig make_config(Arch arch, TaskKind task, std::size_t in_dim, std::size_t hidden,
                               std::size_t out_dim) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.task = task;
  cfg.in_dim = in_dim;
  cfg.hidden_dim = hidden;
  cfg.out_dim = out_dim;
  return cfg;
}

struct SearchTrial {
  Hyperparams hp;
  double val_macro_f1 = 0.0;
  bool failed = false;
};

struct SearchResult {
  Hyperparams best;
  double best_val_macro_f1 = -1.0;
  std::size_t best_trial = 0;  // 1-based
  std::vector<SearchTrial> trials;
};

// Uniform random search over the hyperparameter box. All trials share one
// train/validation split so scores are comparable; diverged trials are
// recorded as failed and skipped.
inline SearchResult random_search(Arch arch, const TaskData& data, std::size_t budget,
                                  std::uint64_t seed, const HyperRanges& ranges,
                                  const TrainSettings& settings,
                                  const std::function<void(std::size_t, const SearchTrial&)>& on_trial = {}) {
  if (budget == 0) throw SpecError("search budget must be positive");
  if (data.size() == 0) throw UsageError("cannot search on an empty dataset");
  const Splits splits = make_splits(data.size(), search_split_spec(data.size()), mix_seed(seed, 0x5B));

  SearchResult out;
  for (std::size_t trial = 1; trial <= budget; ++trial) {
    Rng rng(mix_seed(seed, 0x7E00 + trial));
    SearchTrial t;
    t.hp = sample_hyperparams(ranges, rng);
    try {
      Model model(make_config(arch, data.task, data.in_dim(), t.hp.hidden_size, data.n_classes()),
                  mix_seed(seed, 0x1A00 + trial));
      model.scheme_tag = data.scheme_tag;
      const TrainOutcome outcome =
          train_model(model, data, splits, t.hp, settings, mix_seed(seed, 0x2E00 + trial));
      t.val_macro_f1 = outcome.best_val_macro_f1;
    } catch (const NumericError&) {
      t.failed = true;
    }
    if (!t.failed && t.val_macro_f1 > out.best_val_macro_f1) {  // ties keep earlier trial
      out.best_val_macro_f1 = t.val_macro_f1;
      out.best = t.hp;
      out.best_trial = trial;
    }
    out.trials.push_back(t);
    if (on_trial) on_trial(trial, t);
  }
  if (out.best_trial == 0) throw NumericError("every search trial diverged");
  return out;
}

// Repeated final training: per run the corpus is reshuffled into the final
// split, the model re-initialized and trained with the given hyperparameters.
inline std::vector<RunResult> run_protocol(Arch arch, const TaskData& data, const Hyperparams& hp,
                                           std::size_t n_runs, std::uint64_t master_seed,
                                           const TrainSettings& settings,
                                           const std::function<void(const RunResult&)>& on_run = {}) {
  if (n_runs == 0) throw SpecError("run count must be positive");
  std::vector<RunResult> results;
  for (std::size_t r = 0; r < n_runs; ++r) {
    const std::uint64_t run_seed = mix_seed(master_seed, r);
    const Splits splits = make_splits(data.size(), final_split_spec(data.size()), run_seed);
    Model model(make_config(arch, data.task, data.in_dim(), hp.hidden_size, data.n_classes()),
                mix_seed(run_seed, 1));
    model.scheme_tag = data.scheme_tag;
    TrainOutcome outcome = train_model(model, data, splits, hp, settings, run_seed);
    outcome.result.run = r + 1;
    results.push_back(outcome.result);
    if (on_run) on_run(outcome.result);
  }
  return results;
}

// Class-probability rows of a trained node model; the graph-level tasks use
// these as node features. The scheme tags must agree.
inline Mat extract_node_embeddings(const Model& node_model, const ModelGraph& graph,
                                   const std::string& scheme_tag) {
  if (node_model.config().task != TaskKind::node) {
    throw UsageError("embeddings come from a node-classification model");
  }
  if (!node_model.scheme_tag.empty() && !scheme_tag.empty() &&
      node_model.scheme_tag != scheme_tag) {
    throw UsageError("embedding model was trained on scheme '" + node_model.scheme_tag +
                     "', graph uses scheme '" + scheme_tag + "'");
  }
  const GraphBatch batch = make_batch({&graph});
  return node_model.probabilities(batch);
}

}  // namespace diagraph
