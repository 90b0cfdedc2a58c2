#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "diagraph/baselines.hpp"
#include "diagraph/corpus.hpp"
#include "diagraph/errors.hpp"
#include "diagraph/pipeline.hpp"
#include "diagraph/report.hpp"
#include "diagraph/synthetic.hpp"
#include "diagraph/training.hpp"

namespace diagraph {

// Full experiment grid: which corpus, which conditions, which budgets.
struct ExperimentManifest {
  std::uint64_t seed = 42;
  std::size_t budget = 100;    // random-search trials per condition
  std::size_t runs = 20;       // repeated final trainings per condition
  std::size_t max_epochs = 100;
  std::string dataset_root;    // empty -> synthetic corpus
  std::string subset_file;     // optional id list applied to dataset_root
  SynthSpec synth;
  bool with_baselines = true;
  std::vector<std::string> schemes = {"a", "b-g", "b-gc"};
  std::vector<std::string> archs = {"gat", "gcn", "sage", "sgc"};
  std::vector<std::string> tasks = {"node", "graph-a17", "graph-coarse5", "graph-fine12"};
};

inline ordered_json manifest_to_json(const ExperimentManifest& m) {
  ordered_json j;
  j["version"] = 1;
  j["seed"] = m.seed;
  j["budget"] = m.budget;
  j["runs"] = m.runs;
  j["max_epochs"] = m.max_epochs;
  if (!m.dataset_root.empty()) j["dataset_root"] = m.dataset_root;
  if (!m.subset_file.empty()) j["subset_file"] = m.subset_file;
  ordered_json synth;
  synth["n_diagrams"] = m.synth.n_diagrams;
  ordered_json mix = ordered_json::array();
  for (const auto& [type, weight] : m.synth.type_mix) mix.push_back({{"type", type}, {"weight", weight}});
  synth["type_mix"] = mix;
  synth["min_elements"] = m.synth.min_elements;
  synth["max_elements"] = m.synth.max_elements;
  synth["image_width"] = m.synth.image_width;
  synth["image_height"] = m.synth.image_height;
  j["synthetic"] = synth;
  j["with_baselines"] = m.with_baselines;
  j["schemes"] = m.schemes;
  j["archs"] = m.archs;
  j["tasks"] = m.tasks;
  return j;
}

inline ExperimentManifest manifest_from_json(const json& j) {
  if (j.value("version", 0) != 1) throw ParseError("unsupported manifest version");
  ExperimentManifest m;
  m.seed = j.value("seed", std::uint64_t{42});
  m.budget = j.value("budget", std::size_t{100});
  m.runs = j.value("runs", std::size_t{20});
  m.max_epochs = j.value("max_epochs", std::size_t{100});
  m.dataset_root = j.value("dataset_root", std::string{});
  m.subset_file = j.value("subset_file", std::string{});
  if (j.contains("synthetic")) {
    const json& s = j["synthetic"];
    m.synth.n_diagrams = s.value("n_diagrams", m.synth.n_diagrams);
    if (s.contains("type_mix")) {
      m.synth.type_mix.clear();
      for (const auto& entry : s["type_mix"]) {
        m.synth.type_mix.emplace_back(entry.value("type", std::string{}),
                                      entry.value("weight", 1.0));
      }
    }
    m.synth.min_elements = s.value("min_elements", m.synth.min_elements);
    m.synth.max_elements = s.value("max_elements", m.synth.max_elements);
    m.synth.image_width = s.value("image_width", m.synth.image_width);
    m.synth.image_height = s.value("image_height", m.synth.image_height);
  }
  m.with_baselines = j.value("with_baselines", true);
  if (j.contains("schemes")) m.schemes = j["schemes"].get<std::vector<std::string>>();
  if (j.contains("archs")) m.archs = j["archs"].get<std::vector<std::string>>();
  if (j.contains("tasks")) m.tasks = j["tasks"].get<std::vector<std::string>>();
  return m;
}

struct Condition {
  std::string task;
  std::string scheme;
  std::string model;  // architecture name, "dummy" or "rf"

  std::string name() const { return task + "__" + scheme + "__" + model; }
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

// Deterministic per-condition seed: independent of grid order and resume.
inline std::uint64_t condition_seed(std::uint64_t master, const Condition& c) {
  return mix_seed(master, detail::fnv1a(c.name()));
}

// Dummy or forest baseline under the repeated-splits protocol.
inline std::vector<RunResult> run_baseline_condition(const TaskData& data, const std::string& kind,
                                                     std::size_t n_runs, std::uint64_t seed) {
  if (kind != "dummy" && kind != "rf") throw UsageError("unknown baseline '" + kind + "'");
  if (n_runs == 0) throw SpecError("run count must be positive");
  std::vector<RunResult> out;
  for (std::size_t r = 0; r < n_runs; ++r) {
    const std::uint64_t run_seed = mix_seed(seed, r);
    const Splits splits = make_splits(data.size(), final_split_spec(data.size()), run_seed);

    // Flatten diagrams into sample rows: nodes for the node task, one mean
    // vector per diagram for the graph task.
    const auto flatten = [&](const std::vector<std::size_t>& idx, Mat& x, std::vector<int>& y) {
      std::vector<std::vector<double>> rows;
      for (std::size_t i : idx) {
        const ModelGraph& g = data.graphs[i];
        if (data.task == TaskKind::node) {
          for (std::size_t v = 0; v < g.n_nodes; ++v) {
            std::vector<double> row(g.features.cols);
            for (std::size_t j = 0; j < g.features.cols; ++j) row[j] = g.features.at(v, j);
            rows.push_back(std::move(row));
            y.push_back(g.node_targets[v]);
          }
        } else {
          rows.push_back(graph_mean_vector(g.features));
          y.push_back(g.graph_target);
        }
      }
      x = Mat(rows.size(), data.in_dim());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < x.cols; ++j) x.at(i, j) = rows[i][j];
      }
    };
    Mat train_x, test_x;
    std::vector<int> train_y, test_y;
    flatten(splits.train, train_x, train_y);
    flatten(splits.test, test_x, test_y);

    std::vector<int> pred;
    if (kind == "dummy") {
      pred = dummy_predict(train_y, data.n_classes(), test_y.size(), mix_seed(run_seed, 3));
    } else {
      const RandomForest forest =
          forest_fit(train_x, train_y, data.n_classes(), ForestConfig{}, mix_seed(run_seed, 4));
      pred = forest.predict(test_x);
    }
    const ConfusionMatrix cm = ConfusionMatrix::from_predictions(test_y, pred, data.n_classes());
    RunResult res;
    res.run = r + 1;
    res.seed = run_seed;
    res.accuracy = accuracy(cm);
    res.macro_f1 = macro_f1(cm);
    res.weighted_f1 = weighted_f1(cm);
    res.epochs = 0;
    out.push_back(res);
  }
  return out;
}

struct ConditionOutcome {
  Condition condition;
  std::vector<RunResult> runs;
  std::optional<Hyperparams> best_hp;
  double search_score = 0.0;
  double seconds = 0.0;
};

// Executes the whole manifest into out_dir. Existing per-condition run files
// are reused (resume); per-condition seeds make results independent of
// execution order and of the number of worker threads.
class ExperimentDriver {
 public:
  ExperimentDriver(ExperimentManifest manifest, std::string out_dir, std::size_t jobs = 1,
                   std::function<void(const std::string&)> progress = {})
      : manifest_(std::move(manifest)), out_dir_(std::move(out_dir)),
        jobs_(std::max<std::size_t>(jobs, 1)), progress_(std::move(progress)) {}

  void run() {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir_);
    fs::create_directories(out_dir_ + "/runs");
    fs::create_directories(out_dir_ + "/best");
    fs::create_directories(out_dir_ + "/embeddings");
    fs::create_directories(out_dir_ + "/tables");
    {
      std::ofstream mf(out_dir_ + "/manifest.json");
      mf << manifest_to_json(manifest_).dump(2) << '\n';
    }

    load_documents();
    train_embedding_models();
    build_task_data();

    std::vector<Condition> conditions;
    for (const std::string& task : manifest_.tasks) {
      for (const std::string& scheme : manifest_.schemes) {
        for (const std::string& arch : manifest_.archs) {
          conditions.push_back({task, scheme, arch});
        }
        if (manifest_.with_baselines && (scheme == "a" || scheme == "b-g")) {
          conditions.push_back({task, scheme, "dummy"});
          conditions.push_back({task, scheme, "rf"});
        }
      }
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const std::size_t n_workers = std::min(jobs_, conditions.size());
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const auto work = [&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= conditions.size()) return;
        try {
          run_condition(conditions[i]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    };
    if (n_workers <= 1) {
      work();
    } else {
      for (std::size_t w = 0; w < n_workers; ++w) workers.emplace_back(work);
      for (std::thread& t : workers) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    write_tables(conditions);
    write_log();
  }

  const std::vector<ConditionOutcome>& outcomes() const { return outcomes_; }

 private:
  void note(const std::string& msg) {
    if (!progress_) return;
    std::lock_guard<std::mutex> lock(progress_mutex_);
    progress_(msg);
  }

  void load_documents() {
    if (!manifest_.dataset_root.empty()) {
      std::optional<std::vector<std::string>> subset;
      if (!manifest_.subset_file.empty()) subset = read_subset_list(manifest_.subset_file);
      const CorpusIndex index = build_corpus_index(manifest_.dataset_root, subset);
      docs_ = load_corpus(index);
      note("loaded " + std::to_string(docs_.size()) + " diagrams from " + manifest_.dataset_root);
    } else {
      SyntheticCorpus corpus = generate_synthetic_corpus(manifest_.synth, mix_seed(manifest_.seed, 0xC0));
      docs_ = std::move(corpus.documents);
      note("generated " + std::to_string(docs_.size()) + " synthetic diagrams");
    }
  }

  void train_embedding_models() {
    bool needed = false;
    for (const std::string& task : manifest_.tasks) {
      if (task != "node") needed = true;
    }
    if (!needed) return;
    for (const std::string& scheme_name : manifest_.schemes) {
      const std::string path = out_dir_ + "/embeddings/" + scheme_name + ".ckpt";
      if (std::filesystem::exists(path)) {
        embedding_models_.emplace(scheme_name, load_checkpoint_file(path));
        note("reusing embedding model for scheme " + scheme_name);
        continue;
      }
      const Scheme scheme = scheme_from_string(scheme_name);
      Model model = train_embedding_model(
          docs_, scheme, mix_seed(manifest_.seed, detail::fnv1a("embed:" + scheme_name)), {},
          manifest_.max_epochs);
      save_checkpoint_file(model, path);
      embedding_models_.emplace(scheme_name, std::move(model));
      note("trained embedding model for scheme " + scheme_name);
    }
  }

  void build_task_data() {
    for (const std::string& task_name : manifest_.tasks) {
      const TaskSpec spec = task_from_string(task_name);
      for (const std::string& scheme_name : manifest_.schemes) {
        const Scheme scheme = scheme_from_string(scheme_name);
        if (spec.kind == TaskKind::node) {
          data_.emplace(task_name + "/" + scheme_name, node_task_data(docs_, scheme));
        } else {
          data_.emplace(task_name + "/" + scheme_name,
                        graph_task_data(docs_, scheme, spec.labels,
                                        embedding_models_.at(scheme_name)));
        }
      }
    }
  }

  void run_condition(const Condition& cond) {
    const std::string runs_path = out_dir_ + "/runs/" + cond.name() + ".csv";
    ConditionOutcome outcome;
    outcome.condition = cond;
    if (std::filesystem::exists(runs_path)) {
      outcome.runs = read_runs_csv_file(runs_path);
      const std::string best_path = out_dir_ + "/best/" + cond.name() + ".json";
      if (std::filesystem::exists(best_path)) {
        const json best = read_json_file(best_path);
        Hyperparams hp;
        hp.learning_rate = best.at("learning_rate").get<double>();
        hp.batch_size = best.at("batch_size").get<std::size_t>();
        hp.hidden_size = best.at("hidden_size").get<std::size_t>();
        hp.l2_penalty = best.at("l2_penalty").get<double>();
        outcome.best_hp = hp;
        outcome.search_score = best.at("val_macro_f1").get<double>();
      }
      note("reusing " + cond.name());
      record(std::move(outcome));
      return;
    }
    const auto started = std::chrono::steady_clock::now();
    const TaskData& data = data_.at(cond.task + "/" + cond.scheme);
    const std::uint64_t seed = condition_seed(manifest_.seed, cond);

    if (cond.model == "dummy" || cond.model == "rf") {
      outcome.runs = run_baseline_condition(data, cond.model, manifest_.runs, mix_seed(seed, 2));
    } else {
      const Arch arch = arch_from_string(cond.model);
      TrainSettings settings = default_settings(data.task);
      settings.max_epochs = manifest_.max_epochs;
      const HyperRanges ranges = (data.task == TaskKind::node) ? node_ranges() : graph_ranges();
      const SearchResult search = random_search(arch, data, manifest_.budget, mix_seed(seed, 1),
                                                ranges, settings);
      outcome.best_hp = search.best;
      outcome.search_score = search.best_val_macro_f1;
      outcome.runs = run_protocol(arch, data, search.best, manifest_.runs, mix_seed(seed, 2),
                                  settings);
      ordered_json best;
      best["condition"] = cond.name();
      best["seed"] = seed;
      best["learning_rate"] = search.best.learning_rate;
      best["batch_size"] = search.best.batch_size;
      best["hidden_size"] = search.best.hidden_size;
      best["l2_penalty"] = search.best.l2_penalty;
      best["val_macro_f1"] = search.best_val_macro_f1;
      best["trial"] = search.best_trial;
      std::ofstream bf(out_dir_ + "/best/" + cond.name() + ".json");
      bf << best.dump(2) << '\n';
    }
    write_runs_csv_file(outcome.runs, runs_path);
    outcome.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    note("finished " + cond.name());
    record(std::move(outcome));
  }

  void record(ConditionOutcome outcome) {
    std::lock_guard<std::mutex> lock(outcomes_mutex_);
    outcomes_.push_back(std::move(outcome));
  }

  std::vector<RunResult> runs_of(const std::string& name) const {
    for (const ConditionOutcome& o : outcomes_) {
      if (o.condition.name() == name) return o.runs;
    }
    throw ReportError("no runs recorded for condition '" + name + "'");
  }

  void write_tables(const std::vector<Condition>&) {
    for (const std::string& task : manifest_.tasks) {
      {
        ReportSpec spec;
        spec.title = "Task " + task + ": architectures x graph variants";
        spec.arch_names = manifest_.archs;
        spec.graph_names = manifest_.schemes;
        for (const std::string& arch : manifest_.archs) {
          std::vector<std::vector<RunResult>> row;
          for (const std::string& scheme : manifest_.schemes) {
            row.push_back(runs_of(Condition{task, scheme, arch}.name()));
          }
          spec.runs.push_back(std::move(row));
        }
        const RenderedReport rendered = render_report(spec);
        std::ofstream md(out_dir_ + "/tables/" + task + ".md");
        md << rendered.markdown;
        std::ofstream csv(out_dir_ + "/tables/" + task + ".csv");
        csv << rendered.csv;
      }
      if (manifest_.with_baselines) {
        ReportSpec spec;
        spec.title = "Task " + task + ": baselines";
        spec.arch_names = {"dummy", "rf"};
        spec.graph_names.clear();
        for (const std::string& scheme : manifest_.schemes) {
          if (scheme == "a" || scheme == "b-g") spec.graph_names.push_back(scheme);
        }
        if (spec.graph_names.empty()) continue;
        for (const std::string& model : spec.arch_names) {
          std::vector<std::vector<RunResult>> row;
          for (const std::string& scheme : spec.graph_names) {
            row.push_back(runs_of(Condition{task, scheme, model}.name()));
          }
          spec.runs.push_back(std::move(row));
        }
        const RenderedReport rendered = render_report(spec);
        std::ofstream md(out_dir_ + "/tables/" + task + "_baselines.md");
        md << rendered.markdown;
        std::ofstream csv(out_dir_ + "/tables/" + task + "_baselines.csv");
        csv << rendered.csv;
      }
    }
  }

  void write_log() {
    std::sort(outcomes_.begin(), outcomes_.end(),
              [](const ConditionOutcome& a, const ConditionOutcome& b) {
                return a.condition.name() < b.condition.name();
              });
    std::ofstream log(out_dir_ + "/log.jsonl");
    for (const ConditionOutcome& o : outcomes_) {
      ordered_json j;
      j["condition"] = o.condition.name();
      j["seed"] = condition_seed(manifest_.seed, o.condition);
      j["runs"] = o.runs.size();
      if (o.best_hp) {
        j["learning_rate"] = o.best_hp->learning_rate;
        j["batch_size"] = o.best_hp->batch_size;
        j["hidden_size"] = o.best_hp->hidden_size;
        j["l2_penalty"] = o.best_hp->l2_penalty;
        j["search_score"] = o.search_score;
      }
      double mean_acc = 0.0;
      for (const RunResult& r : o.runs) mean_acc += r.accuracy;
      if (!o.runs.empty()) mean_acc /= static_cast<double>(o.runs.size());
      j["mean_accuracy"] = mean_acc;
      log << j.dump() << '\n';
    }
  }

  ExperimentManifest manifest_;
  std::string out_dir_;
  std::size_t jobs_ = 1;
  std::function<void(const std::string&)> progress_;
  std::mutex progress_mutex_;
  std::vector<DiagramDocument> docs_;
  std::map<std::string, Model> embedding_models_;
  std::map<std::string, TaskData> data_;
  std::vector<ConditionOutcome> outcomes_;
  std::mutex outcomes_mutex_;
};

inline void run_experiment(const ExperimentManifest& manifest, const std::string& out_dir,
                           std::size_t jobs = 1,
                           const std::function<void(const std::string&)>& progress = {}) {
  ExperimentDriver driver(manifest, out_dir, jobs, progress);
  driver.run();
}

}  // namespace diagraph
