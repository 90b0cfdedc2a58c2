// Acceptance gate: one PASS/FAIL line per release criterion, each checked at
// its stated tolerance against the independent oracles in support/oracles.hpp.
// The two dataset-dependent criteria print SKIP unless DIAGRAPH_DATASET_ROOT
// points at a converted corpus. Exit status is the number of failures.
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <diagraph/diagraph.hpp>

#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace diagraph;

namespace {

int g_failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << "\n" << std::flush;
  if (!ok) g_failures += 1;
}

void run(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [ok, detail] = body();
    report(ok, name, detail);
  } catch (const std::exception& e) {
    report(false, name, std::string("exception: ") + e.what());
  }
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw ReportError("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Node-task data with three separable classes encoded in the features, for
// exercising early stopping on something that actually converges.
TaskData toy_node_data(std::size_t n_graphs, std::uint64_t seed) {
  TaskData data;
  data.task = TaskKind::node;
  data.class_names = {"c0", "c1", "c2"};
  data.scheme_tag = "a";
  Rng rng(seed);
  for (std::size_t g = 0; g < n_graphs; ++g) {
    const std::size_t n = 5 + rng.bounded(3);
    ModelGraph mg;
    mg.n_nodes = n;
    mg.features = Mat(n, 3);
    mg.node_targets.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
      const int c = static_cast<int>(rng.bounded(3));
      mg.node_targets[v] = c;
      for (std::size_t j = 0; j < 3; ++j) {
        mg.features.at(v, j) = (static_cast<int>(j) == c ? 5.0 : 0.0) + rng.uniform(-0.5, 0.5);
      }
      mg.edges.emplace_back(v, v);
      if (v > 0) {
        mg.edges.emplace_back(v - 1, v);
        mg.edges.emplace_back(v, v - 1);
      }
    }
    data.graphs.push_back(std::move(mg));
    data.diagram_ids.push_back("T" + std::to_string(g));
  }
  return data;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

// --- criterion: gradient fidelity -------------------------------------------

std::pair<bool, std::string> check_gradients() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const Arch arch : {Arch::gcn, Arch::sgc, Arch::gat, Arch::sage}) {
    for (const TaskKind task : {TaskKind::node, TaskKind::graph}) {
      for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        worst = std::max(worst, oracle::full_model_gradient_error(arch, task, seed));
      }
    }
  }
  const double elapsed = seconds_since(start);
  const bool ok = worst < 1e-4 && elapsed < 60.0;
  return {ok, "max rel err " + fmt(worst) + " over 4 archs x 2 tasks x 10 seeds, " +
                  fmt(elapsed) + " s"};
}

// --- criterion: oracle equivalence -------------------------------------------

std::pair<bool, std::string> check_forward_oracles() {
  Rng rng(424242);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ModelGraph g = oracle::random_graph(rng, 3, 8, 4, 3, false);
    const GraphBatch b = make_batch({g});
    const std::uint64_t s = mix_seed(515151, static_cast<std::uint64_t>(trial));
    const Model gcn(make_config(Arch::gcn, TaskKind::node, 4, 6, 3), mix_seed(s, 1));
    const Model sgc(make_config(Arch::sgc, TaskKind::node, 4, 6, 3), mix_seed(s, 2));
    const Model gat(make_config(Arch::gat, TaskKind::node, 4, 5, 3), mix_seed(s, 3));
    const Model sage(make_config(Arch::sage, TaskKind::node, 4, 5, 3), mix_seed(s, 4));
    worst = std::max(worst, oracle::max_abs_diff(gcn.logits(b), oracle::gcn_oracle(gcn, b)));
    worst = std::max(worst, oracle::max_abs_diff(sgc.logits(b), oracle::sgc_oracle(sgc, b)));
    worst = std::max(worst, oracle::max_abs_diff(gat.logits(b), oracle::gat_oracle(gat, b)));
    worst = std::max(worst, oracle::max_abs_diff(sage.logits(b, 0, NeighborOrder::canonical),
                                                 oracle::sage_oracle(sage, b)));
  }
  if (worst >= 1e-12) {
    return {false, "layer outputs drift from the per-node oracles by " + fmt(worst)};
  }

  double metric_worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n_classes = static_cast<std::size_t>(rng.uniform_int(2, 6));
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 40));
    std::vector<int> y_true(n), y_pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      y_true[i] = static_cast<int>(rng.bounded(n_classes));
      y_pred[i] = static_cast<int>(rng.bounded(n_classes));
    }
    const ConfusionMatrix m = ConfusionMatrix::from_predictions(y_true, y_pred, n_classes);
    const oracle::BruteMetrics ref = oracle::brute_force_metrics(y_true, y_pred, n_classes);
    metric_worst = std::max(metric_worst, std::abs(accuracy(m) - ref.accuracy));
    metric_worst = std::max(metric_worst, std::abs(macro_f1(m) - ref.macro_f1));
    metric_worst = std::max(metric_worst, std::abs(weighted_f1(m) - ref.weighted_f1));
  }
  const bool ok = metric_worst < 1e-12;
  return {ok, "100 graphs x 4 archs <= " + fmt(worst) + ", 1000 metric checks <= " +
                  fmt(metric_worst)};
}

// --- criterion: geometry ------------------------------------------------------

std::pair<bool, std::string> check_geometry() {
  Rng rng(20260816);
  double worst_rel = 0.0;
  std::size_t checked = 0;
  while (checked < 200) {
    const Polygon poly = oracle::random_star_polygon(rng);
    const double area = polygon_area(poly);
    if (area < 100.0) continue;
    worst_rel = std::max(worst_rel, std::abs(area - oracle::raster_area(poly)) / area);
    checked += 1;
  }
  if (worst_rel >= 0.02) {
    return {false, "shoelace vs rasterization relative error " + fmt(worst_rel)};
  }

  double worst_solidity = 0.0;
  int convex_done = 0;
  while (convex_done < 50) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(3, 20));
    std::vector<double> angles;
    for (std::size_t i = 0; i < n; ++i) angles.push_back(rng.uniform(0.0, 6.283185307179586));
    std::sort(angles.begin(), angles.end());
    angles.erase(std::unique(angles.begin(), angles.end()), angles.end());
    if (angles.size() < 3) continue;
    Polygon poly;
    for (double a : angles) {
      poly.vertices.push_back({100 + 40 * std::cos(a), 100 + 40 * std::sin(a)});
    }
    worst_solidity = std::max(worst_solidity, std::abs(solidity(poly) - 1.0));
    convex_done += 1;
  }
  if (worst_solidity > 1e-9) {
    return {false, "convex solidity deviates from 1 by " + fmt(worst_solidity)};
  }

  double worst_scale = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const Polygon poly = oracle::random_star_polygon(rng);
    const double k = rng.uniform(0.2, 8.0);
    Polygon scaled;
    for (const Point& p : poly.vertices) scaled.vertices.push_back({p.x * k, p.y * k});
    const std::vector<double> a = layout_features(poly, 800.0, 600.0).as_vector();
    const std::vector<double> b = layout_features(scaled, 800.0 * k, 600.0 * k).as_vector();
    for (std::size_t j = 0; j < a.size(); ++j) {
      worst_scale = std::max(worst_scale, std::abs(a[j] - b[j]));
    }
  }
  const bool ok = worst_scale <= 1e-9;
  return {ok, "raster rel err <= " + fmt(worst_rel) + ", solidity err <= " + fmt(worst_solidity) +
                  ", scale err <= " + fmt(worst_scale)};
}

// --- criterion: rank statistics ------------------------------------------------

std::pair<bool, std::string> check_statistics() {
  const MwuResult textbook = mann_whitney_exact({1.0, 2.0, 3.0}, {4.0, 5.0, 6.0});
  if (std::abs(textbook.p - 0.1) > 1e-12) {
    return {false, "exact p for the disjoint 3-vs-3 sets is " + fmt(textbook.p) + ", wanted 0.1"};
  }

  Rng rng(777);
  double worst_gap = 0.0;
  int done = 0;
  while (done < 200) {
    std::vector<double> a(8), b(8);
    for (double& v : a) v = rng.uniform(0.0, 1.0);
    for (double& v : b) v = rng.uniform(0.0, 1.0) + rng.uniform(0.0, 0.3);
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::sort(pooled.begin(), pooled.end());
    if (std::adjacent_find(pooled.begin(), pooled.end()) != pooled.end()) continue;  // no ties
    worst_gap =
        std::max(worst_gap, std::abs(mann_whitney_exact(a, b).p - mann_whitney_normal(a, b).p));
    done += 1;
  }
  const bool ok = worst_gap < 0.02;
  return {ok, "exact p = 0.1 reproduced; exact-vs-normal gap <= " + fmt(worst_gap) +
                  " over 200 tie-free n=8 pairs"};
}

// --- criterion: protocol mechanics ----------------------------------------------

std::pair<bool, std::string> check_protocol() {
  // Class-weight identity: sum over classes of w_c * n_c recovers N.
  Rng rng(999);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n_classes = static_cast<std::size_t>(rng.uniform_int(2, 8));
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(5, 200));
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.bounded(n_classes));
    const std::vector<double> w = class_weights(labels, n_classes);
    std::vector<double> counts(n_classes, 0.0);
    for (int l : labels) counts[static_cast<std::size_t>(l)] += 1.0;
    double total = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) total += w[c] * counts[c];
    if (std::abs(total - static_cast<double>(n)) > 1e-9) {
      return {false, "sum of w_c * n_c is " + fmt(total) + " for N = " + std::to_string(n)};
    }
  }

  // Splits: 850/75/75 on 1000 ids, disjoint and exhaustive.
  for (std::uint64_t seed : {1ULL, 42ULL, 20260816ULL}) {
    const Splits s = make_splits(1000, final_split_spec(1000), seed);
    if (s.train.size() != 850 || s.val.size() != 75 || s.test.size() != 75) {
      return {false, "split sizes " + std::to_string(s.train.size()) + "/" +
                         std::to_string(s.val.size()) + "/" + std::to_string(s.test.size())};
    }
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    all.insert(s.test.begin(), s.test.end());
    if (all.size() != 1000 || *all.rbegin() != 999) {
      return {false, "splits are not a disjoint exhaustive cover of 0..999"};
    }
  }

  // Early stopping respects both protocol patience values.
  const TaskData toy = toy_node_data(40, 77);
  for (const std::size_t patience : {std::size_t{15}, std::size_t{25}}) {
    const Splits splits = make_splits(toy.size(), final_split_spec(toy.size()), 7);
    Model model(make_config(Arch::sgc, TaskKind::node, toy.in_dim(), 8, toy.n_classes()), 11);
    TrainSettings settings;
    settings.max_epochs = 100;
    settings.patience = patience;
    const TrainOutcome out =
        train_model(model, toy, splits, Hyperparams{0.01, 8, 8, 1e-5}, settings, 13);
    if (out.history.size() >= settings.max_epochs) {
      return {false, "early stopping never fired at patience " + std::to_string(patience)};
    }
    if (out.history.size() != out.best_epoch + patience) {
      return {false, "ran " + std::to_string(out.history.size()) + " epochs, best epoch " +
                         std::to_string(out.best_epoch) + ", patience " + std::to_string(patience)};
    }
  }

  // Bit-for-bit reproducibility of the full pipeline under one master seed.
  ExperimentManifest m;
  m.seed = 616;
  m.budget = 1;
  m.runs = 2;
  m.max_epochs = 3;
  m.synth.n_diagrams = 24;
  m.schemes = {"a"};
  m.archs = {"sgc"};
  m.tasks = {"node"};
  const TempDir d1("diagraph-accept-a"), d2("diagraph-accept-b");
  run_experiment(m, d1.path.string(), 1);
  run_experiment(m, d2.path.string(), 1);
  for (const std::string rel : {"log.jsonl", "runs/node__a__sgc.csv", "tables/node.csv"}) {
    if (slurp(d1.path / rel) != slurp(d2.path / rel)) {
      return {false, "repeated pipeline runs differ in " + rel};
    }
  }
  return {true,
          "weight identity, 850/75/75 cover, patience 15/25 honored, pipeline bit-reproducible"};
}

// --- criterion: synthetic learnability -------------------------------------------

std::pair<bool, std::string> check_learnability() {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = 20260816;  // frozen
  SynthSpec spec;
  spec.n_diagrams = 200;
  spec.type_mix = {{"cycle", 1.0}, {"tree", 1.0}, {"network", 1.0}, {"cross-section", 1.0}};
  const SyntheticCorpus corpus = generate_synthetic_corpus(spec, seed);
  const Hyperparams hp{0.005, 8, 20, 1e-5};

  // Element-kind classification with the LSTM-aggregation network.
  const TaskData node_data = node_task_data(corpus.documents, Scheme::a);
  const Splits node_splits =
      make_splits(node_data.size(), final_split_spec(node_data.size()), mix_seed(seed, 1));
  Model node_model(make_config(Arch::sage, TaskKind::node, node_data.in_dim(), hp.hidden_size,
                               node_data.n_classes()),
                   mix_seed(seed, 2));
  TrainSettings node_settings = default_settings(TaskKind::node);
  node_settings.max_epochs = 100;
  const TrainOutcome node_out =
      train_model(node_model, node_data, node_splits, hp, node_settings, mix_seed(seed, 3));

  // Diagram-type classification (fine labels, grouping+connectivity graphs)
  // over embedding features.
  const Model emb =
      train_embedding_model(corpus.documents, Scheme::b_grouping_connectivity, mix_seed(seed, 4));
  const TaskData graph_data =
      graph_task_data(corpus.documents, Scheme::b_grouping_connectivity, LabelSpace::fine, emb);
  const Splits graph_splits =
      make_splits(graph_data.size(), final_split_spec(graph_data.size()), mix_seed(seed, 5));
  Model graph_model(make_config(Arch::sage, TaskKind::graph, graph_data.in_dim(), hp.hidden_size,
                                graph_data.n_classes()),
                    mix_seed(seed, 6));
  TrainSettings graph_settings = default_settings(TaskKind::graph);
  graph_settings.max_epochs = 100;
  const TrainOutcome graph_out =
      train_model(graph_model, graph_data, graph_splits, hp, graph_settings, mix_seed(seed, 7));

  const double elapsed = seconds_since(start);
  const bool ok =
      node_out.result.macro_f1 >= 0.9 && graph_out.result.accuracy >= 0.8 && elapsed < 600.0;
  return {ok, "node macro F1 " + fmt(node_out.result.macro_f1) + " (>= 0.9), diagram accuracy " +
                  fmt(graph_out.result.accuracy) + " (>= 0.8), " + fmt(elapsed) + " s"};
}

// --- dataset-dependent criteria ----------------------------------------------------

struct Band {
  std::string condition;  // runs/<condition>.csv under the experiment directory
  double center;
  double width;
};

// Runs the published protocol on the converted corpus and checks the reported
// mean accuracies. Random hyperparameter search stands in for the original
// TPE optimizer, so deviations inside each band are expected and reported.
void check_dataset_bands(const std::string& root) {
  ExperimentManifest m;
  m.dataset_root = root;
  m.schemes = {"a", "b-g"};
  m.archs = {"sage", "gcn"};
  m.tasks = {"node", "graph-a17", "graph-coarse5"};
  const TempDir dir("diagraph-accept-data");
  run_experiment(m, dir.path.string(), 1);

  const std::vector<std::pair<std::string, std::vector<Band>>> criteria = {
      {"dataset node-task bands",
       {{"node__a__sage", 0.93, 0.03},
        {"node__b-g__sage", 0.85, 0.05},
        {"node__a__rf", 0.76, 0.05}}},
      {"dataset graph-task bands",
       {{"graph-a17__a__sage", 0.58, 0.05},
        {"graph-coarse5__b-g__gcn", 0.63, 0.05},
        {"graph-a17__a__dummy", 0.15, 0.03}}},
  };
  for (const auto& [name, bands] : criteria) {
    bool ok = true;
    std::string detail;
    for (const Band& band : bands) {
      const std::vector<RunResult> runs =
          read_runs_csv_file((dir.path / "runs" / (band.condition + ".csv")).string());
      std::vector<double> acc;
      for (const RunResult& r : runs) acc.push_back(r.accuracy);
      const double mean = mean_of(acc);
      const bool in_band = std::abs(mean - band.center) <= band.width;
      ok = ok && in_band;
      if (!detail.empty()) detail += ", ";
      detail += band.condition + " mean acc " + fmt(mean) + " vs " + fmt(band.center) + " +- " +
                fmt(band.width) + (in_band ? "" : " OUT");
    }
    detail += "; random search substitutes for the original TPE optimizer";
    report(ok, name, detail);
  }
}

}  // namespace

int main() {
  std::cout << "acceptance checks\n=================\n";
  run("gradient fidelity: central differences across every architecture", check_gradients);
  run("oracle equivalence: layers and metrics match brute-force loops", check_forward_oracles);
  run("geometry: area, solidity and scale invariance", check_geometry);
  run("rank statistics: exact enumeration and normal approximation", check_statistics);
  run("protocol mechanics: weights, splits, patience, reproducibility", check_protocol);
  run("synthetic learnability: frozen-seed corpus reaches the floors", check_learnability);

  const char* root = std::getenv("DIAGRAPH_DATASET_ROOT");
  if (root == nullptr || std::string(root).empty()) {
    std::cout << "SKIP dataset node-task bands (DIAGRAPH_DATASET_ROOT not set)\n";
    std::cout << "SKIP dataset graph-task bands (DIAGRAPH_DATASET_ROOT not set)\n";
  } else {
    try {
      check_dataset_bands(root);
    } catch (const std::exception& e) {
      report(false, "dataset bands", std::string("exception: ") + e.what());
    }
  }

  std::cout << (g_failures == 0 ? "all acceptance checks passed\n"
                                : std::to_string(g_failures) + " acceptance check(s) failed\n");
  return g_failures;
}
