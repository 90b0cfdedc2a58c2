// Command-line front end: corpus validation and conversion, synthetic
// generation, feature dumps, training/tuning, baselines, statistical
// comparison and full experiment reproduction.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "diagraph/diagraph.hpp"

namespace {

using namespace diagraph;

struct CorpusOptions {
  std::string root;
  std::string subset_file;
  std::size_t synthetic_n = 0;
  std::uint64_t synthetic_seed = 7;
  std::size_t min_elements = 8;
  std::size_t max_elements = 20;
};

void add_corpus_flags(CLI::App* cmd, CorpusOptions& o) {
  cmd->add_option("--dataset-root", o.root, "Directory of canonical diagram JSON files")
      ->envname("DIAGRAPH_DATASET_ROOT");
  cmd->add_option("--subset", o.subset_file, "Restrict to the diagram ids listed in this file");
  cmd->add_option("--synthetic", o.synthetic_n,
                  "Generate an in-memory synthetic corpus of this many diagrams");
  cmd->add_option("--synthetic-seed", o.synthetic_seed, "Seed for the synthetic corpus");
  cmd->add_option("--min-elements", o.min_elements, "Synthetic: fewest elements per diagram");
  cmd->add_option("--max-elements", o.max_elements, "Synthetic: most elements per diagram");
}

std::vector<DiagramDocument> load_documents(const CorpusOptions& o) {
  if (o.synthetic_n > 0) {
    SynthSpec spec;
    spec.n_diagrams = o.synthetic_n;
    spec.min_elements = o.min_elements;
    spec.max_elements = o.max_elements;
    return generate_synthetic_corpus(spec, o.synthetic_seed).documents;
  }
  if (o.root.empty()) {
    throw UsageError("no corpus given: pass --dataset-root (or DIAGRAPH_DATASET_ROOT) or --synthetic");
  }
  std::optional<std::vector<std::string>> subset;
  if (!o.subset_file.empty()) subset = read_subset_list(o.subset_file);
  return load_corpus(build_corpus_index(o.root, subset));
}

Model provide_node_model(const std::vector<DiagramDocument>& docs, Scheme scheme,
                         const std::string& checkpoint, std::uint64_t seed,
                         std::size_t max_epochs) {
  if (!checkpoint.empty()) {
    Model model = load_checkpoint_file(checkpoint);
    if (model.config().task != TaskKind::node) {
      throw UsageError("'" + checkpoint + "' is not a node-classification checkpoint");
    }
    return model;
  }
  std::cerr << "training embedding model for scheme " << to_string(scheme) << "...\n";
  return train_embedding_model(docs, scheme, mix_seed(seed, 0xE5BEDull), {}, max_epochs);
}

TaskData build_data(const std::vector<DiagramDocument>& docs, const TaskSpec& task, Scheme scheme,
                    const std::string& node_checkpoint, std::uint64_t seed,
                    std::size_t max_epochs) {
  if (task.kind == TaskKind::node) return node_task_data(docs, scheme);
  const Model node_model = provide_node_model(docs, scheme, node_checkpoint, seed, max_epochs);
  return graph_task_data(docs, scheme, task.labels, node_model);
}

int cmd_validate(const CorpusOptions& corpus) {
  const std::vector<DiagramDocument> docs = load_documents(corpus);
  std::size_t with_rst = 0;
  std::vector<std::string> errors;
  for (const DiagramDocument& doc : docs) {
    try {
      const TypedGraph a = build_graph(doc, Scheme::a);
      layout_feature_matrix(a);
      node_kind_targets(a, scheme_node_classes(Scheme::a));
      if (doc.rst) {
        with_rst += 1;
        const TypedGraph g = build_graph(doc, Scheme::b_grouping);
        layout_feature_matrix(g);
        build_graph(doc, Scheme::b_grouping_connectivity);
      }
    } catch (const std::exception& e) {
      errors.push_back(doc.raw.diagram_id + ": " + e.what());
    }
  }
  std::cout << "checked " << docs.size() << " diagrams (" << with_rst
            << " with expert annotation)\n";
  if (!errors.empty()) {
    for (const std::string& e : errors) std::cerr << "error: " << e << '\n';
    return 1;
  }
  std::cout << "all diagrams valid\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph-scheme comparison toolkit for school-science diagrams"};
  app.require_subcommand(1);
  int exit_code = 0;

  // --- validate ---
  auto* validate = app.add_subcommand("validate", "Parse a corpus and check every invariant");
  CorpusOptions validate_corpus;
  add_corpus_flags(validate, validate_corpus);
  validate->callback([&]() { exit_code = cmd_validate(validate_corpus); });

  // --- synth ---
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus of canonical files");
  struct {
    std::string out;
    std::size_t n = 100;
    std::uint64_t seed = 7;
    std::vector<std::string> types;
    std::size_t min_elements = 8, max_elements = 20;
  } synth_opt;
  synth->add_option("--out", synth_opt.out, "Output directory")->required();
  synth->add_option("--n", synth_opt.n, "Number of diagrams");
  synth->add_option("--seed", synth_opt.seed, "Generator seed");
  synth->add_option("--types", synth_opt.types, "Diagram types to mix (default: four types)")
      ->delimiter(',');
  synth->add_option("--min-elements", synth_opt.min_elements, "Fewest elements per diagram");
  synth->add_option("--max-elements", synth_opt.max_elements, "Most elements per diagram");
  synth->callback([&]() {
    SynthSpec spec;
    spec.n_diagrams = synth_opt.n;
    spec.min_elements = synth_opt.min_elements;
    spec.max_elements = synth_opt.max_elements;
    if (!synth_opt.types.empty()) {
      spec.type_mix.clear();
      for (const std::string& t : synth_opt.types) spec.type_mix.emplace_back(t, 1.0);
    }
    const SyntheticCorpus corpus = generate_synthetic_corpus(spec, synth_opt.seed);
    write_corpus(corpus.documents, synth_opt.out);
    std::cout << "wrote " << corpus.documents.size() << " diagrams to " << synth_opt.out << '\n';
  });

  // --- convert ---
  auto* convert = app.add_subcommand(
      "convert", "Convert external annotation files into canonical corpus files");
  struct {
    std::string raw_dir, rst_dir, labels_file, out;
  } convert_opt;
  convert->add_option("--raw", convert_opt.raw_dir, "Directory of layout annotation JSON files")
      ->required();
  convert->add_option("--rst", convert_opt.rst_dir,
                      "Directory of expert annotation JSON files (matched by file name)");
  convert->add_option("--labels", convert_opt.labels_file,
                      "JSON object mapping diagram id to semantic label");
  convert->add_option("--out", convert_opt.out, "Output directory")->required();
  convert->callback([&]() {
    namespace fs = std::filesystem;
    json labels = json::object();
    if (!convert_opt.labels_file.empty()) labels = read_json_file(convert_opt.labels_file);
    fs::create_directories(convert_opt.out);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(convert_opt.raw_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") {
        files.push_back(entry.path().string());
      }
    }
    std::sort(files.begin(), files.end());
    std::size_t written = 0;
    for (const std::string& path : files) {
      DiagramDocument doc;
      doc.raw = parse_raw_annotation(read_json_file(path));
      if (!convert_opt.rst_dir.empty()) {
        const fs::path rst_path = fs::path(convert_opt.rst_dir) / fs::path(path).filename();
        if (fs::exists(rst_path)) {
          RstAnnotation rst = parse_rst_annotation(read_json_file(rst_path.string()));
          doc.labels.rst_fine = derive_fine_label(rst);
          if (!rst.coarse_type.empty()) doc.labels.rst_coarse = rst.coarse_type;
          doc.rst = std::move(rst);
        }
      }
      if (labels.contains(doc.raw.diagram_id)) {
        doc.labels.ai2d = labels[doc.raw.diagram_id].get<std::string>();
      }
      const fs::path out_path = fs::path(convert_opt.out) / (doc.raw.diagram_id + ".json");
      std::ofstream out(out_path);
      if (!out) throw ReportError("cannot write '" + out_path.string() + "'");
      out << save_canonical(doc).dump(2) << '\n';
      written += 1;
    }
    std::cout << "converted " << written << " diagrams into " << convert_opt.out << '\n';
  });

  // --- featurize ---
  auto* featurize = app.add_subcommand("featurize", "Dump per-node layout descriptors as CSV");
  CorpusOptions featurize_corpus;
  add_corpus_flags(featurize, featurize_corpus);
  struct {
    std::string scheme = "a";
    std::string out;
  } featurize_opt;
  featurize->add_option("--scheme", featurize_opt.scheme, "Annotation scheme: a, b-g or b-gc");
  featurize->add_option("--out", featurize_opt.out, "Output file (default stdout)");
  featurize->callback([&]() {
    const Scheme scheme = scheme_from_string(featurize_opt.scheme);
    const std::vector<DiagramDocument> docs = load_documents(featurize_corpus);
    std::ofstream file;
    if (!featurize_opt.out.empty()) {
      file.open(featurize_opt.out);
      if (!file) throw ReportError("cannot write '" + featurize_opt.out + "'");
    }
    std::ostream& out = featurize_opt.out.empty() ? std::cout : file;
    out << "diagram_id,node_id,kind,x_centre,y_centre,area_ratio,solidity\n";
    out << std::setprecision(10);
    for (const DiagramDocument& doc : docs) {
      const TypedGraph g = build_graph(doc, scheme);
      const Mat features = layout_feature_matrix(g);
      for (std::size_t i = 0; i < g.n_nodes(); ++i) {
        out << g.diagram_id << ',' << g.nodes[i].node_id << ',' << to_string(g.nodes[i].kind);
        for (std::size_t j = 0; j < 4; ++j) out << ',' << features.at(i, j);
        out << '\n';
      }
    }
  });

  // --- graph ---
  auto* graph_cmd = app.add_subcommand("graph", "Dump one diagram's typed edge list");
  CorpusOptions graph_corpus;
  add_corpus_flags(graph_cmd, graph_corpus);
  struct {
    std::string id;
    std::string scheme = "a";
    bool plain = false;
  } graph_opt;
  graph_cmd->add_option("--id", graph_opt.id, "Diagram id")->required();
  graph_cmd->add_option("--scheme", graph_opt.scheme, "Annotation scheme: a, b-g or b-gc");
  graph_cmd->add_flag("--plain", graph_opt.plain,
                      "Skip finalization (no self-loops, no symmetrization)");
  graph_cmd->callback([&]() {
    const std::vector<DiagramDocument> docs = load_documents(graph_corpus);
    for (const DiagramDocument& doc : docs) {
      if (doc.raw.diagram_id != graph_opt.id) continue;
      const TypedGraph g =
          build_graph(doc, scheme_from_string(graph_opt.scheme), !graph_opt.plain);
      std::cout << dump_edges(g);
      return;
    }
    throw UsageError("diagram '" + graph_opt.id + "' not found in the corpus");
  });

  // --- tune ---
  auto* tune = app.add_subcommand("tune", "Random hyperparameter search for one condition");
  CorpusOptions tune_corpus;
  add_corpus_flags(tune, tune_corpus);
  struct {
    std::string scheme = "a", task = "node", arch = "gcn", out = "best.json", node_model;
    std::size_t budget = 100, max_epochs = 100;
    std::uint64_t seed = 42;
  } tune_opt;
  tune->add_option("--scheme", tune_opt.scheme, "Annotation scheme: a, b-g or b-gc");
  tune->add_option("--task", tune_opt.task, "node, graph-a17, graph-coarse5 or graph-fine12");
  tune->add_option("--arch", tune_opt.arch, "gcn, sgc, gat or sage");
  tune->add_option("--budget", tune_opt.budget, "Number of search trials");
  tune->add_option("--seed", tune_opt.seed, "Search seed");
  tune->add_option("--max-epochs", tune_opt.max_epochs, "Epoch cap per trial");
  tune->add_option("--node-model", tune_opt.node_model,
                   "Checkpoint of the node model that supplies graph-task features");
  tune->add_option("--out", tune_opt.out, "Where to write the best hyperparameters");
  tune->callback([&]() {
    const TaskSpec task = task_from_string(tune_opt.task);
    const Scheme scheme = scheme_from_string(tune_opt.scheme);
    const std::vector<DiagramDocument> docs = load_documents(tune_corpus);
    const TaskData data = build_data(docs, task, scheme, tune_opt.node_model, tune_opt.seed,
                                     tune_opt.max_epochs);
    TrainSettings settings = default_settings(data.task);
    settings.max_epochs = tune_opt.max_epochs;
    const HyperRanges ranges = (data.task == TaskKind::node) ? node_ranges() : graph_ranges();
    const SearchResult result = random_search(
        arch_from_string(tune_opt.arch), data, tune_opt.budget, tune_opt.seed, ranges, settings,
        [&](std::size_t trial, const SearchTrial& t) {
          std::cerr << "trial " << trial << "/" << tune_opt.budget << ": "
                    << (t.failed ? "diverged" : "val macro F1 " + std::to_string(t.val_macro_f1))
                    << '\n';
        });
    ordered_json best;
    best["task"] = tune_opt.task;
    best["scheme"] = tune_opt.scheme;
    best["arch"] = tune_opt.arch;
    best["learning_rate"] = result.best.learning_rate;
    best["batch_size"] = result.best.batch_size;
    best["hidden_size"] = result.best.hidden_size;
    best["l2_penalty"] = result.best.l2_penalty;
    best["val_macro_f1"] = result.best_val_macro_f1;
    best["trial"] = result.best_trial;
    best["budget"] = tune_opt.budget;
    best["seed"] = tune_opt.seed;
    std::ofstream out(tune_opt.out);
    if (!out) throw ReportError("cannot write '" + tune_opt.out + "'");
    out << best.dump(2) << '\n';
    std::cout << "best trial " << result.best_trial << " val macro F1 " << result.best_val_macro_f1
              << " -> " << tune_opt.out << '\n';
  });

  // --- train ---
  auto* train = app.add_subcommand("train", "Repeated final training for one condition");
  CorpusOptions train_corpus;
  add_corpus_flags(train, train_corpus);
  struct {
    std::string best, scheme = "a", task = "node", arch = "gcn", out = "runs.csv", node_model,
                save_model;
    double lr = 0.001, l2 = 1e-4;
    std::size_t batch = 8, hidden = 10, runs = 20, max_epochs = 100;
    std::uint64_t seed = 42;
  } train_opt;
  train->add_option("--best", train_opt.best, "best.json from tune (overrides the hp flags)");
  train->add_option("--scheme", train_opt.scheme, "Annotation scheme: a, b-g or b-gc");
  train->add_option("--task", train_opt.task, "node, graph-a17, graph-coarse5 or graph-fine12");
  train->add_option("--arch", train_opt.arch, "gcn, sgc, gat or sage");
  train->add_option("--lr", train_opt.lr, "Learning rate");
  train->add_option("--batch", train_opt.batch, "Batch size (diagrams)");
  train->add_option("--hidden", train_opt.hidden, "Hidden width");
  train->add_option("--l2", train_opt.l2, "L2 penalty");
  train->add_option("--runs", train_opt.runs, "Number of repeated runs");
  train->add_option("--seed", train_opt.seed, "Master seed");
  train->add_option("--max-epochs", train_opt.max_epochs, "Epoch cap per run");
  train->add_option("--node-model", train_opt.node_model,
                    "Checkpoint of the node model that supplies graph-task features");
  train->add_option("--save-model", train_opt.save_model,
                    "Also train once with the master seed and save the checkpoint here");
  train->add_option("--out", train_opt.out, "Where to write the per-run metrics CSV");
  train->callback([&]() {
    Hyperparams hp{train_opt.lr, train_opt.batch, train_opt.hidden, train_opt.l2};
    if (!train_opt.best.empty()) {
      const json best = read_json_file(train_opt.best);
      train_opt.task = best.value("task", train_opt.task);
      train_opt.scheme = best.value("scheme", train_opt.scheme);
      train_opt.arch = best.value("arch", train_opt.arch);
      hp.learning_rate = best.value("learning_rate", hp.learning_rate);
      hp.batch_size = best.value("batch_size", hp.batch_size);
      hp.hidden_size = best.value("hidden_size", hp.hidden_size);
      hp.l2_penalty = best.value("l2_penalty", hp.l2_penalty);
    }
    const TaskSpec task = task_from_string(train_opt.task);
    const Scheme scheme = scheme_from_string(train_opt.scheme);
    const Arch arch = arch_from_string(train_opt.arch);
    const std::vector<DiagramDocument> docs = load_documents(train_corpus);
    const TaskData data = build_data(docs, task, scheme, train_opt.node_model, train_opt.seed,
                                     train_opt.max_epochs);
    TrainSettings settings = default_settings(data.task);
    settings.max_epochs = train_opt.max_epochs;
    const std::vector<RunResult> runs = run_protocol(
        arch, data, hp, train_opt.runs, train_opt.seed, settings, [&](const RunResult& r) {
          std::cerr << "run " << r.run << "/" << train_opt.runs << ": accuracy " << r.accuracy
                    << " macro F1 " << r.macro_f1 << " (" << r.epochs << " epochs)\n";
        });
    write_runs_csv_file(runs, train_opt.out);
    double acc = 0.0, f1 = 0.0;
    for (const RunResult& r : runs) {
      acc += r.accuracy;
      f1 += r.macro_f1;
    }
    std::cout << "mean accuracy " << acc / static_cast<double>(runs.size()) << ", mean macro F1 "
              << f1 / static_cast<double>(runs.size()) << " over " << runs.size() << " runs -> "
              << train_opt.out << '\n';
    if (!train_opt.save_model.empty()) {
      const std::uint64_t run_seed = mix_seed(train_opt.seed, 0);
      const Splits splits = make_splits(data.size(), final_split_spec(data.size()), run_seed);
      Model model(make_config(arch, data.task, data.in_dim(), hp.hidden_size, data.n_classes()),
                  mix_seed(run_seed, 1));
      model.scheme_tag = data.scheme_tag;
      train_model(model, data, splits, hp, settings, run_seed);
      save_checkpoint_file(model, train_opt.save_model);
      std::cout << "saved model checkpoint to " << train_opt.save_model << '\n';
    }
  });

  // --- baseline ---
  auto* baseline = app.add_subcommand("baseline", "Dummy or random-forest baseline runs");
  CorpusOptions baseline_corpus;
  add_corpus_flags(baseline, baseline_corpus);
  struct {
    std::string model = "rf", scheme = "a", task = "node", out = "runs.csv", node_model;
    std::size_t runs = 20, max_epochs = 100;
    std::uint64_t seed = 42;
  } baseline_opt;
  baseline->add_option("--model", baseline_opt.model, "dummy or rf");
  baseline->add_option("--scheme", baseline_opt.scheme, "Annotation scheme: a, b-g or b-gc");
  baseline->add_option("--task", baseline_opt.task,
                       "node, graph-a17, graph-coarse5 or graph-fine12");
  baseline->add_option("--runs", baseline_opt.runs, "Number of repeated runs");
  baseline->add_option("--seed", baseline_opt.seed, "Master seed");
  baseline->add_option("--node-model", baseline_opt.node_model,
                       "Checkpoint of the node model that supplies graph-task features");
  baseline->add_option("--out", baseline_opt.out, "Where to write the per-run metrics CSV");
  baseline->callback([&]() {
    const TaskSpec task = task_from_string(baseline_opt.task);
    const Scheme scheme = scheme_from_string(baseline_opt.scheme);
    const std::vector<DiagramDocument> docs = load_documents(baseline_corpus);
    const TaskData data = build_data(docs, task, scheme, baseline_opt.node_model,
                                     baseline_opt.seed, baseline_opt.max_epochs);
    const std::vector<RunResult> runs =
        run_baseline_condition(data, baseline_opt.model, baseline_opt.runs, baseline_opt.seed);
    write_runs_csv_file(runs, baseline_opt.out);
    double acc = 0.0;
    for (const RunResult& r : runs) acc += r.accuracy;
    std::cout << "mean accuracy " << acc / static_cast<double>(runs.size()) << " over "
              << runs.size() << " runs -> " << baseline_opt.out << '\n';
  });

  // --- compare ---
  auto* compare = app.add_subcommand("compare", "Rank-based comparison of two run files");
  struct {
    std::string a, b;
    double alpha = 0.05;
  } compare_opt;
  compare->add_option("runs_a", compare_opt.a, "First runs.csv")->required();
  compare->add_option("runs_b", compare_opt.b, "Second runs.csv")->required();
  compare->add_option("--alpha", compare_opt.alpha, "Significance level");
  compare->callback([&]() {
    const std::vector<RunResult> a = read_runs_csv_file(compare_opt.a);
    const std::vector<RunResult> b = read_runs_csv_file(compare_opt.b);
    ordered_json out;
    out["runs_a"] = compare_opt.a;
    out["runs_b"] = compare_opt.b;
    out["alpha"] = compare_opt.alpha;
    ordered_json metrics = ordered_json::array();
    for (const MetricComparison& c : compare_runs(a, b, compare_opt.alpha)) {
      ordered_json m;
      m["metric"] = c.metric;
      m["mean_a"] = c.mean_a;
      m["mean_b"] = c.mean_b;
      m["u"] = c.u;
      m["p"] = c.p;
      m["significant"] = c.significant;
      metrics.push_back(std::move(m));
    }
    out["metrics"] = std::move(metrics);
    std::cout << out.dump(2) << '\n';
  });

  // --- report ---
  auto* report = app.add_subcommand("report", "Render a condition table from run files");
  struct {
    std::string runs_dir, task = "node", title, out = "report.md";
    std::vector<std::string> archs = {"gat", "gcn", "sage", "sgc"};
    std::vector<std::string> graphs = {"a", "b-g", "b-gc"};
    double alpha = 0.05;
  } report_opt;
  report->add_option("--runs-dir", report_opt.runs_dir, "Directory of <task>__<scheme>__<model>.csv files")
      ->required();
  report->add_option("--task", report_opt.task, "Task whose run files to collect");
  report->add_option("--archs", report_opt.archs, "Model columns")->delimiter(',');
  report->add_option("--graphs", report_opt.graphs, "Graph variant columns")->delimiter(',');
  report->add_option("--title", report_opt.title, "Table title");
  report->add_option("--alpha", report_opt.alpha, "Significance level");
  report->add_option("--out", report_opt.out, "Markdown output path (CSV written alongside)");
  report->callback([&]() {
    ReportSpec spec;
    spec.title = report_opt.title.empty() ? ("Task " + report_opt.task) : report_opt.title;
    spec.arch_names = report_opt.archs;
    spec.graph_names = report_opt.graphs;
    spec.alpha = report_opt.alpha;
    for (const std::string& arch : report_opt.archs) {
      std::vector<std::vector<RunResult>> row;
      for (const std::string& graph : report_opt.graphs) {
        const std::string path =
            report_opt.runs_dir + "/" + report_opt.task + "__" + graph + "__" + arch + ".csv";
        row.push_back(read_runs_csv_file(path));
      }
      spec.runs.push_back(std::move(row));
    }
    const RenderedReport rendered = render_report(spec);
    std::ofstream md(report_opt.out);
    if (!md) throw ReportError("cannot write '" + report_opt.out + "'");
    md << rendered.markdown;
    std::filesystem::path csv_path(report_opt.out);
    csv_path.replace_extension(".csv");
    std::ofstream csv(csv_path);
    csv << rendered.csv;
    std::cout << "wrote " << report_opt.out << " and " << csv_path.string() << '\n';
  });

  // --- reproduce ---
  auto* reproduce = app.add_subcommand("reproduce", "Run the full experiment grid");
  CorpusOptions reproduce_corpus;
  add_corpus_flags(reproduce, reproduce_corpus);
  struct {
    std::string manifest, out = "results";
    std::size_t budget = 0, runs = 0, max_epochs = 0, jobs = 1;
    std::uint64_t seed = 42;
    bool small = false;
    bool quiet = false;
  } reproduce_opt;
  reproduce->add_option("--manifest", reproduce_opt.manifest, "Experiment manifest JSON");
  reproduce->add_option("--out", reproduce_opt.out, "Output directory");
  reproduce->add_option("--budget", reproduce_opt.budget, "Override: search trials per condition");
  reproduce->add_option("--runs", reproduce_opt.runs, "Override: repeated runs per condition");
  reproduce->add_option("--max-epochs", reproduce_opt.max_epochs, "Override: epoch cap");
  reproduce->add_option("--seed", reproduce_opt.seed, "Master seed");
  reproduce->add_option("--jobs", reproduce_opt.jobs, "Parallel conditions");
  reproduce->add_flag("--small", reproduce_opt.small,
                      "Tiny smoke-test version of the grid (overridable by the other flags)");
  reproduce->add_flag("--quiet", reproduce_opt.quiet, "No progress output");
  reproduce->callback([&]() {
    ExperimentManifest manifest;
    if (!reproduce_opt.manifest.empty()) {
      manifest = manifest_from_json(read_json_file(reproduce_opt.manifest));
    }
    manifest.seed = reproduce_opt.seed;
    if (!reproduce_corpus.root.empty()) manifest.dataset_root = reproduce_corpus.root;
    if (!reproduce_corpus.subset_file.empty()) manifest.subset_file = reproduce_corpus.subset_file;
    if (reproduce_corpus.synthetic_n > 0) {
      manifest.dataset_root.clear();
      manifest.synth.n_diagrams = reproduce_corpus.synthetic_n;
      manifest.synth.min_elements = reproduce_corpus.min_elements;
      manifest.synth.max_elements = reproduce_corpus.max_elements;
    }
    if (reproduce_opt.small) {
      manifest.budget = 2;
      manifest.runs = 3;
      manifest.max_epochs = 20;
      if (manifest.dataset_root.empty() && reproduce_corpus.synthetic_n == 0) {
        manifest.synth.n_diagrams = 60;
      }
    }
    if (reproduce_opt.budget > 0) manifest.budget = reproduce_opt.budget;
    if (reproduce_opt.runs > 0) manifest.runs = reproduce_opt.runs;
    if (reproduce_opt.max_epochs > 0) manifest.max_epochs = reproduce_opt.max_epochs;
    if (manifest.dataset_root.empty() && manifest.synth.n_diagrams == 0) {
      manifest.synth.n_diagrams = 200;
    }
    run_experiment(manifest, reproduce_opt.out, reproduce_opt.jobs,
                   reproduce_opt.quiet
                       ? std::function<void(const std::string&)>{}
                       : [](const std::string& msg) { std::cerr << msg << '\n'; });
    std::cout << "experiment complete; results under " << reproduce_opt.out << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return exit_code;
}
