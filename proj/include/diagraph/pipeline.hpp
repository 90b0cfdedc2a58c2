#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "diagraph/annotation.hpp"
#include "diagraph/errors.hpp"
#include "diagraph/featurize.hpp"
#include "diagraph/gnn.hpp"
#include "diagraph/graph.hpp"
#include "diagraph/training.hpp"

namespace diagraph {

enum class LabelSpace { semantic, coarse, fine };

struct TaskSpec {
  TaskKind kind = TaskKind::node;
  LabelSpace labels = LabelSpace::semantic;  // graph tasks only
};

inline TaskSpec task_from_string(const std::string& s) {
  if (s == "node") return {TaskKind::node, LabelSpace::semantic};
  if (s == "graph-a17") return {TaskKind::graph, LabelSpace::semantic};
  if (s == "graph-coarse5") return {TaskKind::graph, LabelSpace::coarse};
  if (s == "graph-fine12") return {TaskKind::graph, LabelSpace::fine};
  throw UsageError("unknown task '" + s +
                   "' (expected node, graph-a17, graph-coarse5 or graph-fine12)");
}

inline std::string to_string(const TaskSpec& spec) {
  if (spec.kind == TaskKind::node) return "node";
  switch (spec.labels) {
    case LabelSpace::semantic: return "graph-a17";
    case LabelSpace::coarse: return "graph-coarse5";
    case LabelSpace::fine: return "graph-fine12";
  }
  return "?";
}

inline const std::optional<std::string>& label_of(const DiagramDocument& doc, LabelSpace space) {
  switch (space) {
    case LabelSpace::semantic: return doc.labels.ai2d;
    case LabelSpace::coarse: return doc.labels.rst_coarse;
    case LabelSpace::fine: return doc.labels.rst_fine;
  }
  return doc.labels.ai2d;
}

inline ModelGraph to_model_graph(const TypedGraph& g) {
  if (!g.finalized) throw UsageError("diagram '" + g.diagram_id + "': graph is not finalized");
  ModelGraph mg;
  mg.n_nodes = g.n_nodes();
  mg.edges = adjacency_pairs(g);
  mg.features = layout_feature_matrix(g);
  return mg;
}

// Node-kind classification data: 4-d layout features, one class per kind.
inline TaskData node_task_data(const std::vector<DiagramDocument>& docs, Scheme scheme) {
  const std::vector<ElementKind> classes = scheme_node_classes(scheme);
  TaskData data;
  data.task = TaskKind::node;
  data.class_names = class_names(classes);
  data.scheme_tag = to_string(scheme);
  for (const DiagramDocument& doc : docs) {
    const TypedGraph g = build_graph(doc, scheme);
    ModelGraph mg = to_model_graph(g);
    mg.node_targets = node_kind_targets(g, classes);
    data.graphs.push_back(std::move(mg));
    data.diagram_ids.push_back(doc.raw.diagram_id);
  }
  return data;
}

// Diagram classification data: node features are the class-probability rows
// of a trained node model, targets come from the chosen label space.
inline TaskData graph_task_data(const std::vector<DiagramDocument>& docs, Scheme scheme,
                                LabelSpace space, const Model& node_model) {
  std::set<std::string> vocab;
  for (const DiagramDocument& doc : docs) {
    const auto& label = label_of(doc, space);
    if (!label) {
      throw LabelError("diagram '" + doc.raw.diagram_id + "' has no label for this task");
    }
    vocab.insert(*label);
  }
  TaskData data;
  data.task = TaskKind::graph;
  data.class_names.assign(vocab.begin(), vocab.end());
  data.scheme_tag = to_string(scheme);

  std::map<std::string, int> index;
  for (std::size_t i = 0; i < data.class_names.size(); ++i) {
    index[data.class_names[i]] = static_cast<int>(i);
  }
  for (const DiagramDocument& doc : docs) {
    const TypedGraph g = build_graph(doc, scheme);
    ModelGraph mg = to_model_graph(g);
    mg.features = extract_node_embeddings(node_model, mg, data.scheme_tag);
    mg.graph_target = index[*label_of(doc, space)];
    data.graphs.push_back(std::move(mg));
    data.diagram_ids.push_back(doc.raw.diagram_id);
  }
  return data;
}

// Trains the node model whose outputs feed the graph-level tasks: the LSTM
// aggregation network on the node task, fixed mid-range hyperparameters.
inline Model train_embedding_model(const std::vector<DiagramDocument>& docs, Scheme scheme,
                                   std::uint64_t seed, const Hyperparams& hp = {0.005, 8, 20, 1e-5},
                                   std::size_t max_epochs = 100) {
  const TaskData data = node_task_data(docs, scheme);
  Model model(make_config(Arch::sage, TaskKind::node, data.in_dim(), hp.hidden_size,
                          data.n_classes()),
              mix_seed(seed, 1));
  model.scheme_tag = data.scheme_tag;
  TrainSettings settings = default_settings(TaskKind::node);
  settings.max_epochs = max_epochs;
  const Splits splits = make_splits(data.size(), final_split_spec(data.size()), seed);
  train_model(model, data, splits, hp, settings, seed);
  return model;
}

}  // namespace diagraph
