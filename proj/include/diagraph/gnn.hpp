#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "diagraph/errors.hpp"
#include "diagraph/rng.hpp"
#include "diagraph/tensor.hpp"

namespace diagraph {

enum class Arch { gcn, sgc, gat, sage };
enum class TaskKind { node, graph };

inline const char* to_string(Arch a) {
  switch (a) {
    case Arch::gcn: return "gcn";
    case Arch::sgc: return "sgc";
    case Arch::gat: return "gat";
    case Arch::sage: return "sage";
  }
  return "?";
}

inline Arch arch_from_string(const std::string& s) {
  if (s == "gcn") return Arch::gcn;
  if (s == "sgc") return Arch::sgc;
  if (s == "gat") return Arch::gat;
  if (s == "sage") return Arch::sage;
  throw UsageError("unknown architecture '" + s + "' (expected gcn, sgc, gat or sage)");
}

struct ModelConfig {
  Arch arch = Arch::gcn;
  TaskKind task = TaskKind::node;
  std::size_t in_dim = 4;
  std::size_t hidden_dim = 10;
  std::size_t out_dim = 5;
  std::size_t heads = 2;       // attention heads
  std::size_t sgc_hops = 2;    // propagation steps of the linear model
  double leaky_slope = 0.2;
};

// One diagram prepared for the models: unique directed edges including
// one self-loop per node, plus features and targets.
struct ModelGraph {
  std::size_t n_nodes = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  Mat features;
  std::vector<int> node_targets;
  int graph_target = -1;
};

struct GraphBatch {
  Mat features;  // N x in_dim, block order follows the input graphs
  std::vector<std::size_t> edge_src, edge_dst;
  std::vector<std::size_t> membership;  // node -> graph index
  std::size_t n_graphs = 0;
  std::vector<int> node_targets;
  std::vector<int> graph_targets;
  std::shared_ptr<const SparseMatrix> norm_adj;
  std::vector<std::vector<std::size_t>> neighbors;  // self-loops excluded, ascending

  std::size_t n_nodes() const { return features.rows; }
};

// Symmetric degree-normalized adjacency over unique directed pairs. Every
// node must carry its self-loop; entry (dst, src) = 1/sqrt(d_dst * d_src).
inline SparseMatrix normalized_adjacency(const std::vector<std::size_t>& edge_src,
                                         const std::vector<std::size_t>& edge_dst,
                                         std::size_t n_nodes) {
  if (edge_src.size() != edge_dst.size()) throw ShapeError("edge arrays differ in length");
  std::vector<double> degree(n_nodes, 0.0);
  std::vector<bool> has_loop(n_nodes, false);
  for (std::size_t e = 0; e < edge_src.size(); ++e) {
    if (edge_src[e] >= n_nodes || edge_dst[e] >= n_nodes) {
      throw IndexError("edge endpoint out of range");
    }
    degree[edge_dst[e]] += 1.0;
    if (edge_src[e] == edge_dst[e]) has_loop[edge_src[e]] = true;
  }
  for (std::size_t v = 0; v < n_nodes; ++v) {
    if (!has_loop[v]) {
      throw UsageError("node " + std::to_string(v) + " is missing its self-loop");
    }
  }
  SparseMatrix s;
  s.rows = n_nodes;
  s.cols = n_nodes;
  for (std::size_t e = 0; e < edge_src.size(); ++e) {
    s.add(edge_dst[e], edge_src[e],
          1.0 / std::sqrt(degree[edge_dst[e]] * degree[edge_src[e]]));
  }
  return s;
}

inline GraphBatch make_batch(const std::vector<const ModelGraph*>& graphs) {
  if (graphs.empty()) throw UsageError("cannot batch zero graphs");
  std::size_t total_nodes = 0, total_edges = 0;
  const std::size_t dim = graphs[0]->features.cols;
  for (const ModelGraph* g : graphs) {
    if (g->features.rows != g->n_nodes || g->features.cols != dim) {
      throw ShapeError("graph feature matrix is " + g->features.shape_str() + ", expected " +
                       std::to_string(g->n_nodes) + "x" + std::to_string(dim));
    }
    total_nodes += g->n_nodes;
    total_edges += g->edges.size();
  }

  GraphBatch b;
  b.features = Mat(total_nodes, dim);
  b.edge_src.reserve(total_edges);
  b.edge_dst.reserve(total_edges);
  b.membership.reserve(total_nodes);
  b.n_graphs = graphs.size();
  b.neighbors.resize(total_nodes);

  std::size_t offset = 0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const ModelGraph& g = *graphs[gi];
    for (std::size_t i = 0; i < g.n_nodes; ++i) {
      for (std::size_t j = 0; j < dim; ++j) b.features.at(offset + i, j) = g.features.at(i, j);
      b.membership.push_back(gi);
    }
    for (const auto& [src, dst] : g.edges) {
      if (src >= g.n_nodes || dst >= g.n_nodes) {
        throw IndexError("edge endpoint out of range in batched graph");
      }
      b.edge_src.push_back(offset + src);
      b.edge_dst.push_back(offset + dst);
      if (src != dst) b.neighbors[offset + dst].push_back(offset + src);
    }
    if (!g.node_targets.empty()) {
      if (g.node_targets.size() != g.n_nodes) throw ShapeError("node target count mismatch");
      b.node_targets.insert(b.node_targets.end(), g.node_targets.begin(), g.node_targets.end());
    }
    if (g.graph_target >= 0) b.graph_targets.push_back(g.graph_target);
    offset += g.n_nodes;
  }
  for (auto& list : b.neighbors) std::sort(list.begin(), list.end());
  b.norm_adj = std::make_shared<const SparseMatrix>(
      normalized_adjacency(b.edge_src, b.edge_dst, total_nodes));
  return b;
}

inline GraphBatch make_batch(const std::vector<ModelGraph>& graphs) {
  std::vector<const ModelGraph*> ptrs;
  ptrs.reserve(graphs.size());
  for (const ModelGraph& g : graphs) ptrs.push_back(&g);
  return make_batch(ptrs);
}

// --- single layers -----------------------------------------------------

// relu(S H W + b)
inline Var gcn_layer(Tape& t, std::shared_ptr<const SparseMatrix> s, Var h, Var w, Var b) {
  return t.relu(t.add_row(t.matmul(t.spmm(std::move(s), h), w), b));
}

struct GatHeadParams {
  Var w;      // in x hidden
  Var a_src;  // hidden x 1
  Var a_dst;  // hidden x 1
};

// One multi-head attention layer; heads concatenated, bias added, no
// activation (the caller applies it).
inline Var gat_layer(Tape& t, Var h, const GraphBatch& batch,
                     const std::vector<GatHeadParams>& heads, Var bias, double slope) {
  std::vector<Var> head_outputs;
  for (const GatHeadParams& head : heads) {
    Var z = t.matmul(h, head.w);
    Var s_src = t.matmul(z, head.a_src);
    Var s_dst = t.matmul(z, head.a_dst);
    Var scores = t.leaky_relu(
        t.add(t.gather_rows(s_dst, batch.edge_dst), t.gather_rows(s_src, batch.edge_src)), slope);
    Var alpha = t.segment_softmax(scores, batch.edge_dst);
    Var messages = t.mul_col(t.gather_rows(z, batch.edge_src), alpha);
    head_outputs.push_back(t.scatter_sum_rows(messages, batch.edge_dst, batch.n_nodes()));
  }
  Var concat = head_outputs[0];
  for (std::size_t i = 1; i < head_outputs.size(); ++i) {
    concat = t.concat_cols(concat, head_outputs[i]);
  }
  return t.add_row(concat, bias);
}

enum class NeighborOrder { seeded, canonical };

namespace detail {

// Per-node neighbor sequences for the LSTM aggregator. Seeded ordering is a
// fresh deterministic shuffle; canonical ordering sorts by the current
// embedding rows, which is invariant under node relabeling.
inline std::vector<std::vector<std::size_t>> neighbor_orders(const GraphBatch& batch, const Mat& h,
                                                             NeighborOrder order,
                                                             std::uint64_t perm_seed,
                                                             std::uint64_t layer_salt) {
  std::vector<std::vector<std::size_t>> out = batch.neighbors;
  for (std::size_t v = 0; v < out.size(); ++v) {
    if (out[v].size() < 2) continue;
    if (order == NeighborOrder::seeded) {
      Rng rng(mix_seed(perm_seed, layer_salt * 0x9e3779b9ULL + v));
      rng.shuffle(out[v]);
    } else {
      std::sort(out[v].begin(), out[v].end(), [&](std::size_t x, std::size_t y) {
        for (std::size_t j = 0; j < h.cols; ++j) {
          if (h.at(x, j) != h.at(y, j)) return h.at(x, j) < h.at(y, j);
        }
        return false;  // identical rows are interchangeable
      });
    }
  }
  return out;
}

}  // namespace detail

struct SageLayerParams {
  Var w_lstm;   // 2d x 4d
  Var b_lstm;   // 1 x 4d
  Var w_self;   // d x out
  Var w_neigh;  // d x out
  Var bias;     // 1 x out
};

// LSTM summary of each node's neighbor sequence. Nodes are packed by
// descending sequence length so each timestep is one batched cell update;
// nodes without neighbors keep the zero state.
inline Var sage_neighbor_hidden(Tape& t, Var h, const std::vector<std::vector<std::size_t>>& seqs,
                                Var w_lstm, Var b_lstm) {
  const std::size_t n = t.val(h).rows;
  const std::size_t d = t.val(h).cols;

  std::vector<std::size_t> node_order(n);
  std::iota(node_order.begin(), node_order.end(), 0);
  std::stable_sort(node_order.begin(), node_order.end(), [&](std::size_t a, std::size_t b) {
    return seqs[a].size() > seqs[b].size();
  });
  const std::size_t max_len = seqs[node_order[0]].size();
  if (max_len == 0) return t.constant(Mat(n, d));

  Var hidden = t.constant(Mat(n, d));
  Var cell = t.constant(Mat(n, d));
  for (std::size_t step = 0; step < max_len; ++step) {
    std::size_t active = 0;
    while (active < n && seqs[node_order[active]].size() > step) ++active;
    std::vector<std::size_t> inputs(active);
    for (std::size_t k = 0; k < active; ++k) inputs[k] = seqs[node_order[k]][step];
    Var x = t.gather_rows(h, std::move(inputs));
    Var h_act = (active == n) ? hidden : t.slice_rows(hidden, 0, active);
    Var c_act = (active == n) ? cell : t.slice_rows(cell, 0, active);
    const LstmState next = lstm_cell(t, x, h_act, c_act, w_lstm, b_lstm);
    hidden = (active == n) ? next.h : t.concat_rows({next.h, t.slice_rows(hidden, active, n)});
    cell = (active == n) ? next.c : t.concat_rows({next.c, t.slice_rows(cell, active, n)});
  }
  std::vector<std::size_t> unsort(n);
  for (std::size_t k = 0; k < n; ++k) unsort[node_order[k]] = k;
  return t.gather_rows(hidden, std::move(unsort));
}

// W_self h_v + W_neigh h_N(v) + b, no activation.
inline Var sage_layer(Tape& t, Var h, const std::vector<std::vector<std::size_t>>& seqs,
                      const SageLayerParams& p) {
  Var h_n = sage_neighbor_hidden(t, h, seqs, p.w_lstm, p.b_lstm);
  return t.add_row(t.add(t.matmul(h, p.w_self), t.matmul(h_n, p.w_neigh)), p.bias);
}

inline Mat segment_mean_plain(const Mat& m, const std::vector<std::size_t>& membership,
                              std::size_t n_out) {
  Mat out(n_out, m.cols);
  std::vector<double> count(n_out, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    count[membership[i]] += 1.0;
    for (std::size_t j = 0; j < m.cols; ++j) out.at(membership[i], j) += m.at(i, j);
  }
  for (std::size_t g = 0; g < n_out; ++g) {
    if (count[g] == 0.0) throw UsageError("segment " + std::to_string(g) + " is empty");
    for (std::size_t j = 0; j < m.cols; ++j) out.at(g, j) /= count[g];
  }
  return out;
}

// --- assembled networks -------------------------------------------------

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    if (cfg.in_dim == 0 || cfg.out_dim == 0 || cfg.hidden_dim == 0) {
      throw SpecError("model dimensions must be positive");
    }
    if (cfg.arch == Arch::gat && cfg.heads == 0) throw SpecError("attention needs at least one head");
    if (cfg.arch == Arch::sgc && cfg.sgc_hops == 0) {
      throw SpecError("linear propagation model needs at least one hop");
    }
    Rng rng(init_seed);
    const auto weight = [&](const std::string& name, std::size_t r, std::size_t c) {
      params_.emplace_back(name, glorot_uniform(r, c, rng));
    };
    const auto bias = [&](const std::string& name, std::size_t c) {
      params_.emplace_back(name, Mat(1, c));
    };
    switch (cfg.arch) {
      case Arch::gcn:
        weight("w1", cfg.in_dim, cfg.hidden_dim);
        bias("b1", cfg.hidden_dim);
        weight("w2", cfg.hidden_dim, cfg.hidden_dim);
        bias("b2", cfg.hidden_dim);
        weight("dense_w", cfg.hidden_dim, cfg.out_dim);
        bias("dense_b", cfg.out_dim);
        break;
      case Arch::sgc:
        weight("w", cfg.in_dim, cfg.out_dim);
        bias("b", cfg.out_dim);
        break;
      case Arch::gat: {
        for (std::size_t layer = 1; layer <= 2; ++layer) {
          const std::size_t in = (layer == 1) ? cfg.in_dim : cfg.heads * cfg.hidden_dim;
          for (std::size_t h = 0; h < cfg.heads; ++h) {
            const std::string tag = std::to_string(layer) + "h" + std::to_string(h);
            weight("w" + tag, in, cfg.hidden_dim);
            weight("asrc" + tag, cfg.hidden_dim, 1);
            weight("adst" + tag, cfg.hidden_dim, 1);
          }
          bias("b" + std::to_string(layer), cfg.heads * cfg.hidden_dim);
        }
        weight("dense_w", cfg.heads * cfg.hidden_dim, cfg.out_dim);
        bias("dense_b", cfg.out_dim);
        break;
      }
      case Arch::sage: {
        for (std::size_t layer = 1; layer <= 2; ++layer) {
          const std::size_t in = (layer == 1) ? cfg.in_dim : cfg.hidden_dim;
          const std::string tag = std::to_string(layer);
          weight("lstm_w" + tag, 2 * in, 4 * in);
          bias("lstm_b" + tag, 4 * in);
          weight("self_w" + tag, in, cfg.hidden_dim);
          weight("neigh_w" + tag, in, cfg.hidden_dim);
          bias("b" + tag, cfg.hidden_dim);
        }
        weight("dense_w", cfg.hidden_dim, cfg.out_dim);
        bias("dense_b", cfg.out_dim);
        break;
      }
    }
  }

  const ModelConfig& config() const { return cfg_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const Parameter& p : params_) total += p.value.size();
    return total;
  }

  // Builds the forward pass on `tape`. With `with_grad`, parameters enter as
  // leaves and `param_vars` lines up with parameters() for gradient pulls.
  Var forward(Tape& t, const GraphBatch& batch, bool with_grad, std::vector<Var>* param_vars,
              std::uint64_t perm_seed = 0, NeighborOrder order = NeighborOrder::seeded) const {
    if (batch.features.cols != cfg_.in_dim) {
      throw ShapeError("batch features are " + batch.features.shape_str() + ", model expects " +
                       std::to_string(cfg_.in_dim) + " columns");
    }
    std::vector<Var> vars;
    vars.reserve(params_.size());
    for (const Parameter& p : params_) {
      vars.push_back(with_grad ? t.leaf(p.value) : t.constant(p.value));
    }
    if (param_vars) *param_vars = vars;
    std::size_t next = 0;
    const auto take = [&]() { return vars[next++]; };

    Var logits{};
    switch (cfg_.arch) {
      case Arch::gcn: {
        Var h0 = t.constant(batch.features);
        Var w1 = take(), b1 = take(), w2 = take(), b2 = take(), wd = take(), bd = take();
        Var h1 = gcn_layer(t, batch.norm_adj, h0, w1, b1);
        Var h2 = gcn_layer(t, batch.norm_adj, h1, w2, b2);
        logits = t.add_row(t.matmul(readout(t, h2, batch), wd), bd);
        break;
      }
      case Arch::sgc: {
        Mat propagated = batch.features;
        for (std::size_t hop = 0; hop < cfg_.sgc_hops; ++hop) {
          propagated = spmm_plain(*batch.norm_adj, propagated);
        }
        if (cfg_.task == TaskKind::graph) {
          propagated = segment_mean_plain(propagated, batch.membership, batch.n_graphs);
        }
        Var w = take(), b = take();
        logits = t.add_row(t.matmul(t.constant(std::move(propagated)), w), b);
        break;
      }
      case Arch::gat: {
        Var h = t.constant(batch.features);
        for (std::size_t layer = 1; layer <= 2; ++layer) {
          std::vector<GatHeadParams> heads;
          for (std::size_t i = 0; i < cfg_.heads; ++i) {
            GatHeadParams p;
            p.w = take();
            p.a_src = take();
            p.a_dst = take();
            heads.push_back(p);
          }
          Var b = take();
          h = t.relu(gat_layer(t, h, batch, heads, b, cfg_.leaky_slope));
        }
        Var wd = take(), bd = take();
        logits = t.add_row(t.matmul(readout(t, h, batch), wd), bd);
        break;
      }
      case Arch::sage: {
        Var h = t.constant(batch.features);
        for (std::size_t layer = 1; layer <= 2; ++layer) {
          SageLayerParams p;
          p.w_lstm = take();
          p.b_lstm = take();
          p.w_self = take();
          p.w_neigh = take();
          p.bias = take();
          const auto seqs = detail::neighbor_orders(batch, t.val(h), order, perm_seed, layer);
          h = t.relu(sage_layer(t, h, seqs, p));
        }
        Var wd = take(), bd = take();
        logits = t.add_row(t.matmul(readout(t, h, batch), wd), bd);
        break;
      }
    }
    return logits;
  }

  Mat logits(const GraphBatch& batch, std::uint64_t perm_seed = 0,
             NeighborOrder order = NeighborOrder::seeded) const {
    Tape t;
    return t.val(forward(t, batch, false, nullptr, perm_seed, order));
  }

  Mat probabilities(const GraphBatch& batch, std::uint64_t perm_seed = 0,
                    NeighborOrder order = NeighborOrder::seeded) const {
    Tape t;
    Var l = forward(t, batch, false, nullptr, perm_seed, order);
    return t.val(t.softmax_rows(l));
  }

  std::vector<int> predict(const GraphBatch& batch, std::uint64_t perm_seed = 0) const {
    const Mat l = logits(batch, perm_seed);
    std::vector<int> out(l.rows, 0);
    for (std::size_t i = 0; i < l.rows; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < l.cols; ++j) {
        if (l.at(i, j) > l.at(i, best)) best = j;
      }
      out[i] = static_cast<int>(best);
    }
    return out;
  }

  // Provenance tag for embedding reuse checks (annotation scheme name).
  std::string scheme_tag;

 private:
  Var readout(Tape& t, Var h, const GraphBatch& batch) const {
    if (cfg_.task == TaskKind::node) return h;
    return t.segment_mean_rows(h, batch.membership, batch.n_graphs);
  }

  ModelConfig cfg_;
  std::vector<Parameter> params_;
};

// --- checkpoints ----------------------------------------------------------
//
// Versioned text format:
//   diagraph-ckpt v1
//   arch <name>  task <node|graph>  dims <in> <hidden> <out>
//   heads <n>  hops <n>  slope <x>  scheme <tag|->
//   params <count>
//   param <name> <rows> <cols>    (then rows lines of cols values)

inline void save_checkpoint(const Model& model, std::ostream& out) {
  const ModelConfig& c = model.config();
  out << "diagraph-ckpt v1\n";
  out << "arch " << to_string(c.arch) << " task "
      << (c.task == TaskKind::node ? "node" : "graph") << " dims " << c.in_dim << ' '
      << c.hidden_dim << ' ' << c.out_dim << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "heads " << c.heads << " hops " << c.sgc_hops << " slope " << c.leaky_slope << " scheme "
      << (model.scheme_tag.empty() ? "-" : model.scheme_tag) << '\n';
  out << "params " << model.parameters().size() << '\n';
  for (const Parameter& p : model.parameters()) {
    out << "param " << p.name << ' ' << p.value.rows << ' ' << p.value.cols << '\n';
    for (std::size_t i = 0; i < p.value.rows; ++i) {
      for (std::size_t j = 0; j < p.value.cols; ++j) {
        if (j) out << ' ';
        out << p.value.at(i, j);
      }
      out << '\n';
    }
  }
}

inline void save_checkpoint_file(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ReportError("cannot write checkpoint '" + path + "'");
  save_checkpoint(model, out);
}

inline Model load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "diagraph-ckpt v1") {
    throw ParseError("unsupported checkpoint header '" + line + "'");
  }
  ModelConfig cfg;
  std::string scheme, word, task_word, arch_word;
  std::size_t n_params = 0;
  {
    std::getline(in, line);
    std::istringstream ls(line);
    std::string k1, k2, k3;
    ls >> k1 >> arch_word >> k2 >> task_word >> k3 >> cfg.in_dim >> cfg.hidden_dim >> cfg.out_dim;
    if (k1 != "arch" || k2 != "task" || k3 != "dims" || !ls) {
      throw ParseError("malformed checkpoint config line");
    }
    cfg.arch = arch_from_string(arch_word);
    if (task_word == "node") {
      cfg.task = TaskKind::node;
    } else if (task_word == "graph") {
      cfg.task = TaskKind::graph;
    } else {
      throw ParseError("unknown checkpoint task '" + task_word + "'");
    }
  }
  {
    std::getline(in, line);
    std::istringstream ls(line);
    std::string k1, k2, k3, k4;
    ls >> k1 >> cfg.heads >> k2 >> cfg.sgc_hops >> k3 >> cfg.leaky_slope >> k4 >> scheme;
    if (k1 != "heads" || k2 != "hops" || k3 != "slope" || k4 != "scheme" || !ls) {
      throw ParseError("malformed checkpoint options line");
    }
  }
  if (!(in >> word >> n_params) || word != "params") {
    throw ParseError("malformed checkpoint parameter count");
  }
  Model model(cfg, 0);
  if (model.parameters().size() != n_params) {
    throw ParseError("checkpoint has " + std::to_string(n_params) + " parameters, model needs " +
                     std::to_string(model.parameters().size()));
  }
  for (Parameter& p : model.parameters()) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> word >> name >> rows >> cols) || word != "param" || name != p.name ||
        rows != p.value.rows || cols != p.value.cols) {
      throw ParseError("checkpoint parameter mismatch at '" + p.name + "'");
    }
    for (double& v : p.value.a) {
      if (!(in >> v)) throw ParseError("truncated checkpoint values for '" + p.name + "'");
    }
  }
  if (scheme != "-") model.scheme_tag = scheme;
  return model;
}

inline Model load_checkpoint_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace diagraph
