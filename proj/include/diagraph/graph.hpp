#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "diagraph/annotation.hpp"
#include "diagraph/errors.hpp"

namespace diagraph {

enum class Scheme { a, b_grouping, b_grouping_connectivity };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::a: return "a";
    case Scheme::b_grouping: return "b-g";
    case Scheme::b_grouping_connectivity: return "b-gc";
  }
  return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "a") return Scheme::a;
  if (s == "b-g") return Scheme::b_grouping;
  if (s == "b-gc") return Scheme::b_grouping_connectivity;
  throw UsageError("unknown scheme '" + s + "' (expected a, b-g or b-gc)");
}

enum class EdgeKind { grouping, connectivity, relation, self_loop };

inline const char* to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::grouping: return "grouping";
    case EdgeKind::connectivity: return "connectivity";
    case EdgeKind::relation: return "relation";
    case EdgeKind::self_loop: return "self_loop";
  }
  return "?";
}

struct GraphNode {
  std::string node_id;
  ElementKind kind = ElementKind::text;
  std::optional<Polygon> geometry;
};

struct GraphEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  EdgeKind kind = EdgeKind::relation;
  std::string category;
};

// Diagram as a typed graph. Node order is fixed at construction and is the
// row order of every derived feature matrix.
struct TypedGraph {
  std::string diagram_id;
  Scheme scheme = Scheme::a;
  double image_width = 0.0;
  double image_height = 0.0;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  bool finalized = false;
  bool symmetric = false;

  std::size_t n_nodes() const { return nodes.size(); }

  std::size_t index_of(const std::string& id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].node_id == id) return i;
    throw IntegrityError("diagram '" + diagram_id + "': no node '" + id + "'");
  }
};

// Unique directed (src, dst) pairs, sorted; the adjacency the models consume.
inline std::vector<std::pair<std::size_t, std::size_t>> adjacency_pairs(const TypedGraph& g) {
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (const GraphEdge& e : g.edges) pairs.emplace(e.src, e.dst);
  return {pairs.begin(), pairs.end()};
}

// Adds one self-loop per node and, when requested, the reverse of every
// directed edge. A graph can only be finalized once.
inline void finalize(TypedGraph& g, bool symmetrize = true) {
  if (g.finalized) throw UsageError("diagram '" + g.diagram_id + "': graph already finalized");
  std::set<std::pair<std::size_t, std::size_t>> present;
  for (const GraphEdge& e : g.edges) present.emplace(e.src, e.dst);
  if (symmetrize) {
    const std::size_t n_original = g.edges.size();
    for (std::size_t i = 0; i < n_original; ++i) {
      const GraphEdge e = g.edges[i];
      if (e.src == e.dst) continue;
      if (present.emplace(e.dst, e.src).second) {
        g.edges.push_back({e.dst, e.src, e.kind, e.category});
      }
    }
  }
  for (std::size_t v = 0; v < g.nodes.size(); ++v) {
    if (present.emplace(v, v).second) {
      g.edges.push_back({v, v, EdgeKind::self_loop, ""});
    }
  }
  g.finalized = true;
  g.symmetric = symmetrize;
}

// Scheme A: every annotated element plus the image constant; relations
// expanded into pairwise edges.
inline TypedGraph build_scheme_a_graph(const RawAnnotation& raw) {
  TypedGraph g;
  g.diagram_id = raw.diagram_id;
  g.scheme = Scheme::a;
  g.image_width = raw.image_width;
  g.image_height = raw.image_height;

  std::map<std::string, std::size_t> index;
  g.nodes.push_back({raw.image_constant_id, ElementKind::image_const, std::nullopt});
  index[raw.image_constant_id] = 0;
  for (const Element& e : raw.elements) {
    index[e.id] = g.nodes.size();
    g.nodes.push_back({e.id, e.kind, e.geometry});
  }
  for (const Relation& r : raw.relations) {
    for (std::size_t i = 0; i < r.participant_ids.size(); ++i) {
      for (std::size_t j = i + 1; j < r.participant_ids.size(); ++j) {
        const auto a = index.find(r.participant_ids[i]);
        const auto b = index.find(r.participant_ids[j]);
        if (a == index.end() || b == index.end()) {
          throw IntegrityError("diagram '" + raw.diagram_id + "': relation '" + r.id +
                               "' references missing element");
        }
        g.edges.push_back({a->second, b->second, EdgeKind::relation, r.category});
      }
    }
  }
  return g;
}

// Scheme B grouping graph: image constant, the elements that take part in
// the grouping tree, and the group nodes. Group nodes carry no geometry.
inline TypedGraph build_grouping_graph(const RawAnnotation& raw, const RstAnnotation& rst) {
  if (raw.diagram_id != rst.diagram_id) {
    throw IntegrityError("annotation pair mismatch: '" + raw.diagram_id + "' vs '" +
                         rst.diagram_id + "'");
  }
  const std::optional<std::string> root = verify_grouping_tree(rst.grouping_edges, rst.diagram_id);
  if (root && *root != raw.image_constant_id) {
    throw StructureError("diagram '" + rst.diagram_id + "': grouping tree rooted at '" + *root +
                         "', expected image constant '" + raw.image_constant_id + "'");
  }

  const std::set<std::string> groups(rst.group_node_ids.begin(), rst.group_node_ids.end());
  std::set<std::string> referenced;
  for (const auto& [p, c] : rst.grouping_edges) {
    referenced.insert(p);
    referenced.insert(c);
  }

  TypedGraph g;
  g.diagram_id = raw.diagram_id;
  g.scheme = Scheme::b_grouping;
  g.image_width = raw.image_width;
  g.image_height = raw.image_height;

  std::map<std::string, std::size_t> index;
  const auto add_node = [&](const std::string& id, ElementKind kind,
                            std::optional<Polygon> geometry) {
    index[id] = g.nodes.size();
    g.nodes.push_back({id, kind, std::move(geometry)});
  };
  add_node(raw.image_constant_id, ElementKind::image_const, std::nullopt);
  for (const Element& e : raw.elements) {
    if (referenced.find(e.id) == referenced.end()) continue;
    if (e.kind == ElementKind::arrowhead) {
      throw IntegrityError("diagram '" + raw.diagram_id + "': grouping references arrowhead '" +
                           e.id + "', which scheme B does not model");
    }
    add_node(e.id, e.kind, e.geometry);
  }
  for (const std::string& gid : rst.group_node_ids) {
    if (index.find(gid) != index.end()) {
      throw IntegrityError("diagram '" + raw.diagram_id + "': group id '" + gid +
                           "' collides with an element id");
    }
    add_node(gid, ElementKind::group, std::nullopt);
  }

  for (const auto& [p, c] : rst.grouping_edges) {
    const auto a = index.find(p);
    const auto b = index.find(c);
    if (a == index.end() || b == index.end()) {
      const std::string& missing = (a == index.end()) ? p : c;
      throw IntegrityError("diagram '" + raw.diagram_id + "': grouping references '" + missing +
                           "', which is neither an element nor a group");
    }
    g.edges.push_back({a->second, b->second, EdgeKind::grouping, ""});
  }
  return g;
}

// Scheme B grouping + connectivity: the grouping graph with the expert
// connectivity edges appended. Exact duplicate connectivity edges collapse.
inline TypedGraph merge_connectivity(const TypedGraph& grouping_graph, const RstAnnotation& rst) {
  if (grouping_graph.scheme != Scheme::b_grouping) {
    throw UsageError("merge_connectivity expects a grouping graph");
  }
  if (grouping_graph.finalized) {
    throw UsageError("diagram '" + grouping_graph.diagram_id +
                     "': cannot merge into a finalized graph");
  }
  TypedGraph g = grouping_graph;
  g.scheme = Scheme::b_grouping_connectivity;

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) index[g.nodes[i].node_id] = i;

  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const ConnectivityEdge& e : rst.connectivity_edges) {
    const auto a = index.find(e.source);
    const auto b = index.find(e.target);
    if (a == index.end() || b == index.end()) {
      const std::string& missing = (a == index.end()) ? e.source : e.target;
      throw IntegrityError("diagram '" + g.diagram_id + "': connectivity references '" + missing +
                           "', which is not in the grouping graph");
    }
    if (!seen.emplace(a->second, b->second).second) continue;
    g.edges.push_back({a->second, b->second, EdgeKind::connectivity, e.category});
  }
  return g;
}

inline TypedGraph build_graph(const DiagramDocument& doc, Scheme scheme, bool final = true,
                              bool symmetrize = true) {
  TypedGraph g;
  switch (scheme) {
    case Scheme::a:
      g = build_scheme_a_graph(doc.raw);
      break;
    case Scheme::b_grouping:
    case Scheme::b_grouping_connectivity: {
      if (!doc.rst) {
        throw UsageError("diagram '" + doc.raw.diagram_id + "': no expert annotation for scheme " +
                         to_string(scheme));
      }
      g = build_grouping_graph(doc.raw, *doc.rst);
      if (scheme == Scheme::b_grouping_connectivity) g = merge_connectivity(g, *doc.rst);
      break;
    }
  }
  if (final) finalize(g, symmetrize);
  return g;
}

// One "src dst kind" line per edge, in edge order.
inline std::string dump_edges(const TypedGraph& g) {
  std::string out;
  for (const GraphEdge& e : g.edges) {
    out += g.nodes[e.src].node_id;
    out += ' ';
    out += g.nodes[e.dst].node_id;
    out += ' ';
    out += to_string(e.kind);
    out += '\n';
  }
  return out;
}

}  // namespace diagraph
