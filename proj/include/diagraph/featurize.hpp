#pragma once

#include <string>
#include <vector>

#include "diagraph/errors.hpp"
#include "diagraph/geometry.hpp"
#include "diagraph/graph.hpp"
#include "diagraph/tensor.hpp"

namespace diagraph {

// Node classes per scheme, sorted by name; index = target class id.
inline std::vector<ElementKind> scheme_node_classes(Scheme scheme) {
  if (scheme == Scheme::a) {
    return {ElementKind::arrow, ElementKind::arrowhead, ElementKind::graphic,
            ElementKind::image_const, ElementKind::text};
  }
  return {ElementKind::arrow, ElementKind::graphic, ElementKind::group, ElementKind::image_const,
          ElementKind::text};
}

inline std::vector<std::string> class_names(const std::vector<ElementKind>& classes) {
  std::vector<std::string> names;
  for (ElementKind k : classes) names.emplace_back(to_string(k));
  return names;
}

// n x 4 matrix of layout descriptors, rows in graph node order. Nodes
// without geometry (image constant, groups) get a zero row.
inline Mat layout_feature_matrix(const TypedGraph& g) {
  Mat out(g.n_nodes(), 4);
  for (std::size_t i = 0; i < g.n_nodes(); ++i) {
    LayoutFeatures f;
    try {
      f = layout_features(g.nodes[i].geometry, g.image_width, g.image_height);
    } catch (const GeometryError& e) {
      throw GeometryError("diagram '" + g.diagram_id + "', node '" + g.nodes[i].node_id +
                          "': " + e.what());
    }
    const auto v = f.as_vector();
    for (std::size_t j = 0; j < 4; ++j) out.at(i, j) = v[j];
  }
  return out;
}

inline std::vector<int> node_kind_targets(const TypedGraph& g,
                                          const std::vector<ElementKind>& classes) {
  std::vector<int> targets;
  targets.reserve(g.n_nodes());
  for (const GraphNode& n : g.nodes) {
    int target = -1;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      if (classes[c] == n.kind) {
        target = static_cast<int>(c);
        break;
      }
    }
    if (target < 0) {
      throw LabelError("diagram '" + g.diagram_id + "', node '" + n.node_id + "': kind '" +
                       to_string(n.kind) + "' is not a class of scheme " + to_string(g.scheme));
    }
    targets.push_back(target);
  }
  return targets;
}

}  // namespace diagraph
