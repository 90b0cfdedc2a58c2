#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "diagraph/errors.hpp"
#include "diagraph/geometry.hpp"

namespace diagraph {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

enum class ElementKind { text, graphic, arrow, arrowhead, image_const, group };

inline const char* to_string(ElementKind k) {
  switch (k) {
    case ElementKind::text: return "text";
    case ElementKind::graphic: return "graphic";
    case ElementKind::arrow: return "arrow";
    case ElementKind::arrowhead: return "arrowhead";
    case ElementKind::image_const: return "image_const";
    case ElementKind::group: return "group";
  }
  return "?";
}

inline ElementKind element_kind_from_string(const std::string& s) {
  if (s == "text") return ElementKind::text;
  if (s == "graphic") return ElementKind::graphic;
  if (s == "arrow") return ElementKind::arrow;
  if (s == "arrowhead") return ElementKind::arrowhead;
  if (s == "image_const") return ElementKind::image_const;
  if (s == "group") return ElementKind::group;
  throw ParseError("unknown node kind '" + s + "'");
}

struct Element {
  std::string id;
  ElementKind kind = ElementKind::text;
  std::optional<Polygon> geometry;
  std::optional<std::string> text;
};

struct Relation {
  std::string id;
  std::string category;
  std::vector<std::string> participant_ids;
};

// Crowd-sourced layout annotation. `elements` holds the annotated diagram
// elements; the image constant is tracked separately and is always present.
struct RawAnnotation {
  std::string diagram_id;
  double image_width = 0.0;
  double image_height = 0.0;
  std::string image_constant_id = "IC";
  std::vector<Element> elements;
  std::vector<Relation> relations;

  std::size_t total_element_count() const { return elements.size() + 1; }

  const Element* find_element(const std::string& id) const {
    for (const Element& e : elements)
      if (e.id == id) return &e;
    return nullptr;
  }
};

struct ConnectivityEdge {
  std::string source;
  std::string target;
  std::string category;
};

// Expert annotation: grouping tree + optional connectivity layer. The
// discourse layer is recognized in inputs and skipped.
struct RstAnnotation {
  std::string diagram_id;
  std::vector<std::pair<std::string, std::string>> grouping_edges;  // parent -> child
  std::vector<std::string> group_node_ids;
  std::vector<ConnectivityEdge> connectivity_edges;
  std::vector<std::string> diagram_types;  // fine-grained, may be several
  std::string coarse_type;
};

struct DiagramLabels {
  std::optional<std::string> ai2d;
  std::optional<std::string> rst_fine;
  std::optional<std::string> rst_coarse;
};

// One diagram in the canonical interchange representation.
struct DiagramDocument {
  RawAnnotation raw;
  std::optional<RstAnnotation> rst;
  DiagramLabels labels;
};

namespace detail {

inline Polygon parse_polygon(const json& arr, const std::string& owner) {
  if (!arr.is_array() || arr.size() < 3) {
    throw ParseError("element '" + owner + "': polygon needs at least 3 points");
  }
  Polygon p;
  for (const auto& pt : arr) {
    if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
      throw ParseError("element '" + owner + "': malformed polygon point");
    }
    p.vertices.push_back({pt[0].get<double>(), pt[1].get<double>()});
  }
  return p;
}

inline Polygon parse_rectangle(const json& arr, const std::string& owner) {
  if (!arr.is_array() || arr.size() != 2 || !arr[0].is_array() || !arr[1].is_array()) {
    throw ParseError("element '" + owner + "': rectangle needs two corner points");
  }
  const double x0 = arr[0][0].get<double>(), y0 = arr[0][1].get<double>();
  const double x1 = arr[1][0].get<double>(), y1 = arr[1][1].get<double>();
  return rectangle_polygon(x0, y0, x1, y1);
}

inline void check_unique_id(std::set<std::string>& seen, const std::string& id) {
  if (!seen.insert(id).second) {
    throw ParseError("duplicate element id '" + id + "'");
  }
}

}  // namespace detail

inline void validate_raw(const RawAnnotation& raw) {
  if (raw.image_width <= 0.0 || raw.image_height <= 0.0) {
    throw ParseError("diagram '" + raw.diagram_id + "': image dimensions must be positive");
  }
  std::set<std::string> ids{raw.image_constant_id};
  for (const Element& e : raw.elements) {
    if (!ids.insert(e.id).second) {
      throw ParseError("diagram '" + raw.diagram_id + "': duplicate element id '" + e.id + "'");
    }
    if (e.kind == ElementKind::image_const || e.kind == ElementKind::group) {
      throw ParseError("element '" + e.id + "': kind '" + to_string(e.kind) +
                       "' is not an annotated layout element");
    }
  }
  for (const Relation& r : raw.relations) {
    for (const std::string& pid : r.participant_ids) {
      if (ids.find(pid) == ids.end()) {
        throw IntegrityError("relation '" + r.id + "' references missing element '" + pid + "'");
      }
    }
    if (r.participant_ids.size() < 2) {
      throw ParseError("relation '" + r.id + "' needs at least two participants");
    }
  }
}

// Verifies the grouping edges form a tree (single root, one parent per
// node, no cycles). Returns the root id. Empty edge list -> nullopt.
inline std::optional<std::string> verify_grouping_tree(
    const std::vector<std::pair<std::string, std::string>>& edges,
    const std::string& diagram_id) {
  if (edges.empty()) return std::nullopt;
  std::map<std::string, std::vector<std::string>> children;
  std::map<std::string, int> parent_count;
  std::set<std::string> nodes;
  for (const auto& [p, c] : edges) {
    children[p].push_back(c);
    parent_count[c] += 1;
    nodes.insert(p);
    nodes.insert(c);
    if (parent_count[c] > 1) {
      throw StructureError("diagram '" + diagram_id + "': grouping node '" + c +
                           "' has multiple parents");
    }
  }
  // Cycle check via iterative DFS with a gray stack so the cycle can be named.
  std::map<std::string, int> state;  // 0 white, 1 gray, 2 black
  for (const std::string& start : nodes) {
    if (state[start] != 0) continue;
    std::vector<std::pair<std::string, std::size_t>> stack{{start, 0}};
    state[start] = 1;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      const auto it = children.find(node);
      if (it == children.end() || next >= it->second.size()) {
        state[node] = 2;
        stack.pop_back();
        continue;
      }
      const std::string& child = it->second[next++];
      if (state[child] == 1) {
        std::string cycle = child;
        for (std::size_t i = stack.size(); i-- > 0;) {
          cycle += " -> " + stack[i].first;
          if (stack[i].first == child) break;
        }
        throw StructureError("diagram '" + diagram_id + "': grouping cycle: " + cycle);
      }
      if (state[child] == 0) {
        state[child] = 1;
        stack.emplace_back(child, 0);
      }
    }
  }
  std::vector<std::string> roots;
  for (const std::string& n : nodes) {
    if (parent_count.find(n) == parent_count.end()) roots.push_back(n);
  }
  if (roots.size() != 1) {
    throw StructureError("diagram '" + diagram_id + "': grouping edges have " +
                         std::to_string(roots.size()) + " roots, expected 1");
  }
  return roots[0];
}

inline void validate_rst(const RstAnnotation& rst) {
  verify_grouping_tree(rst.grouping_edges, rst.diagram_id);
  std::set<std::string> known;
  for (const auto& [p, c] : rst.grouping_edges) {
    known.insert(p);
    known.insert(c);
  }
  for (const std::string& g : rst.group_node_ids) known.insert(g);
  for (const ConnectivityEdge& e : rst.connectivity_edges) {
    for (const std::string* endpoint : {&e.source, &e.target}) {
      if (known.find(*endpoint) == known.end()) {
        throw IntegrityError("diagram '" + rst.diagram_id +
                             "': connectivity references unknown node id '" + *endpoint + "'");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// External-schema adapter, crowd-sourced layout documents.
//
// Expected shape (README documents it in full):
//   { "id": ..., "image_dimensions": {"width": W, "height": H},
//     "image_constant": "IC"?,
//     "text":       { "T1": {"rectangle": [[x0,y0],[x1,y1]], "value": ...}, ... },
//     "blobs":      { "B1": {"polygon": [[x,y],...]}, ... },
//     "arrows":     { "A1": {"polygon": [[x,y],...]}, ... },
//     "arrowheads": { "H1": {"rectangle": [[x0,y0],[x1,y1]]}, ... },
//     "relationships": { "R1": {"category": ..., "participants": [id, ...]}, ... } }
// ---------------------------------------------------------------------------
inline RawAnnotation parse_raw_annotation(const json& doc) {
  RawAnnotation raw;
  if (!doc.is_object()) throw ParseError("raw annotation document must be a JSON object");
  raw.diagram_id = doc.value("id", std::string{});
  if (raw.diagram_id.empty()) throw ParseError("raw annotation document missing 'id'");
  if (!doc.contains("image_dimensions")) {
    throw ParseError("diagram '" + raw.diagram_id + "' missing 'image_dimensions'");
  }
  raw.image_width = doc["image_dimensions"].value("width", 0.0);
  raw.image_height = doc["image_dimensions"].value("height", 0.0);
  raw.image_constant_id = doc.value("image_constant", std::string("IC"));

  std::set<std::string> seen{raw.image_constant_id};
  const auto parse_section = [&](const char* section, ElementKind kind, bool rect) {
    if (!doc.contains(section)) return;
    if (!doc[section].is_object()) {
      throw ParseError("diagram '" + raw.diagram_id + "': section '" + section +
                       "' must be an object");
    }
    for (const auto& [id, body] : doc[section].items()) {
      detail::check_unique_id(seen, id);
      Element e;
      e.id = id;
      e.kind = kind;
      if (rect) {
        if (!body.contains("rectangle")) {
          throw ParseError("element '" + id + "': missing rectangle");
        }
        e.geometry = detail::parse_rectangle(body["rectangle"], id);
      } else {
        if (!body.contains("polygon")) {
          throw ParseError("element '" + id + "': missing polygon");
        }
        e.geometry = detail::parse_polygon(body["polygon"], id);
      }
      if (body.contains("value")) e.text = body["value"].get<std::string>();
      raw.elements.push_back(std::move(e));
    }
  };
  parse_section("text", ElementKind::text, /*rect=*/true);
  parse_section("blobs", ElementKind::graphic, /*rect=*/false);
  parse_section("arrows", ElementKind::arrow, /*rect=*/false);
  parse_section("arrowheads", ElementKind::arrowhead, /*rect=*/true);

  if (doc.contains("relationships")) {
    for (const auto& [id, body] : doc["relationships"].items()) {
      Relation r;
      r.id = id;
      r.category = body.value("category", std::string("unspecified"));
      if (!body.contains("participants") || !body["participants"].is_array()) {
        throw ParseError("relation '" + id + "': missing participants");
      }
      for (const auto& pid : body["participants"]) r.participant_ids.push_back(pid.get<std::string>());
      raw.relations.push_back(std::move(r));
    }
  }
  validate_raw(raw);
  return raw;
}

// ---------------------------------------------------------------------------
// External-schema adapter, expert (grouping/connectivity) documents.
//
//   { "id": ..., "grouping": {"groups": [ids], "edges": [[parent, child], ...]},
//     "connectivity": {"edges": [{"source":..,"target":..,"category":..}, ...]}?,
//     "discourse": { ... }?   <- tolerated, skipped
//     "diagram_types": [...], "coarse_type": ... }
// ---------------------------------------------------------------------------
inline RstAnnotation parse_rst_annotation(const json& doc) {
  RstAnnotation rst;
  if (!doc.is_object()) throw ParseError("rst annotation document must be a JSON object");
  rst.diagram_id = doc.value("id", std::string{});
  if (rst.diagram_id.empty()) throw ParseError("rst annotation document missing 'id'");
  if (!doc.contains("grouping")) {
    throw ParseError("diagram '" + rst.diagram_id + "': grouping layer missing");
  }
  const json& grouping = doc["grouping"];
  if (grouping.contains("groups")) {
    for (const auto& g : grouping["groups"]) rst.group_node_ids.push_back(g.get<std::string>());
  }
  if (grouping.contains("edges")) {
    for (const auto& e : grouping["edges"]) {
      if (!e.is_array() || e.size() != 2) {
        throw ParseError("diagram '" + rst.diagram_id + "': malformed grouping edge");
      }
      rst.grouping_edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
  }
  if (doc.contains("connectivity") && doc["connectivity"].contains("edges")) {
    for (const auto& e : doc["connectivity"]["edges"]) {
      ConnectivityEdge edge;
      edge.source = e.value("source", std::string{});
      edge.target = e.value("target", std::string{});
      edge.category = e.value("category", std::string("unspecified"));
      if (edge.source.empty() || edge.target.empty()) {
        throw ParseError("diagram '" + rst.diagram_id + "': connectivity edge missing endpoint");
      }
      rst.connectivity_edges.push_back(std::move(edge));
    }
  }
  // The discourse layer is out of scope; its presence is never an error.
  if (doc.contains("diagram_types")) {
    for (const auto& t : doc["diagram_types"]) rst.diagram_types.push_back(t.get<std::string>());
  }
  rst.coarse_type = doc.value("coarse_type", std::string{});
  validate_rst(rst);
  return rst;
}

// Derived fine-grained label: the single diagram type, or "mixed".
inline std::optional<std::string> derive_fine_label(const RstAnnotation& rst) {
  if (rst.diagram_types.empty()) return std::nullopt;
  if (rst.diagram_types.size() == 1) return rst.diagram_types[0];
  return std::string("mixed");
}

// ---------------------------------------------------------------------------
// Canonical interchange format. One JSON document per diagram:
//   { "id": ..., "image_size": [w, h],
//     "nodes": [{"id":.., "kind":.., "polygon": [[x,y],..]?, "text":..?}, ...],
//     "edges": [{"src":.., "dst":.., "kind": "grouping"|"connectivity"|"relation",
//                "category":..?}, ...],
//     "labels": {"ai2d":..?, "rst_fine":..?, "rst_coarse":..?} }
// Pixel coordinates, origin top-left. Serialization is deterministic:
// image constant first, then nodes sorted by id; edges sorted.
// ---------------------------------------------------------------------------
inline DiagramDocument load_canonical(const json& doc) {
  DiagramDocument out;
  RawAnnotation& raw = out.raw;
  raw.diagram_id = doc.value("id", std::string{});
  if (raw.diagram_id.empty()) throw ParseError("canonical document missing 'id'");
  if (!doc.contains("image_size") || !doc["image_size"].is_array() ||
      doc["image_size"].size() != 2) {
    throw ParseError("diagram '" + raw.diagram_id + "': missing image_size [w, h]");
  }
  raw.image_width = doc["image_size"][0].get<double>();
  raw.image_height = doc["image_size"][1].get<double>();

  std::vector<std::string> group_ids;
  bool has_image_const = false;
  for (const auto& n : doc.value("nodes", json::array())) {
    const std::string id = n.value("id", std::string{});
    if (id.empty()) throw ParseError("diagram '" + raw.diagram_id + "': node missing id");
    const ElementKind kind = element_kind_from_string(n.value("kind", std::string{}));
    if (kind == ElementKind::image_const) {
      if (has_image_const) {
        throw ParseError("diagram '" + raw.diagram_id + "': multiple image constants");
      }
      has_image_const = true;
      raw.image_constant_id = id;
      continue;
    }
    if (kind == ElementKind::group) {
      group_ids.push_back(id);
      continue;
    }
    Element e;
    e.id = id;
    e.kind = kind;
    if (n.contains("polygon")) e.geometry = detail::parse_polygon(n["polygon"], id);
    if (n.contains("text")) e.text = n["text"].get<std::string>();
    raw.elements.push_back(std::move(e));
  }

  std::vector<std::pair<std::string, std::string>> grouping_edges;
  std::vector<ConnectivityEdge> connectivity;
  std::size_t rel_counter = 0;
  for (const auto& e : doc.value("edges", json::array())) {
    const std::string src = e.value("src", std::string{});
    const std::string dst = e.value("dst", std::string{});
    const std::string kind = e.value("kind", std::string{});
    if (src.empty() || dst.empty()) {
      throw ParseError("diagram '" + raw.diagram_id + "': edge missing endpoint");
    }
    if (kind == "grouping") {
      grouping_edges.emplace_back(src, dst);
    } else if (kind == "connectivity") {
      connectivity.push_back({src, dst, e.value("category", std::string("unspecified"))});
    } else if (kind == "relation") {
      Relation r;
      r.id = "R" + std::to_string(rel_counter++);
      r.category = e.value("category", std::string("unspecified"));
      r.participant_ids = {src, dst};
      raw.relations.push_back(std::move(r));
    } else {
      throw ParseError("diagram '" + raw.diagram_id + "': unknown edge kind '" + kind + "'");
    }
  }

  if (doc.contains("labels")) {
    const json& labels = doc["labels"];
    if (labels.contains("ai2d")) out.labels.ai2d = labels["ai2d"].get<std::string>();
    if (labels.contains("rst_fine")) out.labels.rst_fine = labels["rst_fine"].get<std::string>();
    if (labels.contains("rst_coarse"))
      out.labels.rst_coarse = labels["rst_coarse"].get<std::string>();
  }

  validate_raw(raw);
  if (!grouping_edges.empty() || !group_ids.empty() || !connectivity.empty()) {
    RstAnnotation rst;
    rst.diagram_id = raw.diagram_id;
    rst.grouping_edges = std::move(grouping_edges);
    rst.group_node_ids = std::move(group_ids);
    rst.connectivity_edges = std::move(connectivity);
    if (out.labels.rst_fine) rst.diagram_types = {*out.labels.rst_fine};
    if (out.labels.rst_coarse) rst.coarse_type = *out.labels.rst_coarse;
    validate_rst(rst);
    out.rst = std::move(rst);
  }
  return out;
}

inline ordered_json polygon_to_json(const Polygon& p) {
  ordered_json arr = ordered_json::array();
  for (const Point& v : p.vertices) arr.push_back({v.x, v.y});
  return arr;
}

inline ordered_json save_canonical(const DiagramDocument& doc) {
  const RawAnnotation& raw = doc.raw;
  ordered_json out;
  out["id"] = raw.diagram_id;
  out["image_size"] = {raw.image_width, raw.image_height};

  ordered_json nodes = ordered_json::array();
  {
    ordered_json ic;
    ic["id"] = raw.image_constant_id;
    ic["kind"] = "image_const";
    nodes.push_back(std::move(ic));
  }
  std::vector<const Element*> sorted_elements;
  for (const Element& e : raw.elements) sorted_elements.push_back(&e);
  std::sort(sorted_elements.begin(), sorted_elements.end(),
            [](const Element* a, const Element* b) { return a->id < b->id; });
  for (const Element* e : sorted_elements) {
    ordered_json n;
    n["id"] = e->id;
    n["kind"] = to_string(e->kind);
    if (e->geometry) n["polygon"] = polygon_to_json(*e->geometry);
    if (e->text) n["text"] = *e->text;
    nodes.push_back(std::move(n));
  }
  if (doc.rst) {
    std::vector<std::string> groups = doc.rst->group_node_ids;
    std::sort(groups.begin(), groups.end());
    for (const std::string& g : groups) {
      ordered_json n;
      n["id"] = g;
      n["kind"] = "group";
      nodes.push_back(std::move(n));
    }
  }
  out["nodes"] = std::move(nodes);

  // (kind-rank, src, dst, category) tuples, sorted for determinism.
  std::vector<std::tuple<int, std::string, std::string, std::string>> edges;
  if (doc.rst) {
    for (const auto& [p, c] : doc.rst->grouping_edges) edges.emplace_back(0, p, c, "");
    for (const ConnectivityEdge& e : doc.rst->connectivity_edges)
      edges.emplace_back(1, e.source, e.target, e.category);
  }
  for (const Relation& r : raw.relations) {
    for (std::size_t i = 0; i < r.participant_ids.size(); ++i)
      for (std::size_t j = i + 1; j < r.participant_ids.size(); ++j)
        edges.emplace_back(2, r.participant_ids[i], r.participant_ids[j], r.category);
  }
  std::sort(edges.begin(), edges.end());
  static const char* kind_names[] = {"grouping", "connectivity", "relation"};
  ordered_json edges_json = ordered_json::array();
  for (const auto& [kind, src, dst, category] : edges) {
    ordered_json e;
    e["src"] = src;
    e["dst"] = dst;
    e["kind"] = kind_names[kind];
    if (!category.empty()) e["category"] = category;
    edges_json.push_back(std::move(e));
  }
  out["edges"] = std::move(edges_json);

  ordered_json labels;
  if (doc.labels.ai2d) labels["ai2d"] = *doc.labels.ai2d;
  if (doc.labels.rst_fine) labels["rst_fine"] = *doc.labels.rst_fine;
  if (doc.labels.rst_coarse) labels["rst_coarse"] = *doc.labels.rst_coarse;
  out["labels"] = std::move(labels);
  return out;
}

}  // namespace diagraph
