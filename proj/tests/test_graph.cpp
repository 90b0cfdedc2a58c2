// Typed-graph construction for each annotation scheme, finalization
// semantics, and the derived per-node feature/target matrices.

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "diagraph/featurize.hpp"
#include "diagraph/graph.hpp"

using namespace diagraph;

namespace {

DiagramDocument fixture_document() {
  DiagramDocument doc;
  doc.raw = parse_raw_annotation(json::parse(R"({
    "id": "D0001",
    "image_dimensions": {"width": 640, "height": 480},
    "text": {
      "T0": {"rectangle": [[10, 10], [110, 30]], "value": "stem"},
      "T1": {"rectangle": [[10, 50], [110, 70]], "value": "root"},
      "T2": {"rectangle": [[10, 90], [110, 110]], "value": "leaf"}
    },
    "blobs": {
      "B0": {"polygon": [[200, 100], [300, 110], [280, 220], [210, 200]]},
      "B1": {"polygon": [[400, 100], [500, 120], [470, 240]]}
    },
    "arrows": {
      "A0": {"polygon": [[120, 20], [195, 98], [200, 92], [126, 14]]},
      "A1": {"polygon": [[120, 60], [390, 115], [392, 108], [123, 53]]}
    },
    "arrowheads": {
      "H0": {"rectangle": [[195, 92], [205, 102]]},
      "H1": {"rectangle": [[390, 108], [400, 118]]}
    },
    "relationships": {
      "R0": {"category": "arrowDescriptor", "participants": ["T0", "A0"]},
      "R1": {"category": "interObjectLinkage", "participants": ["A1", "T1", "B1"]},
      "R2": {"category": "arrowHeadTail", "participants": ["H0", "A0"]}
    }
  })"));
  doc.rst = parse_rst_annotation(json::parse(R"({
    "id": "D0001",
    "grouping": {
      "groups": ["G0", "G1"],
      "edges": [["IC", "G0"], ["IC", "G1"], ["G0", "T0"], ["G0", "B0"],
                ["G1", "T1"], ["G1", "B1"], ["IC", "T2"], ["IC", "A0"], ["IC", "A1"]]
    },
    "connectivity": {
      "edges": [{"source": "G0", "target": "G1", "category": "directed"},
                {"source": "T2", "target": "B1", "category": "undirected"}]
    },
    "diagram_types": ["cross-section"],
    "coarse_type": "sectional"
  })"));
  return doc;
}

std::size_t count_kind(const TypedGraph& g, EdgeKind kind) {
  std::size_t n = 0;
  for (const GraphEdge& e : g.edges) {
    if (e.kind == kind) n += 1;
  }
  return n;
}

}  // namespace

TEST_CASE("scheme a uses all elements and expands relations pairwise") {
  const DiagramDocument doc = fixture_document();
  TypedGraph g = build_scheme_a_graph(doc.raw);
  REQUIRE(g.scheme == Scheme::a);
  REQUIRE(g.n_nodes() == 10);  // image constant + 9 annotated elements
  REQUIRE(g.nodes[0].node_id == "IC");
  REQUIRE(g.nodes[0].kind == ElementKind::image_const);
  REQUIRE_FALSE(g.nodes[0].geometry.has_value());

  // R0 -> 1 pair, R1 (3-way) -> 3 pairs, R2 -> 1 pair.
  REQUIRE(g.edges.size() == 5);
  REQUIRE(count_kind(g, EdgeKind::relation) == 5);
  REQUIRE_FALSE(g.finalized);

  finalize(g);
  REQUIRE(g.finalized);
  REQUIRE(g.symmetric);
  // 5 undirected pairs -> 10 directed edges, plus 10 self-loops.
  REQUIRE(adjacency_pairs(g).size() == 20);
  REQUIRE(count_kind(g, EdgeKind::self_loop) == 10);
  REQUIRE_THROWS_AS(finalize(g), UsageError);
}

TEST_CASE("finalize without symmetrization keeps edges one-way") {
  const DiagramDocument doc = fixture_document();
  TypedGraph g = build_scheme_a_graph(doc.raw);
  finalize(g, /*symmetrize=*/false);
  REQUIRE_FALSE(g.symmetric);
  REQUIRE(adjacency_pairs(g).size() == 15);  // 5 directed + 10 self-loops
}

TEST_CASE("duplicate relation pairs collapse in the adjacency") {
  DiagramDocument doc = fixture_document();
  Relation dup;
  dup.id = "R9";
  dup.category = "arrowDescriptor";
  dup.participant_ids = {"T0", "A0"};  // same pair as R0
  doc.raw.relations.push_back(dup);
  TypedGraph g = build_scheme_a_graph(doc.raw);
  REQUIRE(g.edges.size() == 6);          // raw edges keep both
  finalize(g);
  REQUIRE(adjacency_pairs(g).size() == 20);  // adjacency deduplicates
}

TEST_CASE("grouping graph hangs elements and groups under the image constant") {
  const DiagramDocument doc = fixture_document();
  TypedGraph g = build_graph(doc, Scheme::b_grouping, /*final=*/false);
  REQUIRE(g.scheme == Scheme::b_grouping);
  // IC + 7 referenced elements (arrowheads never appear) + 2 groups.
  REQUIRE(g.n_nodes() == 10);
  REQUIRE(g.nodes[0].node_id == "IC");
  for (const GraphNode& n : g.nodes) {
    REQUIRE(n.node_id.find('H') != 0);
  }
  const std::size_t g0 = g.index_of("G0");
  REQUIRE(g.nodes[g0].kind == ElementKind::group);
  REQUIRE_FALSE(g.nodes[g0].geometry.has_value());
  REQUIRE(g.edges.size() == 9);
  REQUIRE(count_kind(g, EdgeKind::grouping) == 9);
}

TEST_CASE("connectivity layer adds typed edges on top of the grouping tree") {
  const DiagramDocument doc = fixture_document();
  TypedGraph g = build_graph(doc, Scheme::b_grouping_connectivity, /*final=*/false);
  REQUIRE(g.scheme == Scheme::b_grouping_connectivity);
  REQUIRE(g.n_nodes() == 10);
  REQUIRE(g.edges.size() == 11);
  REQUIRE(count_kind(g, EdgeKind::connectivity) == 2);

  TypedGraph final_g = build_graph(doc, Scheme::b_grouping_connectivity);
  REQUIRE(final_g.finalized);
  // 11 distinct undirected pairs -> 22 directed + 10 loops.
  REQUIRE(adjacency_pairs(final_g).size() == 32);
}

TEST_CASE("same-direction duplicate connectivity edges are dropped") {
  DiagramDocument doc = fixture_document();
  doc.rst->connectivity_edges.push_back({"G0", "G1", "directed"});  // duplicate
  doc.rst->connectivity_edges.push_back({"G1", "G0", "directed"});  // reverse is kept
  TypedGraph g = build_graph(doc, Scheme::b_grouping_connectivity, /*final=*/false);
  REQUIRE(count_kind(g, EdgeKind::connectivity) == 3);
}

TEST_CASE("merging connectivity twice or after finalization is rejected") {
  const DiagramDocument doc = fixture_document();
  TypedGraph grouping = build_graph(doc, Scheme::b_grouping, /*final=*/false);
  TypedGraph merged = merge_connectivity(grouping, *doc.rst);
  REQUIRE(merged.scheme == Scheme::b_grouping_connectivity);
  REQUIRE_THROWS_AS(merge_connectivity(merged, *doc.rst), UsageError);

  TypedGraph finalized_grouping = build_graph(doc, Scheme::b_grouping);
  REQUIRE_THROWS_AS(merge_connectivity(finalized_grouping, *doc.rst), UsageError);
}

TEST_CASE("expert layers must agree with the layout annotation") {
  DiagramDocument doc = fixture_document();
  doc.rst->diagram_id = "OTHER";
  REQUIRE_THROWS_AS(build_graph(doc, Scheme::b_grouping), IntegrityError);

  // Grouping may only reference real elements.
  doc = fixture_document();
  doc.rst->grouping_edges.emplace_back("IC", "GHOST");
  REQUIRE_THROWS_AS(build_graph(doc, Scheme::b_grouping), IntegrityError);

  // Arrowheads are not part of the expert annotation universe.
  doc = fixture_document();
  doc.rst->grouping_edges.emplace_back("IC", "H0");
  REQUIRE_THROWS_AS(build_graph(doc, Scheme::b_grouping), IntegrityError);

  // The tree root must be the image constant.
  doc = fixture_document();
  for (auto& e : doc.rst->grouping_edges) {
    if (e.first == "IC") e.first = "G9";
  }
  doc.rst->grouping_edges.emplace_back("IC2", "G9");
  doc.rst->group_node_ids.push_back("G9");
  REQUIRE_THROWS_AS(build_graph(doc, Scheme::b_grouping), StructureError);

  // Group ids may not collide with element ids; T2 is already an element.
  doc = fixture_document();
  doc.rst->group_node_ids.push_back("T2");
  REQUIRE_THROWS_AS(build_graph(doc, Scheme::b_grouping), IntegrityError);

  // Connectivity between unknown endpoints.
  doc = fixture_document();
  doc.rst->connectivity_edges.push_back({"G0", "H0", "directed"});
  REQUIRE_THROWS_AS(build_graph(doc, Scheme::b_grouping_connectivity), IntegrityError);

  // Scheme B without the expert layer at all.
  doc = fixture_document();
  doc.rst.reset();
  REQUIRE_THROWS_AS(build_graph(doc, Scheme::b_grouping), UsageError);
}

TEST_CASE("feature matrix rows follow node order with zeros for abstract nodes") {
  const DiagramDocument doc = fixture_document();
  const TypedGraph g = build_graph(doc, Scheme::b_grouping_connectivity);
  const Mat x = layout_feature_matrix(g);
  REQUIRE(x.rows == g.n_nodes());
  REQUIRE(x.cols == 4);
  for (std::size_t j = 0; j < 4; ++j) {
    REQUIRE(x.at(0, j) == 0.0);                  // image constant
    REQUIRE(x.at(g.index_of("G0"), j) == 0.0);   // group node
  }
  const std::size_t t0 = g.index_of("T0");
  REQUIRE(x.at(t0, 0) == Catch::Approx(60.0 / 640.0));   // bbox centre x
  REQUIRE(x.at(t0, 1) == Catch::Approx(20.0 / 480.0));   // bbox centre y
  REQUIRE(x.at(t0, 2) == Catch::Approx(2000.0 / (640.0 * 480.0)));
  REQUIRE(x.at(t0, 3) == Catch::Approx(1.0));
}

TEST_CASE("node classes are scheme-specific and sorted") {
  const auto a = scheme_node_classes(Scheme::a);
  REQUIRE(class_names(a) ==
          std::vector<std::string>{"arrow", "arrowhead", "graphic", "image_const", "text"});
  const auto b = scheme_node_classes(Scheme::b_grouping);
  REQUIRE(class_names(b) ==
          std::vector<std::string>{"arrow", "graphic", "group", "image_const", "text"});
  REQUIRE(scheme_node_classes(Scheme::b_grouping_connectivity) == b);
}

TEST_CASE("per-node targets map kinds to class indices") {
  const DiagramDocument doc = fixture_document();
  const TypedGraph g = build_graph(doc, Scheme::a);
  const std::vector<int> y = node_kind_targets(g, scheme_node_classes(Scheme::a));
  REQUIRE(y.size() == g.n_nodes());
  REQUIRE(y[0] == 3);  // image_const
  REQUIRE(y[g.index_of("T0")] == 4);
  REQUIRE(y[g.index_of("B0")] == 2);
  REQUIRE(y[g.index_of("A0")] == 0);
  REQUIRE(y[g.index_of("H0")] == 1);

  // A kind outside the scheme's class set is a labeling error.
  REQUIRE_THROWS_AS(node_kind_targets(g, scheme_node_classes(Scheme::b_grouping)), LabelError);
}

TEST_CASE("edge dump lists one typed edge per line") {
  const DiagramDocument doc = fixture_document();
  TypedGraph g = build_scheme_a_graph(doc.raw);
  const std::string dump = dump_edges(g);
  REQUIRE(dump.find("T0 A0 relation\n") != std::string::npos);
  REQUIRE(std::count(dump.begin(), dump.end(), '\n') == 5);
}
