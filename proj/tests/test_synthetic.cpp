// Synthetic corpus generator: determinism, structural signatures of each
// diagram type, label wiring and the on-disk writer.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "diagraph/synthetic.hpp"

using namespace diagraph;

namespace {

SynthSpec single_type_spec(const std::string& type, std::size_t n = 8) {
  SynthSpec spec;
  spec.n_diagrams = n;
  spec.type_mix = {{type, 1.0}};
  spec.min_elements = 8;
  spec.max_elements = 14;
  return spec;
}

std::size_t count_kind(const DiagramDocument& doc, ElementKind kind) {
  std::size_t n = 0;
  for (const Element& e : doc.raw.elements) {
    if (e.kind == kind) n += 1;
  }
  return n;
}

}  // namespace

TEST_CASE("generation is a pure function of spec and seed") {
  SynthSpec spec;
  spec.n_diagrams = 10;
  const SyntheticCorpus a = generate_synthetic_corpus(spec, 12345);
  const SyntheticCorpus b = generate_synthetic_corpus(spec, 12345);
  REQUIRE(a.documents.size() == b.documents.size());
  for (std::size_t i = 0; i < a.documents.size(); ++i) {
    REQUIRE(save_canonical(a.documents[i]).dump() == save_canonical(b.documents[i]).dump());
  }
  const SyntheticCorpus c = generate_synthetic_corpus(spec, 54321);
  REQUIRE(save_canonical(a.documents[0]).dump() != save_canonical(c.documents[0]).dump());
}

TEST_CASE("every synthetic diagram passes full validation with all labels") {
  SynthSpec spec;
  spec.n_diagrams = 24;
  const SyntheticCorpus corpus = generate_synthetic_corpus(spec, 99);
  REQUIRE(corpus.index.size() == 24);
  for (const DiagramDocument& doc : corpus.documents) {
    validate_raw(doc.raw);  // throws on any inconsistency
    REQUIRE(doc.rst.has_value());
    validate_rst(*doc.rst);
    REQUIRE(doc.labels.ai2d.has_value());
    REQUIRE(doc.labels.rst_fine.has_value());
    REQUIRE(doc.labels.rst_coarse.has_value());
    REQUIRE(doc.labels.ai2d.value() == "about-" + doc.labels.rst_fine.value());
    // All geometry stays inside the canvas.
    for (const Element& e : doc.raw.elements) {
      REQUIRE(e.geometry.has_value());
      for (const Point& p : e.geometry->vertices) {
        REQUIRE(p.x >= 0.0);
        REQUIRE(p.y >= 0.0);
        REQUIRE(p.x <= doc.raw.image_width);
        REQUIRE(p.y <= doc.raw.image_height);
      }
    }
  }
}

TEST_CASE("cycle diagrams carry a closed connectivity ring") {
  const SyntheticCorpus corpus = generate_synthetic_corpus(single_type_spec("cycle"), 5);
  for (const DiagramDocument& doc : corpus.documents) {
    REQUIRE(doc.labels.rst_fine.value() == "cycle");
    REQUIRE(doc.labels.rst_coarse.value() == "cyclic");
    const std::size_t cores = count_kind(doc, ElementKind::graphic);
    REQUIRE(cores >= 3);
    // A ring has exactly as many links as members, and every member has
    // in-degree and out-degree one.
    REQUIRE(doc.rst->connectivity_edges.size() == cores);
    std::set<std::string> sources, targets;
    for (const ConnectivityEdge& e : doc.rst->connectivity_edges) {
      REQUIRE(sources.insert(e.source).second);
      REQUIRE(targets.insert(e.target).second);
    }
    REQUIRE(sources == targets);
  }
}

TEST_CASE("network diagrams are connected and denser than a tree") {
  const SyntheticCorpus corpus = generate_synthetic_corpus(single_type_spec("network"), 6);
  for (const DiagramDocument& doc : corpus.documents) {
    REQUIRE(doc.labels.rst_coarse.value() == "connective");
    const std::size_t cores = count_kind(doc, ElementKind::graphic);
    REQUIRE(doc.rst->connectivity_edges.size() >= cores - 1);
  }
}

TEST_CASE("cross-section diagrams link every part to the sectioned core") {
  const SyntheticCorpus corpus = generate_synthetic_corpus(single_type_spec("cross-section"), 6);
  for (const DiagramDocument& doc : corpus.documents) {
    REQUIRE(doc.labels.rst_coarse.value() == "sectional");
    REQUIRE(!doc.rst->connectivity_edges.empty());
    // Star topology: every link points at the same sectioned core.
    std::set<std::string> endpoints;
    for (const ConnectivityEdge& e : doc.rst->connectivity_edges) {
      endpoints.insert(e.target);
    }
    REQUIRE(endpoints.size() == 1);
  }
}

TEST_CASE("illustration diagrams have no connectivity at all") {
  const SyntheticCorpus corpus = generate_synthetic_corpus(single_type_spec("illustration"), 6);
  for (const DiagramDocument& doc : corpus.documents) {
    REQUIRE(doc.labels.rst_coarse.value() == "pictorial");
    REQUIRE(doc.rst->connectivity_edges.empty());
  }
}

TEST_CASE("tree diagrams branch out from a single root") {
  const SyntheticCorpus corpus = generate_synthetic_corpus(single_type_spec("tree"), 6);
  for (const DiagramDocument& doc : corpus.documents) {
    REQUIRE(doc.labels.rst_coarse.value() == "hierarchical");
    const std::size_t cores = count_kind(doc, ElementKind::graphic);
    REQUIRE(doc.rst->connectivity_edges.size() == cores - 1);
    // Acyclic: every node has at most one incoming link.
    std::set<std::string> targets;
    for (const ConnectivityEdge& e : doc.rst->connectivity_edges) {
      REQUIRE(targets.insert(e.target).second);
    }
  }
}

TEST_CASE("type mix drives the label distribution") {
  SynthSpec spec;
  spec.n_diagrams = 40;
  spec.type_mix = {{"cycle", 1.0}, {"tree", 1.0}};
  const SyntheticCorpus corpus = generate_synthetic_corpus(spec, 4);
  std::set<std::string> seen;
  for (const DiagramDocument& doc : corpus.documents) seen.insert(doc.labels.rst_fine.value());
  REQUIRE(seen == std::set<std::string>{"cycle", "tree"});
  REQUIRE(corpus.index.rst_fine_vocab == std::vector<std::string>{"cycle", "tree"});
}

TEST_CASE("bad generator specs are rejected") {
  SynthSpec spec;
  spec.type_mix = {{"hexagon-lattice", 1.0}};
  REQUIRE_THROWS_AS(generate_synthetic_corpus(spec, 1), SpecError);

  spec = SynthSpec{};
  spec.type_mix.clear();
  REQUIRE_THROWS_AS(generate_synthetic_corpus(spec, 1), SpecError);

  spec = SynthSpec{};
  spec.type_mix = {{"cycle", 0.0}};
  REQUIRE_THROWS_AS(generate_synthetic_corpus(spec, 1), SpecError);

  spec = SynthSpec{};
  spec.min_elements = 20;
  spec.max_elements = 10;
  REQUIRE_THROWS_AS(generate_synthetic_corpus(spec, 1), SpecError);

  spec = SynthSpec{};
  spec.min_elements = 0;
  REQUIRE_THROWS_AS(generate_synthetic_corpus(spec, 1), SpecError);
}

TEST_CASE("writer produces one canonical file per diagram, byte-stable") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "diagraph_synth_write_test";
  fs::remove_all(dir);

  SynthSpec spec;
  spec.n_diagrams = 3;
  const SyntheticCorpus corpus = generate_synthetic_corpus(spec, 8);
  write_corpus(corpus.documents, dir.string());

  const auto slurp = [&](const std::string& name) {
    std::ifstream in(dir / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string first = slurp("SYN00000.json");
  REQUIRE(!first.empty());

  write_corpus(corpus.documents, dir.string());  // overwrite in place
  REQUIRE(slurp("SYN00000.json") == first);

  // Files load back through the regular corpus machinery.
  const CorpusIndex index = build_corpus_index(dir.string(), std::nullopt);
  REQUIRE(index.size() == 3);
  const std::vector<DiagramDocument> reloaded = load_corpus(index);
  REQUIRE(save_canonical(reloaded[0]).dump() == save_canonical(corpus.documents[0]).dump());
  fs::remove_all(dir);
}
