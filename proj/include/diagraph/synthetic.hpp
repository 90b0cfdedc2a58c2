#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "diagraph/annotation.hpp"
#include "diagraph/corpus.hpp"
#include "diagraph/errors.hpp"
#include "diagraph/rng.hpp"

namespace diagraph {

struct SynthSpec {
  std::size_t n_diagrams = 100;
  // (type, weight); defaults to four structurally distinct types.
  std::vector<std::pair<std::string, double>> type_mix = {
      {"cycle", 1.0}, {"network", 1.0}, {"cross-section", 1.0}, {"illustration", 1.0}};
  std::size_t min_elements = 8;
  std::size_t max_elements = 20;
  double image_width = 800.0;
  double image_height = 600.0;
};

struct SyntheticCorpus {
  std::vector<DiagramDocument> documents;
  CorpusIndex index;
};

inline const std::vector<std::string>& synthetic_types() {
  static const std::vector<std::string> types = {"cycle", "network", "cross-section",
                                                 "illustration", "tree"};
  return types;
}

inline std::string coarse_type_for(const std::string& fine) {
  static const std::map<std::string, std::string> map = {{"cycle", "cyclic"},
                                                         {"network", "connective"},
                                                         {"cross-section", "sectional"},
                                                         {"illustration", "pictorial"},
                                                         {"tree", "hierarchical"}};
  const auto it = map.find(fine);
  if (it == map.end()) throw SpecError("unknown synthetic diagram type '" + fine + "'");
  return it->second;
}

namespace synth_detail {

inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

inline Point rounded(double x, double y) { return {round2(x), round2(y)}; }

// Near-convex blob: jittered radii at increasing angles.
inline Polygon make_blob(Point c, double r, Rng& rng) {
  const std::size_t k = 6 + rng.bounded(5);
  Polygon p;
  for (std::size_t j = 0; j < k; ++j) {
    const double base = 2.0 * 3.141592653589793 * static_cast<double>(j) / static_cast<double>(k);
    const double angle = base + rng.uniform(-0.2, 0.2) / static_cast<double>(k) * 6.283;
    const double rad = r * rng.uniform(0.82, 1.05);
    p.vertices.push_back(rounded(c.x + rad * std::cos(angle), c.y + rad * std::sin(angle)));
  }
  return p;
}

inline Polygon make_text_rect(Point c, double img_w, double img_h, Rng& rng) {
  const double w = rng.uniform(34.0, 70.0);
  const double h = rng.uniform(10.0, 18.0);
  const double cx = std::clamp(c.x, w / 2 + 2.0, img_w - w / 2 - 2.0);
  const double cy = std::clamp(c.y, h / 2 + 2.0, img_h - h / 2 - 2.0);
  return rectangle_polygon(round2(cx - w / 2), round2(cy - h / 2), round2(cx + w / 2),
                           round2(cy + h / 2));
}

// Bent corridor between two points; the kink makes it clearly concave.
inline Polygon make_arrow(Point a, Point b, double shrink_a, double shrink_b, Rng& rng) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len = std::sqrt(dx * dx + dy * dy);
  const double ux = dx / len, uy = dy / len;
  const double px = -uy, py = ux;  // unit perpendicular
  const Point start{a.x + ux * shrink_a, a.y + uy * shrink_a};
  const Point end{b.x - ux * shrink_b, b.y - uy * shrink_b};
  const Point mid{(start.x + end.x) / 2, (start.y + end.y) / 2};
  const double span = std::max(
      30.0, std::sqrt((end.x - start.x) * (end.x - start.x) + (end.y - start.y) * (end.y - start.y)));
  // Capped so long links between far-apart cores cannot swing outside the
  // canvas margins that core placement guarantees.
  const double bend = std::min(60.0, std::max(16.0, span * rng.uniform(0.16, 0.26))) *
                      (rng.uniform() < 0.5 ? 1.0 : -1.0);
  const double w = rng.uniform(4.5, 7.0) * (bend < 0 ? -1.0 : 1.0);
  Polygon p;
  p.vertices = {rounded(start.x + px * w, start.y + py * w),
                rounded(mid.x + px * (bend + w), mid.y + py * (bend + w)),
                rounded(end.x + px * w, end.y + py * w),
                rounded(end.x - px * w, end.y - py * w),
                rounded(mid.x + px * (bend - w), mid.y + py * (bend - w)),
                rounded(start.x - px * w, start.y - py * w)};
  return p;
}

// Small triangle at the target end of an arrow.
inline Polygon make_arrowhead(Point tip_at, Point from, Rng& rng) {
  const double dx = tip_at.x - from.x, dy = tip_at.y - from.y;
  const double len = std::sqrt(dx * dx + dy * dy);
  const double ux = dx / len, uy = dy / len;
  const double px = -uy, py = ux;
  const double s = rng.uniform(8.0, 12.0);
  Polygon p;
  p.vertices = {rounded(tip_at.x, tip_at.y),
                rounded(tip_at.x - ux * s + px * s * 0.55, tip_at.y - uy * s + py * s * 0.55),
                rounded(tip_at.x - ux * s - px * s * 0.55, tip_at.y - uy * s - py * s * 0.55)};
  return p;
}

struct CoreSpec {
  Point pos;
  double radius = 0.0;
  Point label_at;  // where the label text goes, if any
};

}  // namespace synth_detail

// Generates one diagram of the given type. Deterministic in `rng`.
inline DiagramDocument generate_synthetic_diagram(const SynthSpec& spec, const std::string& type,
                                                  const std::string& diagram_id, Rng& rng) {
  using namespace synth_detail;
  const double W = spec.image_width, H = spec.image_height;
  const Point centre{W / 2, H / 2};
  const std::size_t target =
      rng.uniform_int(static_cast<int>(spec.min_elements), static_cast<int>(spec.max_elements));

  std::vector<CoreSpec> cores;
  std::vector<std::pair<std::size_t, std::size_t>> links;  // core index pairs

  const auto clamp_n = [&](double divisor, std::size_t lo, std::size_t hi) {
    const auto n = static_cast<std::size_t>(std::lround(static_cast<double>(target) / divisor));
    return std::clamp(n, lo, hi);
  };

  if (type == "cycle") {
    // At least four stations: a three-core ring is indistinguishable from a
    // small interlinked network.
    const std::size_t n = clamp_n(3.85, 4, 8);
    const double R = 170.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double angle = 2.0 * 3.141592653589793 * static_cast<double>(i) / static_cast<double>(n) +
                           rng.uniform(-0.08, 0.08);
      CoreSpec c;
      c.radius = rng.uniform(26.0, 38.0);
      c.pos = {centre.x + R * std::cos(angle), centre.y + R * std::sin(angle)};
      const double lr = R + c.radius + 26.0;
      c.label_at = {centre.x + lr * std::cos(angle), centre.y + lr * std::sin(angle)};
      cores.push_back(c);
      links.emplace_back(i, (i + 1) % n);
    }
  } else if (type == "network") {
    // At least five hubs and a dense weave of extra links, so the weave never
    // collapses into a plain ring or chain.
    const std::size_t n = clamp_n(4.5, 5, 10);
    for (std::size_t i = 0; i < n; ++i) {
      CoreSpec c;
      c.radius = rng.uniform(30.0, 44.0);
      for (int attempt = 0; attempt < 200; ++attempt) {
        c.pos = {rng.uniform(110.0, W - 110.0), rng.uniform(120.0, H - 90.0)};
        bool ok = true;
        for (const CoreSpec& other : cores) {
          const double dx = c.pos.x - other.pos.x, dy = c.pos.y - other.pos.y;
          if (dx * dx + dy * dy < 130.0 * 130.0) ok = false;
        }
        if (ok) break;
      }
      c.label_at = {c.pos.x, c.pos.y - c.radius - 18.0};
      cores.push_back(c);
      if (i > 0) links.emplace_back(i, rng.bounded(i));
    }
    std::set<std::pair<std::size_t, std::size_t>> have(links.begin(), links.end());
    const std::size_t extras = std::max<std::size_t>(2, n / 2);
    for (std::size_t k = 0; k < extras && n >= 3; ++k) {
      for (int attempt = 0; attempt < 50; ++attempt) {
        std::size_t a = rng.bounded(n), b = rng.bounded(n);
        if (a == b) continue;
        if (a < b) std::swap(a, b);
        if (have.emplace(a, b).second) {
          links.emplace_back(a, b);
          break;
        }
      }
    }
  } else if (type == "cross-section" || type == "illustration") {
    const bool sectional = (type == "cross-section");
    const std::size_t n = sectional ? clamp_n(3.7, 4, 9) : clamp_n(1.85, 4, 12);
    CoreSpec big;
    big.radius = rng.uniform(95.0, 125.0);
    big.pos = centre;
    big.label_at = {centre.x, centre.y - big.radius - 24.0};
    cores.push_back(big);
    for (std::size_t i = 1; i < n; ++i) {
      const double angle =
          2.0 * 3.141592653589793 * static_cast<double>(i - 1) / static_cast<double>(n - 1) +
          rng.uniform(-0.1, 0.1);
      CoreSpec c;
      if (sectional) {
        c.radius = rng.uniform(26.0, 34.0);
        const double rr = big.radius * 0.58;
        c.pos = {centre.x + rr * std::cos(angle), centre.y + rr * std::sin(angle)};
        const double lr = big.radius + 42.0;
        c.label_at = {centre.x + lr * std::cos(angle), centre.y + lr * std::sin(angle)};
        links.emplace_back(i, 0);
      } else {
        c.radius = rng.uniform(28.0, 40.0);
        const double rr = big.radius + 75.0;
        c.pos = {centre.x + rr * std::cos(angle), centre.y + rr * std::sin(angle)};
        const double lr = rr + c.radius + 24.0;
        c.label_at = {centre.x + lr * std::cos(angle), centre.y + lr * std::sin(angle)};
      }
      cores.push_back(c);
    }
  } else if (type == "tree") {
    const std::size_t n = clamp_n(3.7, 3, 10);
    std::vector<std::size_t> depth(n, 0);
    std::vector<std::size_t> level_count(5, 0), level_index(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) {
        depth[i] = depth[(i - 1) / 2] + 1;
        links.emplace_back((i - 1) / 2, i);
      }
      level_index[i] = level_count[depth[i]]++;
    }
    for (std::size_t i = 0; i < n; ++i) {
      CoreSpec c;
      c.radius = rng.uniform(26.0, 36.0);
      const double denom = static_cast<double>(level_count[depth[i]] + 1);
      c.pos = {W * static_cast<double>(level_index[i] + 1) / denom + rng.uniform(-14.0, 14.0),
               95.0 + static_cast<double>(depth[i]) * 115.0 + rng.uniform(-8.0, 8.0)};
      c.label_at = {c.pos.x + c.radius + 40.0, c.pos.y};
      cores.push_back(c);
    }
  } else {
    throw SpecError("unknown synthetic diagram type '" + type + "'");
  }

  DiagramDocument doc;
  RawAnnotation& raw = doc.raw;
  raw.diagram_id = diagram_id;
  raw.image_width = W;
  raw.image_height = H;
  raw.image_constant_id = "IC";

  RstAnnotation rst;
  rst.diagram_id = diagram_id;
  rst.diagram_types = {type};
  rst.coarse_type = coarse_type_for(type);

  // Genre signatures: how often a core is labelled, a connector carries a
  // head, and the diagram bears a title. Alongside the connectivity shapes,
  // these composition differences are what keep the generated types apart in
  // both annotation schemes — flows are dense with directed arrows, network
  // charts leave most nodes bare, sectional diagrams name every part but
  // rarely point with arrowheads, hierarchies branch with plain lines.
  double label_prob = 0.85, head_prob = 0.8, title_prob = 0.4;
  if (type == "cycle") {
    head_prob = 1.0;
    title_prob = 0.25;
  } else if (type == "network") {
    label_prob = 0.45;
    head_prob = 0.6;
    title_prob = 0.25;
  } else if (type == "cross-section") {
    label_prob = 1.0;
    head_prob = 0.1;
    title_prob = 0.75;
  } else if (type == "tree") {
    label_prob = 0.7;
    head_prob = 0.0;
    title_prob = 0.5;
  } else if (type == "illustration") {
    label_prob = 0.95;
  }

  // Core graphics + optional labels, grouped with them when present.
  std::vector<std::string> core_ids(cores.size()), rst_endpoint(cores.size());
  for (std::size_t i = 0; i < cores.size(); ++i) {
    const std::string bid = "B" + std::to_string(i);
    core_ids[i] = bid;
    raw.elements.push_back({bid, ElementKind::graphic, make_blob(cores[i].pos, cores[i].radius, rng),
                            std::nullopt});
    if (rng.uniform() < label_prob) {
      const std::string tid = "T" + std::to_string(i);
      raw.elements.push_back(
          {tid, ElementKind::text, make_text_rect(cores[i].label_at, W, H, rng), std::string("label")});
      Relation rel;
      rel.id = "R" + std::to_string(raw.relations.size());
      rel.category = "label";
      rel.participant_ids = {tid, bid};
      raw.relations.push_back(std::move(rel));
      const std::string gid = "G" + std::to_string(i);
      rst.group_node_ids.push_back(gid);
      rst.grouping_edges.emplace_back("IC", gid);
      rst.grouping_edges.emplace_back(gid, bid);
      rst.grouping_edges.emplace_back(gid, tid);
      rst_endpoint[i] = gid;
    } else {
      rst.grouping_edges.emplace_back("IC", bid);
      rst_endpoint[i] = bid;
    }
  }

  // Connectivity realized as arrow (+ head) elements in the raw annotation
  // and as connectivity edges between elements/groups in the expert one.
  for (std::size_t k = 0; k < links.size(); ++k) {
    const auto [ia, ib] = links[k];
    const std::string aid = "A" + std::to_string(k);
    const Point pa = cores[ia].pos, pb = cores[ib].pos;
    raw.elements.push_back({aid, ElementKind::arrow,
                            make_arrow(pa, pb, cores[ia].radius * 0.9, cores[ib].radius * 0.9, rng),
                            std::nullopt});
    Relation rel;
    rel.id = "R" + std::to_string(raw.relations.size());
    rel.category = "connector";
    rel.participant_ids = {aid, core_ids[ia], core_ids[ib]};
    raw.relations.push_back(std::move(rel));
    if (rng.uniform() < head_prob) {
      const std::string hid = "H" + std::to_string(k);
      const double dx = pb.x - pa.x, dy = pb.y - pa.y;
      const double len = std::sqrt(dx * dx + dy * dy);
      const Point tip{pb.x - dx / len * cores[ib].radius, pb.y - dy / len * cores[ib].radius};
      raw.elements.push_back({hid, ElementKind::arrowhead, make_arrowhead(tip, pa, rng), std::nullopt});
      Relation hrel;
      hrel.id = "R" + std::to_string(raw.relations.size());
      hrel.category = "arrowhead";
      hrel.participant_ids = {hid, aid};
      raw.relations.push_back(std::move(hrel));
    }
    rst.connectivity_edges.push_back({rst_endpoint[ia], rst_endpoint[ib], "connects"});
  }

  if (rng.uniform() < title_prob) {
    raw.elements.push_back({"Ttitle", ElementKind::text,
                            make_text_rect({W / 2, 28.0}, W, H, rng), std::string("title")});
    rst.grouping_edges.emplace_back("IC", "Ttitle");
  }

  doc.labels.ai2d = "about-" + type;
  doc.labels.rst_fine = type;
  doc.labels.rst_coarse = rst.coarse_type;
  doc.rst = std::move(rst);

  validate_raw(raw);
  validate_rst(*doc.rst);
  for (const Element& e : raw.elements) {
    if (!e.geometry) continue;
    for (const Point& p : e.geometry->vertices) {
      if (p.x < 0.0 || p.y < 0.0 || p.x > W || p.y > H) {
        throw GeometryError("diagram '" + diagram_id + "', element '" + e.id +
                            "': vertex outside image bounds");
      }
    }
  }
  return doc;
}

inline SyntheticCorpus generate_synthetic_corpus(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.min_elements > spec.max_elements || spec.min_elements == 0) {
    throw SpecError("infeasible element-count range [" + std::to_string(spec.min_elements) + ", " +
                    std::to_string(spec.max_elements) + "]");
  }
  if (spec.type_mix.empty()) throw SpecError("synthetic type mix is empty");
  std::vector<double> weights;
  for (const auto& [type, weight] : spec.type_mix) {
    coarse_type_for(type);  // validates the name
    if (weight < 0.0) throw SpecError("negative weight for type '" + type + "'");
    weights.push_back(weight);
  }
  if (std::accumulate(weights.begin(), weights.end(), 0.0) <= 0.0) {
    throw SpecError("synthetic type mix has zero total weight");
  }

  SyntheticCorpus corpus;
  for (std::size_t i = 0; i < spec.n_diagrams; ++i) {
    Rng rng(mix_seed(seed, i));
    const std::string& type = spec.type_mix[rng.weighted_index(weights)].first;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "SYN%05zu", i);
    corpus.documents.push_back(generate_synthetic_diagram(spec, type, buf, rng));
  }
  corpus.index = index_documents(corpus.documents);
  return corpus;
}

inline void write_corpus(const std::vector<DiagramDocument>& docs, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const DiagramDocument& doc : docs) {
    const fs::path path = fs::path(dir) / (doc.raw.diagram_id + ".json");
    std::ofstream out(path);
    if (!out) throw ReportError("cannot write '" + path.string() + "'");
    out << save_canonical(doc).dump(2) << '\n';
  }
}

}  // namespace diagraph
