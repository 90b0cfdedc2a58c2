#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "diagraph/annotation.hpp"
#include "diagraph/errors.hpp"

namespace diagraph {

struct CorpusEntry {
  std::string diagram_id;
  std::string ai2d_label;
  std::optional<std::string> rst_fine;
  std::optional<std::string> rst_coarse;
  std::string path;  // empty for in-memory corpora
};

struct CorpusIndex {
  std::vector<CorpusEntry> entries;
  std::vector<std::string> ai2d_vocab;
  std::vector<std::string> rst_fine_vocab;
  std::vector<std::string> rst_coarse_vocab;

  std::size_t size() const { return entries.size(); }
};

namespace detail {

inline void finish_vocabularies(CorpusIndex& index) {
  std::set<std::string> ai2d, fine, coarse;
  for (const CorpusEntry& e : index.entries) {
    ai2d.insert(e.ai2d_label);
    if (e.rst_fine) fine.insert(*e.rst_fine);
    if (e.rst_coarse) coarse.insert(*e.rst_coarse);
  }
  index.ai2d_vocab.assign(ai2d.begin(), ai2d.end());
  index.rst_fine_vocab.assign(fine.begin(), fine.end());
  index.rst_coarse_vocab.assign(coarse.begin(), coarse.end());
}

}  // namespace detail

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
  return doc;
}

inline DiagramDocument load_canonical_file(const std::string& path) {
  return load_canonical(read_json_file(path));
}

// Scans `root` for canonical *.json documents and builds the label index.
// With a subset list, only the listed diagram ids are indexed and RST labels
// become mandatory for them; an empty subset yields an empty index.
inline CorpusIndex build_corpus_index(
    const std::string& root,
    const std::optional<std::vector<std::string>>& subset = std::nullopt) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw ParseError("corpus root '" + root + "' is not a directory");

  CorpusIndex index;
  if (subset && subset->empty()) return index;

  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());

  std::optional<std::set<std::string>> wanted;
  if (subset) wanted.emplace(subset->begin(), subset->end());

  std::vector<std::string> missing_semantic, missing_rst;
  std::set<std::string> found_ids;
  for (const std::string& path : files) {
    const DiagramDocument doc = load_canonical_file(path);
    if (wanted && wanted->find(doc.raw.diagram_id) == wanted->end()) continue;
    found_ids.insert(doc.raw.diagram_id);
    CorpusEntry entry;
    entry.diagram_id = doc.raw.diagram_id;
    entry.path = path;
    if (doc.labels.ai2d) {
      entry.ai2d_label = *doc.labels.ai2d;
    } else {
      missing_semantic.push_back(doc.raw.diagram_id);
    }
    entry.rst_fine = doc.labels.rst_fine;
    entry.rst_coarse = doc.labels.rst_coarse;
    if (wanted && (!entry.rst_fine || !entry.rst_coarse)) {
      missing_rst.push_back(doc.raw.diagram_id);
    }
    index.entries.push_back(std::move(entry));
  }

  if (!missing_semantic.empty()) {
    std::string msg = "diagrams missing semantic label:";
    for (const std::string& id : missing_semantic) msg += " " + id;
    throw IndexError(msg);
  }
  if (!missing_rst.empty()) {
    std::string msg = "subset diagrams missing expert labels:";
    for (const std::string& id : missing_rst) msg += " " + id;
    throw IndexError(msg);
  }
  if (wanted) {
    std::vector<std::string> absent;
    for (const std::string& id : *wanted) {
      if (found_ids.find(id) == found_ids.end()) absent.push_back(id);
    }
    if (!absent.empty()) {
      std::string msg = "subset diagrams not found in corpus:";
      for (const std::string& id : absent) msg += " " + id;
      throw IndexError(msg);
    }
  }
  detail::finish_vocabularies(index);
  return index;
}

// Builds an index over documents already in memory (synthetic corpora).
inline CorpusIndex index_documents(const std::vector<DiagramDocument>& docs) {
  CorpusIndex index;
  for (const DiagramDocument& doc : docs) {
    CorpusEntry entry;
    entry.diagram_id = doc.raw.diagram_id;
    if (!doc.labels.ai2d) throw IndexError("diagram '" + doc.raw.diagram_id + "' missing semantic label");
    entry.ai2d_label = *doc.labels.ai2d;
    entry.rst_fine = doc.labels.rst_fine;
    entry.rst_coarse = doc.labels.rst_coarse;
    index.entries.push_back(std::move(entry));
  }
  detail::finish_vocabularies(index);
  return index;
}

inline std::vector<DiagramDocument> load_corpus(const CorpusIndex& index) {
  std::vector<DiagramDocument> docs;
  docs.reserve(index.entries.size());
  for (const CorpusEntry& e : index.entries) {
    if (e.path.empty()) throw UsageError("corpus entry '" + e.diagram_id + "' has no backing file");
    docs.push_back(load_canonical_file(e.path));
  }
  return docs;
}

inline std::vector<std::string> read_subset_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open subset list '" + path + "'");
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

}  // namespace diagraph
