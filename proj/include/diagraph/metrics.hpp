#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "diagraph/errors.hpp"

namespace diagraph {

struct ConfusionMatrix {
  std::size_t n_classes = 0;
  std::vector<std::size_t> counts;  // row = true class, column = predicted

  explicit ConfusionMatrix(std::size_t c) : n_classes(c), counts(c * c, 0) {
    if (c == 0) throw SpecError("confusion matrix needs at least one class");
  }

  static ConfusionMatrix from_predictions(const std::vector<int>& y_true,
                                          const std::vector<int>& y_pred, std::size_t n_classes) {
    if (y_true.size() != y_pred.size()) {
      throw ShapeError("prediction count " + std::to_string(y_pred.size()) +
                       " does not match target count " + std::to_string(y_true.size()));
    }
    ConfusionMatrix m(n_classes);
    for (std::size_t i = 0; i < y_true.size(); ++i) m.add(y_true[i], y_pred[i]);
    return m;
  }

  void add(int t, int p) {
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes ||
        static_cast<std::size_t>(p) >= n_classes) {
      throw LabelError("class index out of range: true=" + std::to_string(t) +
                       " pred=" + std::to_string(p) + " classes=" + std::to_string(n_classes));
    }
    counts[static_cast<std::size_t>(t) * n_classes + static_cast<std::size_t>(p)] += 1;
  }

  std::size_t at(std::size_t t, std::size_t p) const { return counts[t * n_classes + p]; }

  std::size_t total() const {
    std::size_t s = 0;
    for (std::size_t c : counts) s += c;
    return s;
  }
};

namespace detail {

struct ClassScores {
  std::vector<double> f1;
  std::vector<std::size_t> support;
};

inline ClassScores per_class_f1(const ConfusionMatrix& m) {
  ClassScores out;
  out.f1.resize(m.n_classes, 0.0);
  out.support.resize(m.n_classes, 0);
  for (std::size_t c = 0; c < m.n_classes; ++c) {
    std::size_t tp = m.at(c, c), fp = 0, fn = 0;
    for (std::size_t o = 0; o < m.n_classes; ++o) {
      if (o == c) continue;
      fp += m.at(o, c);
      fn += m.at(c, o);
    }
    const double precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    out.f1[c] = (precision + recall > 0.0) ? 2.0 * precision * recall / (precision + recall) : 0.0;
    for (std::size_t o = 0; o < m.n_classes; ++o) out.support[c] += m.at(c, o);
  }
  return out;
}

}  // namespace detail

inline double accuracy(const ConfusionMatrix& m) {
  const std::size_t total = m.total();
  if (total == 0) throw SpecError("empty confusion matrix");
  std::size_t correct = 0;
  for (std::size_t c = 0; c < m.n_classes; ++c) correct += m.at(c, c);
  return static_cast<double>(correct) / static_cast<double>(total);
}

// Unweighted mean of per-class F1; classes absent from the data score 0.
inline double macro_f1(const ConfusionMatrix& m) {
  if (m.total() == 0) throw SpecError("empty confusion matrix");
  const auto scores = detail::per_class_f1(m);
  double sum = 0.0;
  for (double f : scores.f1) sum += f;
  return sum / static_cast<double>(m.n_classes);
}

// Support-weighted mean of per-class F1.
inline double weighted_f1(const ConfusionMatrix& m) {
  const std::size_t total = m.total();
  if (total == 0) throw SpecError("empty confusion matrix");
  const auto scores = detail::per_class_f1(m);
  double sum = 0.0;
  for (std::size_t c = 0; c < m.n_classes; ++c) {
    sum += static_cast<double>(scores.support[c]) * scores.f1[c];
  }
  return sum / static_cast<double>(total);
}

}  // namespace diagraph
