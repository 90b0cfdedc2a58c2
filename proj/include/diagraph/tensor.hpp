#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diagraph/errors.hpp"
#include "diagraph/rng.hpp"

namespace diagraph {

// Dense row-major f64 matrix. All engine math is 64-bit.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
  std::size_t size() const { return a.size(); }

  static Mat row(const std::vector<double>& v) {
    Mat m(1, v.size());
    m.a = v;
    return m;
  }
  static Mat column(const std::vector<double>& v) {
    Mat m(v.size(), 1);
    m.a = v;
    return m;
  }
  static Mat from_rows(const std::vector<std::vector<double>>& rows_in) {
    Mat m(rows_in.size(), rows_in.empty() ? 0 : rows_in[0].size());
    for (std::size_t i = 0; i < rows_in.size(); ++i)
      for (std::size_t j = 0; j < m.cols; ++j) m.at(i, j) = rows_in[i][j];
    return m;
  }
  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
  }
};

inline Mat matmul_plain(const Mat& x, const Mat& y) {
  if (x.cols != y.rows) {
    throw ShapeError("matmul: " + x.shape_str() + " x " + y.shape_str());
  }
  Mat out(x.rows, y.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t k = 0; k < x.cols; ++k) {
      const double xv = x.at(i, k);
      if (xv == 0.0) continue;
      for (std::size_t j = 0; j < y.cols; ++j) {
        out.at(i, j) += xv * y.at(k, j);
      }
    }
  }
  return out;
}

// COO sparse matrix, used only as a constant operand (adjacency).
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_idx;
  std::vector<std::size_t> col_idx;
  std::vector<double> values;

  void add(std::size_t r, std::size_t c, double v) {
    row_idx.push_back(r);
    col_idx.push_back(c);
    values.push_back(v);
  }
  std::size_t nnz() const { return values.size(); }
};

inline Mat spmm_plain(const SparseMatrix& s, const Mat& h) {
  if (s.cols != h.rows) {
    throw ShapeError("spmm: sparse [" + std::to_string(s.rows) + "x" +
                     std::to_string(s.cols) + "] x " + h.shape_str());
  }
  Mat out(s.rows, h.cols);
  for (std::size_t k = 0; k < s.nnz(); ++k) {
    const std::size_t r = s.row_idx[k], c = s.col_idx[k];
    const double v = s.values[k];
    for (std::size_t j = 0; j < h.cols; ++j) out.at(r, j) += v * h.at(c, j);
  }
  return out;
}

inline Mat spmm_transpose_plain(const SparseMatrix& s, const Mat& h) {
  if (s.rows != h.rows) {
    throw ShapeError("spmm_t: sparse [" + std::to_string(s.rows) + "x" +
                     std::to_string(s.cols) + "]^T x " + h.shape_str());
  }
  Mat out(s.cols, h.cols);
  for (std::size_t k = 0; k < s.nnz(); ++k) {
    const std::size_t r = s.row_idx[k], c = s.col_idx[k];
    const double v = s.values[k];
    for (std::size_t j = 0; j < h.cols; ++j) out.at(c, j) += v * h.at(r, j);
  }
  return out;
}

// Handle into a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

// Trainable tensor plus persistent Adam state.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  Mat moment1;
  Mat moment2;
  std::int64_t steps = 0;

  Parameter() = default;
  Parameter(std::string n, Mat v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(value.rows, value.cols),
        moment1(value.rows, value.cols),
        moment2(value.rows, value.cols) {}

  void zero_grad() { std::fill(grad.a.begin(), grad.a.end(), 0.0); }
};

inline Mat glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Mat m(fan_in, fan_out);
  for (double& x : m.a) x = rng.uniform(-limit, limit);
  return m;
}

// Reverse-mode tape over dense matrices. Values are computed eagerly;
// backward() replays registered closures in reverse order.
class Tape {
 public:
  Var constant(Mat m) { return push(std::move(m), false, nullptr); }

  Var leaf(const Mat& m) { return push(m, true, nullptr); }

  const Mat& val(Var v) const { return nodes_[v.id].val; }
  const Mat& grad(Var v) const { return nodes_[v.id].grad; }

  Var add(Var a, Var b) {
    const Mat &x = val(a), &y = val(b);
    require_same(x, y, "add");
    Mat out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out.a[i] += y.a[i];
    return push(std::move(out), needs(a) || needs(b), [this, a, b](const Mat& g) {
      accumulate(a, g);
      accumulate(b, g);
    });
  }

  // bias: 1 x d row added to every row of a.
  Var add_row(Var a, Var bias) {
    const Mat &x = val(a), &b = val(bias);
    if (b.rows != 1 || b.cols != x.cols) {
      throw ShapeError("add_row: " + x.shape_str() + " + " + b.shape_str());
    }
    Mat out = x;
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = 0; j < x.cols; ++j) out.at(i, j) += b.at(0, j);
    return push(std::move(out), needs(a) || needs(bias), [this, a, bias](const Mat& g) {
      accumulate(a, g);
      if (needs(bias)) {
        Mat gb(1, g.cols);
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < g.cols; ++j) gb.at(0, j) += g.at(i, j);
        accumulate(bias, gb);
      }
    });
  }

  Var mul(Var a, Var b) {
    const Mat &x = val(a), &y = val(b);
    require_same(x, y, "mul");
    Mat out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out.a[i] *= y.a[i];
    return push(std::move(out), needs(a) || needs(b), [this, a, b](const Mat& g) {
      if (needs(a)) {
        Mat ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga.a[i] *= val(b).a[i];
        accumulate(a, ga);
      }
      if (needs(b)) {
        Mat gb = g;
        for (std::size_t i = 0; i < gb.size(); ++i) gb.a[i] *= val(a).a[i];
        accumulate(b, gb);
      }
    });
  }

  // column vector s (m x 1) scales each row of a (m x d).
  Var mul_col(Var a, Var s) {
    const Mat &x = val(a), &c = val(s);
    if (c.cols != 1 || c.rows != x.rows) {
      throw ShapeError("mul_col: " + x.shape_str() + " * " + c.shape_str());
    }
    Mat out = x;
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = 0; j < x.cols; ++j) out.at(i, j) *= c.at(i, 0);
    return push(std::move(out), needs(a) || needs(s), [this, a, s](const Mat& g) {
      const Mat &x = val(a), &c = val(s);
      if (needs(a)) {
        Mat ga = g;
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < g.cols; ++j) ga.at(i, j) *= c.at(i, 0);
        accumulate(a, ga);
      }
      if (needs(s)) {
        Mat gs(c.rows, 1);
        for (std::size_t i = 0; i < g.rows; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < g.cols; ++j) acc += g.at(i, j) * x.at(i, j);
          gs.at(i, 0) = acc;
        }
        accumulate(s, gs);
      }
    });
  }

  Var scale(Var a, double c) {
    Mat out = val(a);
    for (double& v : out.a) v *= c;
    return push(std::move(out), needs(a), [this, a, c](const Mat& g) {
      Mat ga = g;
      for (double& v : ga.a) v *= c;
      accumulate(a, ga);
    });
  }

  Var matmul(Var a, Var b) {
    Mat out = matmul_plain(val(a), val(b));
    return push(std::move(out), needs(a) || needs(b), [this, a, b](const Mat& g) {
      const Mat &x = val(a), &y = val(b);
      if (needs(a)) {  // g . y^T
        Mat ga(x.rows, x.cols);
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < g.cols; ++j) {
            const double gv = g.at(i, j);
            if (gv == 0.0) continue;
            for (std::size_t k = 0; k < x.cols; ++k) ga.at(i, k) += gv * y.at(k, j);
          }
        accumulate(a, ga);
      }
      if (needs(b)) {  // x^T . g
        Mat gb(y.rows, y.cols);
        for (std::size_t i = 0; i < x.rows; ++i)
          for (std::size_t k = 0; k < x.cols; ++k) {
            const double xv = x.at(i, k);
            if (xv == 0.0) continue;
            for (std::size_t j = 0; j < g.cols; ++j) gb.at(k, j) += xv * g.at(i, j);
          }
        accumulate(b, gb);
      }
    });
  }

  // S is a constant; only h receives gradient.
  Var spmm(std::shared_ptr<const SparseMatrix> s, Var h) {
    Mat out = spmm_plain(*s, val(h));
    return push(std::move(out), needs(h), [this, s, h](const Mat& g) {
      accumulate(h, spmm_transpose_plain(*s, g));
    });
  }

  Var relu(Var a) {
    Mat out = val(a);
    for (double& v : out.a) v = v > 0.0 ? v : 0.0;
    return push(std::move(out), needs(a), [this, a](const Mat& g) {
      Mat ga = g;
      const Mat& x = val(a);
      for (std::size_t i = 0; i < ga.size(); ++i)
        if (x.a[i] <= 0.0) ga.a[i] = 0.0;
      accumulate(a, ga);
    });
  }

  Var leaky_relu(Var a, double slope) {
    Mat out = val(a);
    for (double& v : out.a) v = v > 0.0 ? v : slope * v;
    return push(std::move(out), needs(a), [this, a, slope](const Mat& g) {
      Mat ga = g;
      const Mat& x = val(a);
      for (std::size_t i = 0; i < ga.size(); ++i)
        if (x.a[i] <= 0.0) ga.a[i] *= slope;
      accumulate(a, ga);
    });
  }

  Var sigmoid(Var a) {
    Mat out = val(a);
    for (double& v : out.a) v = 1.0 / (1.0 + std::exp(-v));
    return push(std::move(out), needs(a), [this, a](const Mat& g, const Mat& out) {
      Mat ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) ga.a[i] *= out.a[i] * (1.0 - out.a[i]);
      accumulate(a, ga);
    });
  }

  Var tanh(Var a) {
    Mat out = val(a);
    for (double& v : out.a) v = std::tanh(v);
    return push(std::move(out), needs(a), [this, a](const Mat& g, const Mat& out) {
      Mat ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) ga.a[i] *= 1.0 - out.a[i] * out.a[i];
      accumulate(a, ga);
    });
  }

  // Row-wise softmax; rows sum to 1.
  Var softmax_rows(Var a) {
    Mat out = val(a);
    for (std::size_t i = 0; i < out.rows; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < out.cols; ++j) mx = std::max(mx, out.at(i, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < out.cols; ++j) {
        out.at(i, j) = std::exp(out.at(i, j) - mx);
        sum += out.at(i, j);
      }
      for (std::size_t j = 0; j < out.cols; ++j) out.at(i, j) /= sum;
    }
    return push(std::move(out), needs(a), [this, a](const Mat& g, const Mat& p) {
      Mat ga(g.rows, g.cols);
      for (std::size_t i = 0; i < g.rows; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < g.cols; ++j) dot += g.at(i, j) * p.at(i, j);
        for (std::size_t j = 0; j < g.cols; ++j)
          ga.at(i, j) = p.at(i, j) * (g.at(i, j) - dot);
      }
      accumulate(a, ga);
    });
  }

  Var concat_cols(Var a, Var b) {
    const Mat &x = val(a), &y = val(b);
    if (x.rows != y.rows) {
      throw ShapeError("concat_cols: " + x.shape_str() + " | " + y.shape_str());
    }
    Mat out(x.rows, x.cols + y.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
      for (std::size_t j = 0; j < x.cols; ++j) out.at(i, j) = x.at(i, j);
      for (std::size_t j = 0; j < y.cols; ++j) out.at(i, x.cols + j) = y.at(i, j);
    }
    const std::size_t split = x.cols;
    return push(std::move(out), needs(a) || needs(b), [this, a, b, split](const Mat& g) {
      if (needs(a)) {
        Mat ga(g.rows, split);
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < split; ++j) ga.at(i, j) = g.at(i, j);
        accumulate(a, ga);
      }
      if (needs(b)) {
        Mat gb(g.rows, g.cols - split);
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < gb.cols; ++j) gb.at(i, j) = g.at(i, split + j);
        accumulate(b, gb);
      }
    });
  }

  Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    std::size_t total = 0;
    const std::size_t cols = val(parts[0]).cols;
    bool any = false;
    for (Var p : parts) {
      if (val(p).cols != cols) {
        throw ShapeError("concat_rows: column mismatch " + val(p).shape_str());
      }
      total += val(p).rows;
      any = any || needs(p);
    }
    Mat out(total, cols);
    std::size_t r = 0;
    for (Var p : parts) {
      const Mat& m = val(p);
      std::copy(m.a.begin(), m.a.end(), out.a.begin() + r * cols);
      r += m.rows;
    }
    return push(std::move(out), any, [this, parts](const Mat& g) {
      std::size_t r = 0;
      for (Var p : parts) {
        const std::size_t n = val(p).rows;
        if (needs(p)) {
          Mat gp(n, g.cols);
          std::copy(g.a.begin() + r * g.cols, g.a.begin() + (r + n) * g.cols, gp.a.begin());
          accumulate(p, gp);
        }
        r += n;
      }
    });
  }

  Var slice_rows(Var a, std::size_t r0, std::size_t r1) {
    const Mat& x = val(a);
    if (r0 > r1 || r1 > x.rows) {
      throw ShapeError("slice_rows: [" + std::to_string(r0) + "," + std::to_string(r1) +
                       ") of " + x.shape_str());
    }
    Mat out(r1 - r0, x.cols);
    std::copy(x.a.begin() + r0 * x.cols, x.a.begin() + r1 * x.cols, out.a.begin());
    return push(std::move(out), needs(a), [this, a, r0](const Mat& g) {
      Mat ga(val(a).rows, val(a).cols);
      std::copy(g.a.begin(), g.a.end(), ga.a.begin() + r0 * ga.cols);
      accumulate(a, ga);
    });
  }

  Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Mat& x = val(a);
    if (c0 > c1 || c1 > x.cols) {
      throw ShapeError("slice_cols: [" + std::to_string(c0) + "," + std::to_string(c1) +
                       ") of " + x.shape_str());
    }
    Mat out(x.rows, c1 - c0);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = c0; j < c1; ++j) out.at(i, j - c0) = x.at(i, j);
    return push(std::move(out), needs(a), [this, a, c0](const Mat& g) {
      Mat ga(val(a).rows, val(a).cols);
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) ga.at(i, c0 + j) = g.at(i, j);
      accumulate(a, ga);
    });
  }

  Var gather_rows(Var a, std::vector<std::size_t> idx) {
    const Mat& x = val(a);
    Mat out(idx.size(), x.cols);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] >= x.rows) throw ShapeError("gather_rows: index out of range");
      for (std::size_t j = 0; j < x.cols; ++j) out.at(k, j) = x.at(idx[k], j);
    }
    return push(std::move(out), needs(a), [this, a, idx = std::move(idx)](const Mat& g) {
      Mat ga(val(a).rows, val(a).cols);
      for (std::size_t k = 0; k < idx.size(); ++k)
        for (std::size_t j = 0; j < g.cols; ++j) ga.at(idx[k], j) += g.at(k, j);
      accumulate(a, ga);
    });
  }

  // out[segments[k]] += a[k]; out has n_out rows.
  Var scatter_sum_rows(Var a, std::vector<std::size_t> segments, std::size_t n_out) {
    const Mat& x = val(a);
    if (segments.size() != x.rows) {
      throw ShapeError("scatter_sum_rows: segment count " + std::to_string(segments.size()) +
                       " vs rows " + std::to_string(x.rows));
    }
    Mat out(n_out, x.cols);
    for (std::size_t k = 0; k < x.rows; ++k) {
      if (segments[k] >= n_out) throw ShapeError("scatter_sum_rows: segment out of range");
      for (std::size_t j = 0; j < x.cols; ++j) out.at(segments[k], j) += x.at(k, j);
    }
    return push(std::move(out), needs(a), [this, a, segments = std::move(segments)](const Mat& g) {
      Mat ga(val(a).rows, val(a).cols);
      for (std::size_t k = 0; k < ga.rows; ++k)
        for (std::size_t j = 0; j < g.cols; ++j) ga.at(k, j) = g.at(segments[k], j);
      accumulate(a, ga);
    });
  }

  // Softmax of a column of scores within each segment (m x 1 input).
  Var segment_softmax(Var scores, std::vector<std::size_t> segments) {
    const Mat& x = val(scores);
    if (x.cols != 1 || segments.size() != x.rows) {
      throw ShapeError("segment_softmax: want m x 1 scores with m segment ids");
    }
    std::size_t n_seg = 0;
    for (std::size_t s : segments) n_seg = std::max(n_seg, s + 1);
    std::vector<double> mx(n_seg, -std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < x.rows; ++k)
      mx[segments[k]] = std::max(mx[segments[k]], x.at(k, 0));
    Mat out = x;
    std::vector<double> sum(n_seg, 0.0);
    for (std::size_t k = 0; k < x.rows; ++k) {
      out.at(k, 0) = std::exp(x.at(k, 0) - mx[segments[k]]);
      sum[segments[k]] += out.at(k, 0);
    }
    for (std::size_t k = 0; k < x.rows; ++k) out.at(k, 0) /= sum[segments[k]];
    return push(std::move(out), needs(scores),
                [this, scores, segments = std::move(segments)](const Mat& g, const Mat& p) {
                  std::size_t n_seg = 0;
                  for (std::size_t s : segments) n_seg = std::max(n_seg, s + 1);
                  std::vector<double> dot(n_seg, 0.0);
                  for (std::size_t k = 0; k < g.rows; ++k)
                    dot[segments[k]] += g.at(k, 0) * p.at(k, 0);
                  Mat ga(g.rows, 1);
                  for (std::size_t k = 0; k < g.rows; ++k)
                    ga.at(k, 0) = p.at(k, 0) * (g.at(k, 0) - dot[segments[k]]);
                  accumulate(scores, ga);
                });
  }

  // Mean of member rows per segment; every segment must be non-empty.
  Var segment_mean_rows(Var a, std::vector<std::size_t> membership, std::size_t n_out) {
    const Mat& x = val(a);
    if (membership.size() != x.rows) {
      throw ShapeError("segment_mean_rows: membership size mismatch");
    }
    std::vector<double> count(n_out, 0.0);
    for (std::size_t m : membership) {
      if (m >= n_out) throw ShapeError("segment_mean_rows: membership out of range");
      count[m] += 1.0;
    }
    for (std::size_t g = 0; g < n_out; ++g) {
      if (count[g] == 0.0) {
        throw UsageError("segment_mean_rows: empty segment " + std::to_string(g));
      }
    }
    Mat out(n_out, x.cols);
    for (std::size_t k = 0; k < x.rows; ++k)
      for (std::size_t j = 0; j < x.cols; ++j)
        out.at(membership[k], j) += x.at(k, j) / count[membership[k]];
    return push(std::move(out), needs(a),
                [this, a, membership = std::move(membership), count](const Mat& g) {
                  Mat ga(val(a).rows, val(a).cols);
                  for (std::size_t k = 0; k < ga.rows; ++k)
                    for (std::size_t j = 0; j < g.cols; ++j)
                      ga.at(k, j) = g.at(membership[k], j) / count[membership[k]];
                  accumulate(a, ga);
                });
  }

  Var mean_rows(Var a) {
    const Mat& x = val(a);
    if (x.rows == 0) throw ShapeError("mean_rows: empty input");
    Mat out(1, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = 0; j < x.cols; ++j) out.at(0, j) += x.at(i, j);
    for (double& v : out.a) v /= static_cast<double>(x.rows);
    return push(std::move(out), needs(a), [this, a](const Mat& g) {
      const Mat& x = val(a);
      Mat ga(x.rows, x.cols);
      for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j)
          ga.at(i, j) = g.at(0, j) / static_cast<double>(x.rows);
      accumulate(a, ga);
    });
  }

  Var sum_all(Var a) {
    const Mat& x = val(a);
    Mat out(1, 1);
    for (double v : x.a) out.a[0] += v;
    return push(std::move(out), needs(a), [this, a](const Mat& g) {
      Mat ga(val(a).rows, val(a).cols, g.a[0]);
      accumulate(a, ga);
    });
  }

  // Mean over samples of weight[target] * (-log softmax(logits)[target]).
  Var weighted_cross_entropy(Var logits, const std::vector<int>& targets,
                             const std::vector<double>& weights) {
    const Mat& x = val(logits);
    if (targets.size() != x.rows) {
      throw ShapeError("weighted_cross_entropy: " + std::to_string(targets.size()) +
                       " targets vs " + std::to_string(x.rows) + " rows");
    }
    if (weights.size() != x.cols) {
      throw ShapeError("weighted_cross_entropy: " + std::to_string(weights.size()) +
                       " weights vs " + std::to_string(x.cols) + " classes");
    }
    for (int t : targets) {
      if (t < 0 || static_cast<std::size_t>(t) >= x.cols) {
        throw LabelError("weighted_cross_entropy: class index " + std::to_string(t) +
                         " out of range [0," + std::to_string(x.cols) + ")");
      }
    }
    const std::size_t n = x.rows;
    Mat out(1, 1);
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < x.cols; ++j) mx = std::max(mx, x.at(i, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < x.cols; ++j) sum += std::exp(x.at(i, j) - mx);
      const double lse = mx + std::log(sum);
      out.a[0] += weights[targets[i]] * (lse - x.at(i, targets[i]));
    }
    out.a[0] /= static_cast<double>(n);
    return push(std::move(out), needs(logits),
                [this, logits, targets, weights](const Mat& g) {
                  const Mat& x = val(logits);
                  const std::size_t n = x.rows;
                  Mat ga(x.rows, x.cols);
                  for (std::size_t i = 0; i < n; ++i) {
                    double mx = -std::numeric_limits<double>::infinity();
                    for (std::size_t j = 0; j < x.cols; ++j) mx = std::max(mx, x.at(i, j));
                    double sum = 0.0;
                    for (std::size_t j = 0; j < x.cols; ++j) sum += std::exp(x.at(i, j) - mx);
                    const double w = weights[targets[i]] * g.a[0] / static_cast<double>(n);
                    for (std::size_t j = 0; j < x.cols; ++j) {
                      const double p = std::exp(x.at(i, j) - mx) / sum;
                      ga.at(i, j) = w * (p - (static_cast<std::size_t>(targets[i]) == j ? 1.0 : 0.0));
                    }
                  }
                  accumulate(logits, ga);
                });
  }

  // Seeds d(out)/d(out) = 1 and replays the tape. out must be scalar.
  void backward(Var out) {
    const Mat& o = val(out);
    if (o.rows != 1 || o.cols != 1) {
      throw ShapeError("backward: output must be 1x1, got " + o.shape_str());
    }
    if (!nodes_[out.id].needs_grad) return;
    nodes_[out.id].grad.a[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (n.needs_grad && n.back) n.back(n.grad, n.val);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat val;
    Mat grad;
    bool needs_grad = false;
    std::function<void(const Mat& grad, const Mat& out)> back;
  };

  bool needs(Var v) const { return nodes_[v.id].needs_grad; }

  void accumulate(Var v, const Mat& g) {
    if (!needs(v)) return;
    Mat& dst = nodes_[v.id].grad;
    for (std::size_t i = 0; i < dst.size(); ++i) dst.a[i] += g.a[i];
  }

  static void require_same(const Mat& x, const Mat& y, const char* op) {
    if (!x.same_shape(y)) {
      throw ShapeError(std::string(op) + ": " + x.shape_str() + " vs " + y.shape_str());
    }
  }

  template <typename F>
  Var push(Mat m, bool needs_grad, F&& back) {
    Node n;
    n.val = std::move(m);
    n.needs_grad = needs_grad;
    if (needs_grad) {
      n.grad = Mat(n.val.rows, n.val.cols);
      if constexpr (!std::is_same_v<std::decay_t<F>, std::nullptr_t>) {
        if constexpr (std::is_invocable_v<F, const Mat&, const Mat&>) {
          n.back = std::forward<F>(back);
        } else {
          n.back = [f = std::forward<F>(back)](const Mat& g, const Mat&) { f(g); };
        }
      }
    }
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

// One gated recurrence step. weight is (in+hidden) x 4*hidden with gate
// order [input, forget, output, candidate]; bias is 1 x 4*hidden.
struct LstmState {
  Var h;
  Var c;
};

inline LstmState lstm_cell(Tape& t, Var x, Var h_prev, Var c_prev, Var weight, Var bias) {
  const std::size_t hidden = t.val(h_prev).cols;
  Var gates = t.add_row(t.matmul(t.concat_cols(x, h_prev), weight), bias);
  Var i = t.sigmoid(t.slice_cols(gates, 0, hidden));
  Var f = t.sigmoid(t.slice_cols(gates, hidden, 2 * hidden));
  Var o = t.sigmoid(t.slice_cols(gates, 2 * hidden, 3 * hidden));
  Var g = t.tanh(t.slice_cols(gates, 3 * hidden, 4 * hidden));
  Var c = t.add(t.mul(f, c_prev), t.mul(i, g));
  Var h = t.mul(o, t.tanh(c));
  return {h, c};
}

// Folds the steps left to right; nullopt on an empty sequence (caller
// substitutes the zero vector).
inline std::optional<Var> lstm_sequence(Tape& t, const std::vector<Var>& steps,
                                        Var weight, Var bias, std::size_t hidden) {
  if (steps.empty()) return std::nullopt;
  const std::size_t batch = t.val(steps[0]).rows;
  LstmState s{t.constant(Mat(batch, hidden)), t.constant(Mat(batch, hidden))};
  for (Var x : steps) s = lstm_cell(t, x, s.h, s.c, weight, bias);
  return s.h;
}

// Adam with bias correction; the L2 penalty enters as an additive
// gradient term before the moment updates.
struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline void adam_step(std::vector<Parameter>& params, double lr, double l2_penalty,
                      const AdamConfig& cfg = {}) {
  for (Parameter& p : params) {
    p.steps += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.steps));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.steps));
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.a[i] + l2_penalty * p.value.a[i];
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient in " + p.name);
      }
      p.moment1.a[i] = cfg.beta1 * p.moment1.a[i] + (1.0 - cfg.beta1) * g;
      p.moment2.a[i] = cfg.beta2 * p.moment2.a[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p.moment1.a[i] / bc1;
      const double vhat = p.moment2.a[i] / bc2;
      p.value.a[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

// Central-difference check of a scalar function of the parameters.
// fn(true) must leave analytic gradients in each Parameter::grad;
// fn(false) only returns the loss. Returns the max relative error.
inline double gradient_check(const std::vector<Parameter*>& params,
                             const std::function<double(bool with_grad)>& fn,
                             double epsilon = 1e-5) {
  for (Parameter* p : params) p->zero_grad();
  fn(true);
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value.a[i];
      p.value.a[i] = saved + epsilon;
      const double fp = fn(false);
      p.value.a[i] = saved - epsilon;
      const double fm = fn(false);
      p.value.a[i] = saved;
      const double numeric = (fp - fm) / (2.0 * epsilon);
      const double ana = analytic[pi].a[i];
      const double denom = std::abs(numeric) + std::abs(ana);
      const double rel = denom < 1e-10 ? 0.0 : std::abs(numeric - ana) / denom;
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace diagraph
