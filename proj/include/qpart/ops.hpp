#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "qpart/tensor.hpp"

// Differentiable primitives. Forward values are stored in S; reductions and
// all gradient accumulation run in 64-bit.

namespace qpart::diff {

namespace detail {

template <typename S>
inline void check_same_shape(const char* op, const TensorT<S>& a, const TensorT<S>& b) {
  if (a.shape != b.shape)
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
}

template <typename S>
inline GraphT<S>* graph_of(const TensorT<S>& a) {
  return a.on_graph() ? a.graph : nullptr;
}

template <typename S>
inline GraphT<S>* graph_of(const TensorT<S>& a, const TensorT<S>& b) {
  GraphT<S>* g = a.on_graph() ? a.graph : (b.on_graph() ? b.graph : nullptr);
  if (a.on_graph() && b.on_graph() && a.graph != b.graph)
    throw std::logic_error("operands belong to different graphs");
  if (!g) throw std::logic_error("operation requires at least one graph operand");
  return g;
}

// Index mapping for reductions over an axis subset.
struct ReduceMap {
  Shape in_shape;
  std::vector<char> keep;               // per input dim
  std::vector<std::size_t> out_stride;  // per input dim; 0 for reduced dims
  Shape out;
  std::size_t out_size = 1;
  std::size_t count = 1;  // elements reduced per output slot

  ReduceMap(const Shape& shape, const std::vector<int>& axes) : in_shape(shape) {
    keep.assign(shape.size(), 1);
    for (int a : axes) {
      if (a < 0 || a >= static_cast<int>(shape.size()))
        throw ShapeError("reduce: axis " + std::to_string(a) + " out of range for " +
                         shape_str(shape));
      keep[a] = 0;
    }
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (keep[d]) out.push_back(shape[d]);
      else count *= static_cast<std::size_t>(shape[d]);
    }
    if (out.empty()) out = {1};
    out_size = numel(out);
    out_stride.assign(shape.size(), 0);
    std::size_t stride = 1;
    for (int d = static_cast<int>(shape.size()) - 1; d >= 0; --d) {
      if (keep[d]) {
        out_stride[d] = stride;
        stride *= static_cast<std::size_t>(shape[d]);
      }
    }
  }

  Shape out_shape() const { return out; }

  std::size_t out_index(std::size_t linear) const {
    std::size_t idx = 0;
    for (int d = static_cast<int>(in_shape.size()) - 1; d >= 0; --d) {
      const std::size_t dim = static_cast<std::size_t>(in_shape[d]);
      const std::size_t coord = linear % dim;
      linear /= dim;
      idx += coord * out_stride[d];
    }
    return idx;
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise binary

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check_same_shape("add", a, b);
  auto* g = detail::graph_of(a, b);
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*a.data)[i] + (*b.data)[i];
  const int ia = a.node, ib = b.node;
  return g->record(a.shape, std::move(out), [ia, ib](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    if (ia >= 0) {
      auto& ga = g.gbuf(ia);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (ib >= 0) {
      auto& gb = g.gbuf(ib);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
    }
  });
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check_same_shape("subtract", a, b);
  auto* g = detail::graph_of(a, b);
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*a.data)[i] - (*b.data)[i];
  const int ia = a.node, ib = b.node;
  return g->record(a.shape, std::move(out), [ia, ib](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    if (ia >= 0) {
      auto& ga = g.gbuf(ia);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (ib >= 0) {
      auto& gb = g.gbuf(ib);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
    }
  });
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check_same_shape("multiply", a, b);
  auto* g = detail::graph_of(a, b);
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*a.data)[i] * (*b.data)[i];
  const int ia = a.node, ib = b.node;
  auto da = a.data, db = b.data;
  return g->record(a.shape, std::move(out), [ia, ib, da, db](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    if (ia >= 0) {
      auto& ga = g.gbuf(ia);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * static_cast<double>((*db)[i]);
    }
    if (ib >= 0) {
      auto& gb = g.gbuf(ib);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * static_cast<double>((*da)[i]);
    }
  });
}

// ---------------------------------------------------------------------------
// elementwise unary

template <typename S>
TensorT<S> scale(const TensorT<S>& a, double c) {
  auto* g = detail::graph_of(a, a);
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<S>((*a.data)[i] * c);
  const int ia = a.node;
  return g->record(a.shape, std::move(out), [ia, c](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    auto& ga = g.gbuf(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * c;
  });
}

template <typename S>
TensorT<S> offset(const TensorT<S>& a, double c) {
  auto* g = detail::graph_of(a, a);
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<S>((*a.data)[i] + c);
  const int ia = a.node;
  return g->record(a.shape, std::move(out), [ia](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    auto& ga = g.gbuf(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
  });
}

template <typename S>
TensorT<S> relu(const TensorT<S>& a) {
  auto* g = detail::graph_of(a, a);
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*a.data)[i] > S(0) ? (*a.data)[i] : S(0);
  const int ia = a.node;
  auto da = a.data;
  return g->record(a.shape, std::move(out), [ia, da](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    auto& ga = g.gbuf(ia);
    for (std::size_t i = 0; i < go.size(); ++i)
      if ((*da)[i] > S(0)) ga[i] += go[i];
  });
}

template <typename S>
TensorT<S> tanh_(const TensorT<S>& a) {
  auto* g = detail::graph_of(a, a);
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    out[i] = static_cast<S>(std::tanh(static_cast<double>((*a.data)[i])));
  const int ia = a.node;
  TensorT<S> t = g->record(a.shape, std::move(out), [ia](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    const auto& y = *g.value(self).data;
    auto& ga = g.gbuf(ia);
    for (std::size_t i = 0; i < go.size(); ++i) {
      const double yv = static_cast<double>(y[i]);
      ga[i] += go[i] * (1.0 - yv * yv);
    }
  });
  return t;
}

template <typename S>
TensorT<S> softplus(const TensorT<S>& a) {
  auto* g = detail::graph_of(a, a);
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = static_cast<double>((*a.data)[i]);
    double y;
    if (x > 20.0) y = x;
    else if (x < -20.0) y = std::exp(x);
    else y = std::log1p(std::exp(x));
    out[i] = static_cast<S>(y);
  }
  const int ia = a.node;
  auto da = a.data;
  return g->record(a.shape, std::move(out), [ia, da](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    auto& ga = g.gbuf(ia);
    for (std::size_t i = 0; i < go.size(); ++i) {
      const double x = static_cast<double>((*da)[i]);
      const double sig = 1.0 / (1.0 + std::exp(-x));
      ga[i] += go[i] * sig;
    }
  });
}

template <typename S>
TensorT<S> sin_(const TensorT<S>& a) {
  auto* g = detail::graph_of(a, a);
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<S>(std::sin(static_cast<double>((*a.data)[i])));
  const int ia = a.node;
  auto da = a.data;
  return g->record(a.shape, std::move(out), [ia, da](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    auto& ga = g.gbuf(ia);
    for (std::size_t i = 0; i < go.size(); ++i)
      ga[i] += go[i] * std::cos(static_cast<double>((*da)[i]));
  });
}

template <typename S>
TensorT<S> cos_(const TensorT<S>& a) {
  auto* g = detail::graph_of(a, a);
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<S>(std::cos(static_cast<double>((*a.data)[i])));
  const int ia = a.node;
  auto da = a.data;
  return g->record(a.shape, std::move(out), [ia, da](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    auto& ga = g.gbuf(ia);
    for (std::size_t i = 0; i < go.size(); ++i)
      ga[i] -= go[i] * std::sin(static_cast<double>((*da)[i]));
  });
}

template <typename S>
TensorT<S> rsqrt(const TensorT<S>& a) {
  auto* g = detail::graph_of(a, a);
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<S>(1.0 / std::sqrt(static_cast<double>((*a.data)[i])));
  const int ia = a.node;
  auto da = a.data;
  return g->record(a.shape, std::move(out), [ia, da](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    auto& ga = g.gbuf(ia);
    for (std::size_t i = 0; i < go.size(); ++i) {
      const double x = static_cast<double>((*da)[i]);
      ga[i] += go[i] * (-0.5 / (x * std::sqrt(x)));
    }
  });
}

// ---------------------------------------------------------------------------
// structure

template <typename S>
TensorT<S> reshape(const TensorT<S>& a, Shape shape) {
  if (numel(shape) != a.size())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape) + " as " + shape_str(shape));
  auto* g = detail::graph_of(a, a);
  std::vector<S> out(*a.data);
  const int ia = a.node;
  return g->record(std::move(shape), std::move(out), [ia](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    auto& ga = g.gbuf(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
  });
}

// Rows of a 2-D tensor gathered by index; also used for row permutations.
template <typename S>
TensorT<S> gather_rows(const TensorT<S>& a, std::vector<int> idx) {
  if (a.shape.size() != 2) throw ShapeError("gather_rows: need 2-d input, got " + shape_str(a.shape));
  const int rows = a.shape[0], cols = a.shape[1];
  for (int r : idx)
    if (r < 0 || r >= rows) throw ShapeError("gather_rows: row index out of range");
  auto* g = detail::graph_of(a, a);
  std::vector<S> out(idx.size() * static_cast<std::size_t>(cols));
  for (std::size_t k = 0; k < idx.size(); ++k)
    std::copy_n(a.data->begin() + static_cast<std::size_t>(idx[k]) * cols, cols,
                out.begin() + k * cols);
  const int ia = a.node;
  const int nout = static_cast<int>(idx.size());
  return g->record({nout, cols}, std::move(out),
                   [ia, idx = std::move(idx), cols](GraphT<S>& g, int self) {
                     const auto& go = g.gbuf(self);
                     auto& ga = g.gbuf(ia);
                     for (std::size_t k = 0; k < idx.size(); ++k)
                       for (int c = 0; c < cols; ++c)
                         ga[static_cast<std::size_t>(idx[k]) * cols + c] += go[k * cols + c];
                   });
}

// Stack equal-width 2-D tensors along rows.
template <typename S>
TensorT<S> concat_rows(const std::vector<TensorT<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty list");
  const int cols = parts[0].shape.size() == 2 ? parts[0].shape[1] : -1;
  if (cols < 0) throw ShapeError("concat_rows: need 2-d inputs");
  int rows = 0;
  for (const auto& p : parts) {
    if (p.shape.size() != 2 || p.shape[1] != cols)
      throw ShapeError("concat_rows: shape mismatch " + shape_str(parts[0].shape) + " vs " +
                       shape_str(p.shape));
    rows += p.shape[0];
  }
  auto* g = detail::graph_of(parts[0], parts[0]);
  std::vector<S> out;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  std::vector<int> ids;
  std::vector<int> part_rows;
  for (const auto& p : parts) {
    out.insert(out.end(), p.data->begin(), p.data->end());
    ids.push_back(p.node);
    part_rows.push_back(p.shape[0]);
  }
  return g->record({rows, cols}, std::move(out),
                   [ids = std::move(ids), part_rows = std::move(part_rows), cols](GraphT<S>& g,
                                                                                  int self) {
                     const auto& go = g.gbuf(self);
                     std::size_t row0 = 0;
                     for (std::size_t k = 0; k < ids.size(); ++k) {
                       if (ids[k] >= 0) {
                         auto& gp = g.gbuf(ids[k]);
                         for (std::size_t i = 0; i < gp.size(); ++i)
                           gp[i] += go[row0 * cols + i];
                       }
                       row0 += static_cast<std::size_t>(part_rows[k]);
                     }
                   });
}

template <typename S>
TensorT<S> concat_cols(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[0] != b.shape[0])
    throw ShapeError("concat_cols: shape mismatch " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
  auto* g = detail::graph_of(a, b);
  const int rows = a.shape[0], ca = a.shape[1], cb = b.shape[1];
  std::vector<S> out(static_cast<std::size_t>(rows) * (ca + cb));
  for (int r = 0; r < rows; ++r) {
    std::copy_n(a.data->begin() + static_cast<std::size_t>(r) * ca, ca,
                out.begin() + static_cast<std::size_t>(r) * (ca + cb));
    std::copy_n(b.data->begin() + static_cast<std::size_t>(r) * cb, cb,
                out.begin() + static_cast<std::size_t>(r) * (ca + cb) + ca);
  }
  const int ia = a.node, ib = b.node;
  return g->record({rows, ca + cb}, std::move(out),
                   [ia, ib, rows, ca, cb](GraphT<S>& g, int self) {
                     const auto& go = g.gbuf(self);
                     if (ia >= 0) {
                       auto& ga = g.gbuf(ia);
                       for (int r = 0; r < rows; ++r)
                         for (int c = 0; c < ca; ++c)
                           ga[static_cast<std::size_t>(r) * ca + c] +=
                               go[static_cast<std::size_t>(r) * (ca + cb) + c];
                     }
                     if (ib >= 0) {
                       auto& gb = g.gbuf(ib);
                       for (int r = 0; r < rows; ++r)
                         for (int c = 0; c < cb; ++c)
                           gb[static_cast<std::size_t>(r) * cb + c] +=
                               go[static_cast<std::size_t>(r) * (ca + cb) + ca + c];
                     }
                   });
}

// ---------------------------------------------------------------------------
// reductions

template <typename S>
TensorT<S> mean(const TensorT<S>& a, std::vector<int> axes) {
  auto* g = detail::graph_of(a, a);
  if (axes.empty())
    for (std::size_t d = 0; d < a.shape.size(); ++d) axes.push_back(static_cast<int>(d));
  detail::ReduceMap map(a.shape, axes);
  std::vector<double> acc(map.out_size, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    acc[map.out_index(i)] += static_cast<double>((*a.data)[i]);
  std::vector<S> out(map.out_size);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<S>(acc[i] / static_cast<double>(map.count));
  const int ia = a.node;
  return g->record(map.out_shape(), std::move(out), [ia, map](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    auto& ga = g.gbuf(ia);
    const double inv = 1.0 / static_cast<double>(map.count);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[map.out_index(i)] * inv;
  });
}

template <typename S>
TensorT<S> squared_error_mean(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check_same_shape("squared_error", a, b);
  auto* g = detail::graph_of(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>((*a.data)[i]) - static_cast<double>((*b.data)[i]);
    acc += d * d;
  }
  const double n = static_cast<double>(a.size());
  const int ia = a.node, ib = b.node;
  auto da = a.data, db = b.data;
  return g->record({1}, {static_cast<S>(acc / n)}, [ia, ib, da, db, n](GraphT<S>& g, int self) {
    const double go = g.gbuf(self)[0];
    const double c = 2.0 * go / n;
    for (std::size_t i = 0; i < da->size(); ++i) {
      const double d = static_cast<double>((*da)[i]) - static_cast<double>((*db)[i]);
      if (ia >= 0) g.gbuf(ia)[i] += c * d;
      if (ib >= 0) g.gbuf(ib)[i] -= c * d;
    }
  });
}

// x - s broadcast over all elements (s scalar tensor).
template <typename S>
TensorT<S> sub_bcast_scalar(const TensorT<S>& x, const TensorT<S>& s) {
  if (numel(s.shape) != 1)
    throw ShapeError("sub_bcast_scalar: subtrahend must be scalar, got " + shape_str(s.shape));
  auto* g = detail::graph_of(x, s);
  const S sv = (*s.data)[0];
  std::vector<S> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*x.data)[i] - sv;
  const int ix = x.node, is = s.node;
  return g->record(x.shape, std::move(out), [ix, is](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    if (ix >= 0) {
      auto& gx = g.gbuf(ix);
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    }
    if (is >= 0) {
      double acc = 0.0;
      for (double v : go) acc += v;
      g.gbuf(is)[0] -= acc;
    }
  });
}

// ---------------------------------------------------------------------------
// linear algebra

template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
    throw ShapeError("matmul: shape mismatch " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
  auto* g = detail::graph_of(a, b);
  const int M = a.shape[0], K = a.shape[1], N = b.shape[1];
  std::vector<S> out(static_cast<std::size_t>(M) * N);
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n) {
      double acc = 0.0;
      for (int k = 0; k < K; ++k)
        acc += static_cast<double>((*a.data)[static_cast<std::size_t>(m) * K + k]) *
               static_cast<double>((*b.data)[static_cast<std::size_t>(k) * N + n]);
      out[static_cast<std::size_t>(m) * N + n] = static_cast<S>(acc);
    }
  const int ia = a.node, ib = b.node;
  auto da = a.data, db = b.data;
  return g->record({M, N}, std::move(out), [ia, ib, da, db, M, K, N](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    if (ia >= 0) {
      auto& ga = g.gbuf(ia);
      for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k) {
          double acc = 0.0;
          for (int n = 0; n < N; ++n)
            acc += go[static_cast<std::size_t>(m) * N + n] *
                   static_cast<double>((*db)[static_cast<std::size_t>(k) * N + n]);
          ga[static_cast<std::size_t>(m) * K + k] += acc;
        }
    }
    if (ib >= 0) {
      auto& gb = g.gbuf(ib);
      for (int k = 0; k < K; ++k)
        for (int n = 0; n < N; ++n) {
          double acc = 0.0;
          for (int m = 0; m < M; ++m)
            acc += static_cast<double>((*da)[static_cast<std::size_t>(m) * K + k]) *
                   go[static_cast<std::size_t>(m) * N + n];
          gb[static_cast<std::size_t>(k) * N + n] += acc;
        }
    }
  });
}

// X (M,N) + v (N) broadcast over rows.
template <typename S>
TensorT<S> add_rowvec(const TensorT<S>& x, const TensorT<S>& v) {
  if (x.shape.size() != 2 || v.shape.size() != 1 || x.shape[1] != v.shape[0])
    throw ShapeError("add_rowvec: shape mismatch " + shape_str(x.shape) + " vs " +
                     shape_str(v.shape));
  auto* g = detail::graph_of(x, v);
  const int M = x.shape[0], N = x.shape[1];
  std::vector<S> out(x.size());
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n)
      out[static_cast<std::size_t>(m) * N + n] =
          (*x.data)[static_cast<std::size_t>(m) * N + n] + (*v.data)[n];
  const int ix = x.node, iv = v.node;
  return g->record(x.shape, std::move(out), [ix, iv, M, N](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    if (ix >= 0) {
      auto& gx = g.gbuf(ix);
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    }
    if (iv >= 0) {
      auto& gv = g.gbuf(iv);
      for (int n = 0; n < N; ++n) {
        double acc = 0.0;
        for (int m = 0; m < M; ++m) acc += go[static_cast<std::size_t>(m) * N + n];
        gv[n] += acc;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// per-channel broadcast over NCHW (the only broadcasting the engine allows)

namespace detail {
template <typename S>
inline void check_chan(const char* op, const TensorT<S>& x, const TensorT<S>& c) {
  if (x.shape.size() != 4 || c.shape.size() != 1 || c.shape[0] != x.shape[1])
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(x.shape) + " vs " +
                     shape_str(c.shape));
}
}  // namespace detail

template <typename S, typename FwdOp>
TensorT<S> chan_apply(const char* name, const TensorT<S>& x, const TensorT<S>& c, FwdOp fwd,
                      bool is_mul) {
  detail::check_chan(name, x, c);
  auto* g = detail::graph_of(x, c);
  const int N = x.shape[0], C = x.shape[1];
  const std::size_t HW = static_cast<std::size_t>(x.shape[2]) * x.shape[3];
  std::vector<S> out(x.size());
  for (int n = 0; n < N; ++n)
    for (int ch = 0; ch < C; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + ch) * HW;
      const S cv = (*c.data)[ch];
      for (std::size_t i = 0; i < HW; ++i) out[base + i] = fwd((*x.data)[base + i], cv);
    }
  const int ix = x.node, ic = c.node;
  auto dx = x.data, dc = c.data;
  return g->record(x.shape, std::move(out),
                   [ix, ic, dx, dc, N, C, HW, is_mul](GraphT<S>& g, int self) {
                     const auto& go = g.gbuf(self);
                     for (int n = 0; n < N; ++n)
                       for (int ch = 0; ch < C; ++ch) {
                         const std::size_t base = (static_cast<std::size_t>(n) * C + ch) * HW;
                         if (is_mul) {
                           const double cv = static_cast<double>((*dc)[ch]);
                           if (ix >= 0) {
                             auto& gx = g.gbuf(ix);
                             for (std::size_t i = 0; i < HW; ++i) gx[base + i] += go[base + i] * cv;
                           }
                           if (ic >= 0) {
                             double acc = 0.0;
                             for (std::size_t i = 0; i < HW; ++i)
                               acc += go[base + i] * static_cast<double>((*dx)[base + i]);
                             g.gbuf(ic)[ch] += acc;
                           }
                         } else {
                           if (ix >= 0) {
                             auto& gx = g.gbuf(ix);
                             for (std::size_t i = 0; i < HW; ++i) gx[base + i] += go[base + i];
                           }
                           if (ic >= 0) {
                             double acc = 0.0;
                             for (std::size_t i = 0; i < HW; ++i) acc += go[base + i];
                             g.gbuf(ic)[ch] += acc;
                           }
                         }
                       }
                   });
}

template <typename S>
TensorT<S> chan_mul(const TensorT<S>& x, const TensorT<S>& s) {
  return chan_apply(
      "chan_mul", x, s, [](S a, S b) { return a * b; }, true);
}

template <typename S>
TensorT<S> chan_add(const TensorT<S>& x, const TensorT<S>& b) {
  return chan_apply(
      "chan_add", x, b, [](S a, S c) { return a + c; }, false);
}

template <typename S>
TensorT<S> chan_sub(const TensorT<S>& x, const TensorT<S>& m) {
  detail::check_chan("chan_sub", x, m);
  auto* g = detail::graph_of(x, m);
  const int N = x.shape[0], C = x.shape[1];
  const std::size_t HW = static_cast<std::size_t>(x.shape[2]) * x.shape[3];
  std::vector<S> out(x.size());
  for (int n = 0; n < N; ++n)
    for (int ch = 0; ch < C; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + ch) * HW;
      const S mv = (*m.data)[ch];
      for (std::size_t i = 0; i < HW; ++i) out[base + i] = (*x.data)[base + i] - mv;
    }
  const int ix = x.node, im = m.node;
  return g->record(x.shape, std::move(out), [ix, im, N, C, HW](GraphT<S>& g, int self) {
    const auto& go = g.gbuf(self);
    for (int n = 0; n < N; ++n)
      for (int ch = 0; ch < C; ++ch) {
        const std::size_t base = (static_cast<std::size_t>(n) * C + ch) * HW;
        if (ix >= 0) {
          auto& gx = g.gbuf(ix);
          for (std::size_t i = 0; i < HW; ++i) gx[base + i] += go[base + i];
        }
        if (im >= 0) {
          double acc = 0.0;
          for (std::size_t i = 0; i < HW; ++i) acc += go[base + i];
          g.gbuf(im)[ch] -= acc;
        }
      }
  });
}

// ---------------------------------------------------------------------------
// convolution (direct, NCHW; weight layout Cout,Cin,kh,kw)

template <typename S>
TensorT<S> conv2d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b, int stride,
                  int pad) {
  if (x.shape.size() != 4 || w.shape.size() != 4 || x.shape[1] != w.shape[1])
    throw ShapeError("conv2d: shape mismatch " + shape_str(x.shape) + " vs " +
                     shape_str(w.shape));
  if (b.shape.size() != 1 || b.shape[0] != w.shape[0])
    throw ShapeError("conv2d: bias shape " + shape_str(b.shape) + " vs weight " +
                     shape_str(w.shape));
  const int N = x.shape[0], Ci = x.shape[1], H = x.shape[2], W = x.shape[3];
  const int Co = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  if (Ho <= 0 || Wo <= 0)
    throw ShapeError("conv2d: kernel " + shape_str(w.shape) + " too large for input " +
                     shape_str(x.shape));
  auto* g = detail::graph_of(x, w);
  std::vector<S> out(static_cast<std::size_t>(N) * Co * Ho * Wo);
  const auto& xd = *x.data;
  const auto& wd = *w.data;
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Co; ++co)
      for (int ho = 0; ho < Ho; ++ho)
        for (int wo = 0; wo < Wo; ++wo) {
          double acc = static_cast<double>((*b.data)[co]);
          for (int ci = 0; ci < Ci; ++ci)
            for (int r = 0; r < kh; ++r) {
              const int hi = ho * stride - pad + r;
              if (hi < 0 || hi >= H) continue;
              for (int c = 0; c < kw; ++c) {
                const int wi = wo * stride - pad + c;
                if (wi < 0 || wi >= W) continue;
                acc += static_cast<double>(
                           xd[((static_cast<std::size_t>(n) * Ci + ci) * H + hi) * W + wi]) *
                       static_cast<double>(
                           wd[((static_cast<std::size_t>(co) * Ci + ci) * kh + r) * kw + c]);
              }
            }
          out[((static_cast<std::size_t>(n) * Co + co) * Ho + ho) * Wo + wo] =
              static_cast<S>(acc);
        }
  const int ix = x.node, iw = w.node, ib = b.node;
  auto dx = x.data, dw = w.data;
  return g->record(
      {N, Co, Ho, Wo}, std::move(out),
      [=](GraphT<S>& g, int self) {
        const auto& go = g.gbuf(self);
        std::vector<double>* gx = ix >= 0 ? &g.gbuf(ix) : nullptr;
        std::vector<double>* gw = iw >= 0 ? &g.gbuf(iw) : nullptr;
        std::vector<double>* gb = ib >= 0 ? &g.gbuf(ib) : nullptr;
        for (int n = 0; n < N; ++n)
          for (int co = 0; co < Co; ++co)
            for (int ho = 0; ho < Ho; ++ho)
              for (int wo = 0; wo < Wo; ++wo) {
                const double gout =
                    go[((static_cast<std::size_t>(n) * Co + co) * Ho + ho) * Wo + wo];
                if (gout == 0.0) continue;
                if (gb) (*gb)[co] += gout;
                for (int ci = 0; ci < Ci; ++ci)
                  for (int r = 0; r < kh; ++r) {
                    const int hi = ho * stride - pad + r;
                    if (hi < 0 || hi >= H) continue;
                    for (int c = 0; c < kw; ++c) {
                      const int wi = wo * stride - pad + c;
                      if (wi < 0 || wi >= W) continue;
                      const std::size_t xi =
                          ((static_cast<std::size_t>(n) * Ci + ci) * H + hi) * W + wi;
                      const std::size_t wi2 =
                          ((static_cast<std::size_t>(co) * Ci + ci) * kh + r) * kw + c;
                      if (gx) (*gx)[xi] += gout * static_cast<double>((*dw)[wi2]);
                      if (gw) (*gw)[wi2] += gout * static_cast<double>((*dx)[xi]);
                    }
                  }
              }
      });
}

// transposed convolution (weight layout Cin,Cout,kh,kw)
template <typename S>
TensorT<S> conv_transpose2d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b,
                            int stride, int pad) {
  if (x.shape.size() != 4 || w.shape.size() != 4 || x.shape[1] != w.shape[0])
    throw ShapeError("conv_transpose2d: shape mismatch " + shape_str(x.shape) + " vs " +
                     shape_str(w.shape));
  const int N = x.shape[0], Ci = x.shape[1], H = x.shape[2], W = x.shape[3];
  const int Co = w.shape[1], kh = w.shape[2], kw = w.shape[3];
  if (b.shape.size() != 1 || b.shape[0] != Co)
    throw ShapeError("conv_transpose2d: bias shape " + shape_str(b.shape) + " vs weight " +
                     shape_str(w.shape));
  const int Ho = (H - 1) * stride - 2 * pad + kh;
  const int Wo = (W - 1) * stride - 2 * pad + kw;
  if (Ho <= 0 || Wo <= 0) throw ShapeError("conv_transpose2d: degenerate output");
  auto* g = detail::graph_of(x, w);
  std::vector<double> acc(static_cast<std::size_t>(N) * Co * Ho * Wo, 0.0);
  const auto& xd = *x.data;
  const auto& wd = *w.data;
  for (int n = 0; n < N; ++n)
    for (int ci = 0; ci < Ci; ++ci)
      for (int h = 0; h < H; ++h)
        for (int wcol = 0; wcol < W; ++wcol) {
          const double xv =
              static_cast<double>(xd[((static_cast<std::size_t>(n) * Ci + ci) * H + h) * W + wcol]);
          for (int co = 0; co < Co; ++co)
            for (int r = 0; r < kh; ++r) {
              const int ho = h * stride - pad + r;
              if (ho < 0 || ho >= Ho) continue;
              for (int c = 0; c < kw; ++c) {
                const int wo = wcol * stride - pad + c;
                if (wo < 0 || wo >= Wo) continue;
                acc[((static_cast<std::size_t>(n) * Co + co) * Ho + ho) * Wo + wo] +=
                    xv * static_cast<double>(
                             wd[((static_cast<std::size_t>(ci) * Co + co) * kh + r) * kw + c]);
              }
            }
        }
  std::vector<S> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const int co = static_cast<int>((i / (static_cast<std::size_t>(Ho) * Wo)) % Co);
    out[i] = static_cast<S>(acc[i] + static_cast<double>((*b.data)[co]));
  }
  const int ix = x.node, iw = w.node, ibn = b.node;
  auto dx = x.data, dw = w.data;
  return g->record(
      {N, Co, Ho, Wo}, std::move(out),
      [=](GraphT<S>& g, int self) {
        const auto& go = g.gbuf(self);
        std::vector<double>* gx = ix >= 0 ? &g.gbuf(ix) : nullptr;
        std::vector<double>* gw = iw >= 0 ? &g.gbuf(iw) : nullptr;
        std::vector<double>* gb = ibn >= 0 ? &g.gbuf(ibn) : nullptr;
        if (gb) {
          for (int n = 0; n < N; ++n)
            for (int co = 0; co < Co; ++co) {
              double a = 0.0;
              const std::size_t base = (static_cast<std::size_t>(n) * Co + co) *
                                       static_cast<std::size_t>(Ho) * Wo;
              for (std::size_t i = 0; i < static_cast<std::size_t>(Ho) * Wo; ++i) a += go[base + i];
              (*gb)[co] += a;
            }
        }
        for (int n = 0; n < N; ++n)
          for (int ci = 0; ci < Ci; ++ci)
            for (int h = 0; h < H; ++h)
              for (int wcol = 0; wcol < W; ++wcol) {
                const std::size_t xi =
                    ((static_cast<std::size_t>(n) * Ci + ci) * H + h) * W + wcol;
                const double xv = static_cast<double>((*dx)[xi]);
                double gxa = 0.0;
                for (int co = 0; co < Co; ++co)
                  for (int r = 0; r < kh; ++r) {
                    const int ho = h * stride - pad + r;
                    if (ho < 0 || ho >= Ho) continue;
                    for (int c = 0; c < kw; ++c) {
                      const int wo = wcol * stride - pad + c;
                      if (wo < 0 || wo >= Wo) continue;
                      const double gout =
                          go[((static_cast<std::size_t>(n) * Co + co) * Ho + ho) * Wo + wo];
                      const std::size_t wi =
                          ((static_cast<std::size_t>(ci) * Co + co) * kh + r) * kw + c;
                      if (gx) gxa += gout * static_cast<double>((*dw)[wi]);
                      if (gw) (*gw)[wi] += gout * xv;
                    }
                  }
                if (gx) (*gx)[xi] += gxa;
              }
      });
}

// ---------------------------------------------------------------------------
// batch normalization (per-channel; composed from primitives so the gradient
// flows through the batch statistics in train mode)

template <typename S>
TensorT<S> batchnorm(const TensorT<S>& x_in, const TensorT<S>& gamma, const TensorT<S>& beta,
                     std::vector<S>& running_mean, std::vector<S>& running_var, bool train,
                     double momentum = 0.1, double eps = 1e-5) {
  TensorT<S> x = x_in;
  const bool was_2d = x.shape.size() == 2;
  if (was_2d) x = reshape(x, {x.shape[0], x.shape[1], 1, 1});
  if (x.shape.size() != 4)
    throw ShapeError("batchnorm: need 2-d or 4-d input, got " + shape_str(x_in.shape));
  const int C = x.shape[1];
  if (static_cast<int>(running_mean.size()) != C || static_cast<int>(running_var.size()) != C)
    throw ShapeError("batchnorm: running stats size mismatch");
  TensorT<S> out;
  if (train) {
    TensorT<S> mu = mean(x, {0, 2, 3});
    TensorT<S> xc = chan_sub(x, mu);
    TensorT<S> var = mean(mul(xc, xc), {0, 2, 3});
    TensorT<S> inv = rsqrt(offset(var, eps));
    TensorT<S> xhat = chan_mul(xc, inv);
    out = chan_add(chan_mul(xhat, gamma), beta);
    for (int c = 0; c < C; ++c) {
      running_mean[c] = static_cast<S>((1.0 - momentum) * static_cast<double>(running_mean[c]) +
                                       momentum * static_cast<double>((*mu.data)[c]));
      running_var[c] = static_cast<S>((1.0 - momentum) * static_cast<double>(running_var[c]) +
                                      momentum * static_cast<double>((*var.data)[c]));
    }
  } else {
    std::vector<S> inv(C), mu(C);
    for (int c = 0; c < C; ++c) {
      mu[c] = running_mean[c];
      inv[c] = static_cast<S>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps));
    }
    TensorT<S> xhat = chan_mul(chan_sub(x, make_tensor<S>({C}, std::move(mu))),
                               make_tensor<S>({C}, std::move(inv)));
    out = chan_add(chan_mul(xhat, gamma), beta);
  }
  if (was_2d) out = reshape(out, {x_in.shape[0], x_in.shape[1]});
  return out;
}

}  // namespace qpart::diff
