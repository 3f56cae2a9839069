// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/autodiff/ops.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace gemo::ad {
namespace {

template <typename T>
void require_matrix(const Var<T>& v, const char* op) {
  if (v.value().rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_string(v.shape()));
  }
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// Applies f elementwise; df maps an input entry to its local derivative.
template <typename T, typename F, typename D>
Var<T> unary(const Var<T>& a, F f, D df) {
  Graph<T>& g = a.graph();
  const Tensor<T>& x = a.value();
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  const std::size_t ia = a.id();
  return g.record(std::move(out), {a}, [ia, df](Graph<T>& gr, const Tensor<T>& go) {
    if (auto* ga = gr.grad_slot(ia)) {
      const Tensor<T>& xv = gr.value(ia);
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i] * df(xv[i]);
    }
  });
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Shared softmax forward over a full-shape mask (nullptr = all valid).
template <typename T>
Tensor<T> masked_softmax_forward(const Tensor<T>& x, const std::uint8_t* mask) {
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  Tensor<T> y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint8_t* m = mask ? mask + r * cols : nullptr;
    T best = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < cols; ++c) {
      if (m && !m[c]) continue;
      any = true;
      best = std::max(best, x(r, c));
    }
    if (!any) throw InvalidMaskError("softmax: row " + std::to_string(r) + " is fully masked");
    T total = T(0);
    for (std::size_t c = 0; c < cols; ++c) {
      if (m && !m[c]) continue;
      const T e = std::exp(x(r, c) - best);
      y(r, c) = e;
      total += e;
    }
    for (std::size_t c = 0; c < cols; ++c) y(r, c) /= total;
  }
  return y;
}

}  // namespace

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner extents disagree for " + shape_string(av.shape()) +
                         " and " + shape_string(bv.shape()));
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor<T> out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    T* orow = &out(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = av(i, p);
      if (aip == T(0)) continue;
      const T* brow = &bv(p, 0);
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib, m, k, n](Graph<T>& g, const Tensor<T>& go) {
    const Tensor<T>& A = g.value(ia);
    const Tensor<T>& B = g.value(ib);
    if (auto* ga = g.grad_slot(ia)) {
      // dA = G·Bᵀ
      for (std::size_t i = 0; i < m; ++i) {
        const T* grow = &go(i, 0);
        for (std::size_t p = 0; p < k; ++p) {
          const T* brow = &B(p, 0);
          T acc = T(0);
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          (*ga)(i, p) += acc;
        }
      }
    }
    if (auto* gb = g.grad_slot(ib)) {
      // dB = Aᵀ·G
      for (std::size_t i = 0; i < m; ++i) {
        const T* grow = &go(i, 0);
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = A(i, p);
          if (aip == T(0)) continue;
          T* drow = &(*gb)(p, 0);
          for (std::size_t j = 0; j < n; ++j) drow[j] += aip * grow[j];
        }
      }
    }
  });
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  require_matrix(a, "transpose");
  const Tensor<T>& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor<T> out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = av(i, j);
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia, r, c](Graph<T>& g, const Tensor<T>& go) {
    if (auto* ga = g.grad_slot(ia)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*ga)(i, j) += go(j, i);
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  accumulate(out, b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph<T>& g, const Tensor<T>& go) {
    if (auto* ga = g.grad_slot(ia)) accumulate(*ga, go);
    if (auto* gb = g.grad_slot(ib)) accumulate(*gb, go);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph<T>& g, const Tensor<T>& go) {
    if (auto* ga = g.grad_slot(ia)) accumulate(*ga, go);
    if (auto* gb = g.grad_slot(ib))
      for (std::size_t i = 0; i < go.size(); ++i) (*gb)[i] -= go[i];
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph<T>& g, const Tensor<T>& go) {
    const Tensor<T>& A = g.value(ia);
    const Tensor<T>& B = g.value(ib);
    if (auto* ga = g.grad_slot(ia))
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i] * B[i];
    if (auto* gb = g.grad_slot(ib))
      for (std::size_t i = 0; i < go.size(); ++i) (*gb)[i] += go[i] * A[i];
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, double factor) {
  const T f = static_cast<T>(factor);
  return unary(a, [f](T x) { return x * f; }, [f](T) { return f; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, double offset) {
  const T o = static_cast<T>(offset);
  return unary(a, [o](T x) { return x + o; }, [](T) { return T(1); });
}

template <typename T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  require_matrix(a, "add_row");
  require_matrix(row, "add_row");
  const Tensor<T>& av = a.value();
  const Tensor<T>& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw DimensionError("add_row: cannot broadcast " + shape_string(rv.shape()) + " onto " +
                         shape_string(av.shape()));
  }
  const std::size_t n = av.rows(), d = av.cols();
  Tensor<T> out = av;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out(r, c) += rv[c];
  const std::size_t ia = a.id(), ir = row.id();
  return a.graph().record(std::move(out), {a, row}, [ia, ir, n, d](Graph<T>& g, const Tensor<T>& go) {
    if (auto* ga = g.grad_slot(ia)) accumulate(*ga, go);
    if (auto* gr = g.grad_slot(ir))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) (*gr)[c] += go(r, c);
  });
}

template <typename T>
Var<T> scale_rows(const Var<T>& a, const Var<T>& gate) {
  require_matrix(a, "scale_rows");
  require_matrix(gate, "scale_rows");
  const Tensor<T>& av = a.value();
  const Tensor<T>& gv = gate.value();
  if (gv.rows() != av.rows() || gv.cols() != 1) {
    throw DimensionError("scale_rows: gate " + shape_string(gv.shape()) + " does not match " +
                         shape_string(av.shape()));
  }
  const std::size_t n = av.rows(), d = av.cols();
  Tensor<T> out = av;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out(r, c) *= gv[r];
  const std::size_t ia = a.id(), ig = gate.id();
  return a.graph().record(std::move(out), {a, gate}, [ia, ig, n, d](Graph<T>& g, const Tensor<T>& go) {
    const Tensor<T>& A = g.value(ia);
    const Tensor<T>& G = g.value(ig);
    if (auto* ga = g.grad_slot(ia))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) (*ga)(r, c) += go(r, c) * G[r];
    if (auto* gg = g.grad_slot(ig))
      for (std::size_t r = 0; r < n; ++r) {
        T acc = T(0);
        for (std::size_t c = 0; c < d; ++c) acc += go(r, c) * A(r, c);
        (*gg)[r] += acc;
      }
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return unary(a, [](T x) { return stable_sigmoid(x); },
               [](T x) {
                 const T s = stable_sigmoid(x);
                 return s * (T(1) - s);
               });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return unary(a, [](T x) { return x > T(0) ? x : T(0); },
               [](T x) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  return unary(a, [](T x) { return std::exp(x); }, [](T x) { return std::exp(x); });
}

template <typename T>
Var<T> log(const Var<T>& a) {
  for (T x : a.value().data()) {
    if (!(x > T(0))) throw DomainError("log of non-positive value " + std::to_string(x));
  }
  return unary(a, [](T x) { return std::log(x); }, [](T x) { return T(1) / x; });
}

namespace {

template <typename T>
Var<T> softmax_impl(const Var<T>& x, std::vector<std::uint8_t> mask) {
  require_matrix(x, "softmax");
  Tensor<T> y = masked_softmax_forward(x.value(), mask.empty() ? nullptr : mask.data());
  const std::size_t ix = x.id();
  const std::size_t rows = y.rows(), cols = y.cols();
  // Output values are saved in the closure because the rule is expressed in y.
  Tensor<T> saved = y;
  return x.graph().record(
      std::move(y), {x}, [ix, rows, cols, saved = std::move(saved)](Graph<T>& g, const Tensor<T>& go) {
        auto* gx = g.grad_slot(ix);
        if (!gx) return;
        for (std::size_t r = 0; r < rows; ++r) {
          T dot = T(0);
          for (std::size_t c = 0; c < cols; ++c) dot += saved(r, c) * go(r, c);
          for (std::size_t c = 0; c < cols; ++c) (*gx)(r, c) += saved(r, c) * (go(r, c) - dot);
        }
      });
}

}  // namespace

template <typename T>
Var<T> softmax_rows(const Var<T>& x) {
  return softmax_impl(x, {});
}

template <typename T>
Var<T> softmax_masked(const Var<T>& x, const RowMask& key_mask) {
  require_matrix(x, "softmax_masked");
  if (key_mask.size() != x.cols()) {
    throw DimensionError("softmax_masked: key mask of length " + std::to_string(key_mask.size()) +
                         " for shape " + shape_string(x.shape()));
  }
  std::vector<std::uint8_t> full(x.value().size());
  for (std::size_t r = 0; r < x.rows(); ++r)
    std::copy(key_mask.begin(), key_mask.end(), full.begin() + static_cast<std::ptrdiff_t>(r * x.cols()));
  return softmax_impl(x, std::move(full));
}

template <typename T>
Var<T> softmax_masked(const Var<T>& x, std::span<const std::uint8_t> mask) {
  if (mask.size() != x.value().size()) {
    throw DimensionError("softmax_masked: mask of length " + std::to_string(mask.size()) +
                         " for shape " + shape_string(x.shape()));
  }
  return softmax_impl(x, std::vector<std::uint8_t>(mask.begin(), mask.end()));
}

template <typename T>
Var<T> log_softmax_rows(const Var<T>& x) {
  require_matrix(x, "log_softmax_rows");
  const Tensor<T>& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (cols == 0) throw DimensionError("log_softmax_rows: empty rows");
  Tensor<T> out(xv.shape());
  Tensor<T> probs(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    T best = xv(r, 0);
    for (std::size_t c = 1; c < cols; ++c) best = std::max(best, xv(r, c));
    T total = T(0);
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(xv(r, c) - best);
    const T lse = best + std::log(total);
    for (std::size_t c = 0; c < cols; ++c) {
      out(r, c) = xv(r, c) - lse;
      probs(r, c) = std::exp(out(r, c));
    }
  }
  const std::size_t ix = x.id();
  return x.graph().record(
      std::move(out), {x}, [ix, rows, cols, probs = std::move(probs)](Graph<T>& g, const Tensor<T>& go) {
        auto* gx = g.grad_slot(ix);
        if (!gx) return;
        for (std::size_t r = 0; r < rows; ++r) {
          T total = T(0);
          for (std::size_t c = 0; c < cols; ++c) total += go(r, c);
          for (std::size_t c = 0; c < cols; ++c) (*gx)(r, c) += go(r, c) - probs(r, c) * total;
        }
      });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T total = T(0);
  for (T v : x.value().data()) total += v;
  const std::size_t ix = x.id();
  return x.graph().record(Tensor<T>::scalar(total), {x}, [ix](Graph<T>& g, const Tensor<T>& go) {
    if (auto* gx = g.grad_slot(ix))
      for (auto& v : gx->data()) v += go[0];
  });
}

template <typename T>
Var<T> mean_rows(const Var<T>& x) {
  RowMask all(x.rows(), 1);
  if (all.empty()) throw InvalidMaskError("mean_rows: no rows to reduce");
  return masked_mean_rows(x, all);
}

template <typename T>
Var<T> masked_mean_rows(const Var<T>& x, const RowMask& row_mask) {
  require_matrix(x, "masked_mean_rows");
  const Tensor<T>& xv = x.value();
  const std::size_t n = xv.rows(), d = xv.cols();
  if (row_mask.size() != n) {
    throw DimensionError("masked_mean_rows: mask of length " + std::to_string(row_mask.size()) +
                         " for shape " + shape_string(xv.shape()));
  }
  std::size_t count = 0;
  Tensor<T> out({1, d});
  for (std::size_t r = 0; r < n; ++r) {
    if (!row_mask[r]) continue;
    ++count;
    for (std::size_t c = 0; c < d; ++c) out[c] += xv(r, c);
  }
  if (count == 0) throw InvalidMaskError("masked_mean_rows: every row is masked");
  const T inv = T(1) / static_cast<T>(count);
  for (auto& v : out.data()) v *= inv;
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, row_mask, inv, n, d](Graph<T>& g, const Tensor<T>& go) {
    if (auto* gx = g.grad_slot(ix))
      for (std::size_t r = 0; r < n; ++r) {
        if (!row_mask[r]) continue;
        for (std::size_t c = 0; c < d; ++c) (*gx)(r, c) += go[c] * inv;
      }
  });
}

template <typename T>
Var<T> max_rows(const Var<T>& x) {
  require_matrix(x, "max_rows");
  const Tensor<T>& xv = x.value();
  const std::size_t n = xv.rows(), d = xv.cols();
  if (n == 0) throw InvalidMaskError("max_rows: no rows to reduce");
  Tensor<T> out({1, d});
  std::vector<std::size_t> arg(d, 0);
  for (std::size_t c = 0; c < d; ++c) {
    out[c] = xv(0, c);
    for (std::size_t r = 1; r < n; ++r) {
      if (xv(r, c) > out[c]) {
        out[c] = xv(r, c);
        arg[c] = r;
      }
    }
  }
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, arg = std::move(arg), d](Graph<T>& g, const Tensor<T>& go) {
    if (auto* gx = g.grad_slot(ix))
      for (std::size_t c = 0; c < d; ++c) (*gx)(arg[c], c) += go[c];
  });
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  const std::size_t d = parts.front().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != d) {
      throw DimensionError("concat_rows: width mismatch " + shape_string(parts.front().shape()) +
                           " vs " + shape_string(p.shape()));
    }
    total += p.rows();
  }
  Tensor<T> out({total, d});
  std::vector<std::size_t> ids, offsets;
  std::size_t row = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(row * d));
    ids.push_back(p.id());
    offsets.push_back(row);
    row += p.rows();
  }
  return parts.front().graph().record(
      std::move(out), parts, [ids, offsets, d](Graph<T>& g, const Tensor<T>& go) {
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (auto* gp = g.grad_slot(ids[k])) {
            const std::size_t base = offsets[k] * d;
            for (std::size_t i = 0; i < gp->size(); ++i) (*gp)[i] += go[base + i];
          }
        }
      });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != n) {
      throw DimensionError("concat_cols: row count mismatch " +
                           shape_string(parts.front().shape()) + " vs " + shape_string(p.shape()));
    }
    total += p.cols();
  }
  Tensor<T> out({n, total});
  std::vector<std::size_t> ids, offsets, widths;
  std::size_t col = 0;
  for (const auto& p : parts) {
    const Tensor<T>& pv = p.value();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < pv.cols(); ++c) out(r, col + c) = pv(r, c);
    ids.push_back(p.id());
    offsets.push_back(col);
    widths.push_back(pv.cols());
    col += pv.cols();
  }
  return parts.front().graph().record(
      std::move(out), parts, [ids, offsets, widths, n](Graph<T>& g, const Tensor<T>& go) {
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (auto* gp = g.grad_slot(ids[k]))
            for (std::size_t r = 0; r < n; ++r)
              for (std::size_t c = 0; c < widths[k]; ++c) (*gp)(r, c) += go(r, offsets[k] + c);
        }
      });
}

template <typename T>
Var<T> slice_rows(const Var<T>& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_rows");
  if (begin + count > x.rows()) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of " + shape_string(x.shape()));
  }
  const std::size_t d = x.cols();
  const auto src = x.value().data();
  Tensor<T> out({count, d}, std::vector<T>(src.begin() + static_cast<std::ptrdiff_t>(begin * d),
                                           src.begin() + static_cast<std::ptrdiff_t>((begin + count) * d)));
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, begin, d](Graph<T>& g, const Tensor<T>& go) {
    if (auto* gx = g.grad_slot(ix))
      for (std::size_t i = 0; i < go.size(); ++i) (*gx)[begin * d + i] += go[i];
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_cols");
  if (begin + count > x.cols()) {
    throw DimensionError("slice_cols: cols [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of " + shape_string(x.shape()));
  }
  const Tensor<T>& xv = x.value();
  const std::size_t n = xv.rows();
  Tensor<T> out({n, count});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = xv(r, begin + c);
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, begin, count, n](Graph<T>& g, const Tensor<T>& go) {
    if (auto* gx = g.grad_slot(ix))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < count; ++c) (*gx)(r, begin + c) += go(r, c);
  });
}

template <typename T>
Var<T> layer_norm_rows(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps) {
  require_matrix(x, "layer_norm_rows");
  const Tensor<T>& xv = x.value();
  const std::size_t n = xv.rows(), d = xv.cols();
  if (gamma.value().size() != d || beta.value().size() != d) {
    throw DimensionError("layer_norm_rows: affine parameters " + shape_string(gamma.shape()) +
                         " do not match " + shape_string(xv.shape()));
  }
  const Tensor<T>& gv = gamma.value();
  const Tensor<T>& bv = beta.value();
  Tensor<T> xhat(xv.shape());
  std::vector<T> rstd(n);
  Tensor<T> out(xv.shape());
  for (std::size_t r = 0; r < n; ++r) {
    T mean = T(0);
    for (std::size_t c = 0; c < d; ++c) mean += xv(r, c);
    mean /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t c = 0; c < d; ++c) {
      const T dev = xv(r, c) - mean;
      var += dev * dev;
    }
    var /= static_cast<T>(d);
    rstd[r] = T(1) / std::sqrt(var + static_cast<T>(eps));
    for (std::size_t c = 0; c < d; ++c) {
      xhat(r, c) = (xv(r, c) - mean) * rstd[r];
      out(r, c) = xhat(r, c) * gv[c] + bv[c];
    }
  }
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.graph().record(
      std::move(out), {x, gamma, beta},
      [ix, ig, ib, n, d, xhat = std::move(xhat), rstd = std::move(rstd)](Graph<T>& g, const Tensor<T>& go) {
        const Tensor<T>& G = g.value(ig);
        if (auto* gg = g.grad_slot(ig))
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) (*gg)[c] += go(r, c) * xhat(r, c);
        if (auto* gb = g.grad_slot(ib))
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) (*gb)[c] += go(r, c);
        if (auto* gx = g.grad_slot(ix)) {
          const T inv_d = T(1) / static_cast<T>(d);
          for (std::size_t r = 0; r < n; ++r) {
            T mean_dy = T(0), mean_dy_xhat = T(0);
            for (std::size_t c = 0; c < d; ++c) {
              const T dy = go(r, c) * G[c];
              mean_dy += dy;
              mean_dy_xhat += dy * xhat(r, c);
            }
            mean_dy *= inv_d;
            mean_dy_xhat *= inv_d;
            for (std::size_t c = 0; c < d; ++c) {
              const T dy = go(r, c) * G[c];
              (*gx)(r, c) += rstd[r] * (dy - mean_dy - xhat(r, c) * mean_dy_xhat);
            }
          }
        }
      });
}

template <typename T>
Var<T> normalize_rows(const Var<T>& x, double min_norm) {
  require_matrix(x, "normalize_rows");
  const Tensor<T>& xv = x.value();
  const std::size_t n = xv.rows(), d = xv.cols();
  Tensor<T> out(xv.shape());
  std::vector<T> norms(n);
  for (std::size_t r = 0; r < n; ++r) {
    T sq = T(0);
    for (std::size_t c = 0; c < d; ++c) sq += xv(r, c) * xv(r, c);
    norms[r] = std::sqrt(sq);
    if (!std::isfinite(static_cast<double>(norms[r]))) {
      throw DomainError("row " + std::to_string(r) + " has a non-finite norm");
    }
    if (!(static_cast<double>(norms[r]) > min_norm)) {
      throw DegenerateVectorError("row " + std::to_string(r) + " has near-zero norm " +
                                  std::to_string(static_cast<double>(norms[r])));
    }
    for (std::size_t c = 0; c < d; ++c) out(r, c) = xv(r, c) / norms[r];
  }
  Tensor<T> saved = out;
  const std::size_t ix = x.id();
  return x.graph().record(
      std::move(out), {x},
      [ix, n, d, norms = std::move(norms), saved = std::move(saved)](Graph<T>& g, const Tensor<T>& go) {
        auto* gx = g.grad_slot(ix);
        if (!gx) return;
        for (std::size_t r = 0; r < n; ++r) {
          T dot = T(0);
          for (std::size_t c = 0; c < d; ++c) dot += go(r, c) * saved(r, c);
          for (std::size_t c = 0; c < d; ++c)
            (*gx)(r, c) += (go(r, c) - saved(r, c) * dot) / norms[r];
        }
      });
}

template <typename T>
Var<T> cosine_similarity(const Var<T>& u, const Var<T>& v) {
  require_same_shape(u, v, "cosine_similarity");
  if (u.rows() != 1) {
    throw DimensionError("cosine_similarity: expected row vectors, got " + shape_string(u.shape()));
  }
  return sum(mul(normalize_rows(u), normalize_rows(v)));
}

template <typename T>
Var<T> pairwise_cosine(const Var<T>& a, const Var<T>& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("pairwise_cosine: width mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  return matmul(normalize_rows(a), transpose(normalize_rows(b)));
}

template <typename T>
Var<T> dropout(const Var<T>& x, double rate, Rng& rng, bool train) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout rate must lie in [0, 1)");
  if (!train || rate == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> factor(x.shape());
  for (auto& f : factor.data()) f = rng.bernoulli(1.0 - rate) ? keep_scale : T(0);
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor[i];
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, factor = std::move(factor)](Graph<T>& g, const Tensor<T>& go) {
    if (auto* gx = g.grad_slot(ix))
      for (std::size_t i = 0; i < go.size(); ++i) (*gx)[i] += go[i] * factor[i];
  });
}

template <typename T>
Var<T> weighted_log_sum(const Var<T>& x, const Tensor<T>& weights, double eps) {
  const Tensor<T>& xv = x.value();
  if (weights.shape() != xv.shape()) {
    throw DimensionError("weighted_log_sum: weights " + shape_string(weights.shape()) +
                         " vs values " + shape_string(xv.shape()));
  }
  const T e = static_cast<T>(eps);
  T total = T(0);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    if (weights[i] == T(0)) continue;
    const T arg = xv[i] + e;
    if (!(arg > T(0))) throw DomainError("weighted_log_sum: log of non-positive value");
    total += weights[i] * std::log(arg);
  }
  const std::size_t ix = x.id();
  return x.graph().record(Tensor<T>::scalar(total), {x}, [ix, weights, e](Graph<T>& g, const Tensor<T>& go) {
    auto* gx = g.grad_slot(ix);
    if (!gx) return;
    const Tensor<T>& X = g.value(ix);
    for (std::size_t i = 0; i < X.size(); ++i) {
      if (weights[i] == T(0)) continue;
      (*gx)[i] += go[0] * weights[i] / (X[i] + e);
    }
  });
}

template <typename T>
Var<T> standardize(const Var<T>& x, double eps) {
  const Tensor<T>& xv = x.value();
  const std::size_t n = xv.size();
  if (n == 0) throw DimensionError("standardize: empty input");
  Tensor<T> out(xv.shape());
  const bool constant = std::all_of(xv.data().begin(), xv.data().end(), [&](T v) { return v == xv[0]; });
  if (constant) {
    return x.graph().record(std::move(out), {x}, [](Graph<T>&, const Tensor<T>&) {});
  }
  T mean = T(0);
  for (T v : xv.data()) mean += v;
  mean /= static_cast<T>(n);
  Tensor<T> centered(xv.shape());
  T var = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    centered[i] = xv[i] - mean;
    var += centered[i] * centered[i];
  }
  const T sigma = std::sqrt(var / static_cast<T>(n));
  const T denom = sigma + static_cast<T>(eps);
  for (std::size_t i = 0; i < n; ++i) out[i] = centered[i] / denom;
  const std::size_t ix = x.id();
  return x.graph().record(
      std::move(out), {x}, [ix, n, sigma, denom, centered = std::move(centered)](Graph<T>& g, const Tensor<T>& go) {
        auto* gx = g.grad_slot(ix);
        if (!gx) return;
        T mean_g = T(0), dot = T(0);
        for (std::size_t i = 0; i < n; ++i) {
          mean_g += go[i];
          dot += go[i] * centered[i];
        }
        mean_g /= static_cast<T>(n);
        const T coeff = sigma > T(0) ? dot / (static_cast<T>(n) * sigma * denom * denom) : T(0);
        for (std::size_t i = 0; i < n; ++i)
          (*gx)[i] += (go[i] - mean_g) / denom - coeff * centered[i];
      });
}

#define GEMO_INSTANTIATE_OPS(T)                                                              \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                      \
  template Var<T> transpose(const Var<T>&);                                                  \
  template Var<T> add(const Var<T>&, const Var<T>&);                                         \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                         \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                         \
  template Var<T> scale(const Var<T>&, double);                                              \
  template Var<T> add_scalar(const Var<T>&, double);                                         \
  template Var<T> add_row(const Var<T>&, const Var<T>&);                                     \
  template Var<T> scale_rows(const Var<T>&, const Var<T>&);                                  \
  template Var<T> sigmoid(const Var<T>&);                                                    \
  template Var<T> relu(const Var<T>&);                                                       \
  template Var<T> exp(const Var<T>&);                                                        \
  template Var<T> log(const Var<T>&);                                                        \
  template Var<T> softmax_rows(const Var<T>&);                                               \
  template Var<T> softmax_masked(const Var<T>&, const RowMask&);                             \
  template Var<T> softmax_masked(const Var<T>&, std::span<const std::uint8_t>);              \
  template Var<T> log_softmax_rows(const Var<T>&);                                           \
  template Var<T> sum(const Var<T>&);                                                        \
  template Var<T> mean_rows(const Var<T>&);                                                  \
  template Var<T> max_rows(const Var<T>&);                                                   \
  template Var<T> masked_mean_rows(const Var<T>&, const RowMask&);                           \
  template Var<T> concat_rows(const std::vector<Var<T>>&);                                   \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                   \
  template Var<T> slice_rows(const Var<T>&, std::size_t, std::size_t);                       \
  template Var<T> slice_cols(const Var<T>&, std::size_t, std::size_t);                       \
  template Var<T> layer_norm_rows(const Var<T>&, const Var<T>&, const Var<T>&, double);      \
  template Var<T> normalize_rows(const Var<T>&, double);                                     \
  template Var<T> cosine_similarity(const Var<T>&, const Var<T>&);                           \
  template Var<T> pairwise_cosine(const Var<T>&, const Var<T>&);                             \
  template Var<T> dropout(const Var<T>&, double, Rng&, bool);                                \
  template Var<T> weighted_log_sum(const Var<T>&, const Tensor<T>&, double);                 \
  template Var<T> standardize(const Var<T>&, double);

GEMO_INSTANTIATE_OPS(float)
GEMO_INSTANTIATE_OPS(double)

#undef GEMO_INSTANTIATE_OPS

}  // namespace gemo::ad
