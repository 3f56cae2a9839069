// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/model/esem.hpp"

#include <algorithm>
#include <cmath>

namespace gemo::model {

namespace {

std::vector<double> unit(const std::vector<double>& v, const std::string& what) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n <= 1e-12) throw DegenerateVectorError("class graph: zero-norm embedding for " + what);
  std::vector<double> out(v);
  for (auto& x : out) x /= n;
  return out;
}

}  // namespace

template <typename T>
ClassGraph<T> build_class_graph(const LexiconClass& cls) {
  if (cls.lexicons.empty()) throw ValidationError("class graph: no lexicons");
  const std::size_t n = cls.lexicons.size() + 1;
  const std::size_t d = cls.class_embedding.size();
  std::vector<std::vector<double>> rows;
  std::vector<std::string> names;
  for (const auto& e : cls.lexicons) {
    if (e.embedding.size() != d) throw DimensionError("class graph: mixed embedding widths");
    rows.push_back(e.embedding);
    names.push_back("'" + e.word + "'");
  }
  rows.push_back(cls.class_embedding);
  names.push_back("class '" + cls.class_word + "'");

  ClassGraph<T> g;
  g.nodes = Tensor<T>({n, d});
  std::vector<std::vector<double>> units;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) g.nodes(i, c) = static_cast<T>(rows[i][c]);
    units.push_back(unit(rows[i], names[i]));
  }
  g.class_embedding = Tensor<T>({1, d});
  for (std::size_t c = 0; c < d; ++c) g.class_embedding[c] = static_cast<T>(cls.class_embedding[c]);

  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    a[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += units[i][c] * units[j][c];
      dot = std::min(1.0, std::max(0.0, dot));
      a[i * n + j] = a[j * n + i] = dot;
    }
  }
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a[i * n + j];
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);  // deg >= 1 from the self-loop
  }
  g.adjacency = Tensor<T>({n, n});
  g.normalized = Tensor<T>({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      g.adjacency(i, j) = static_cast<T>(a[i * n + j]);
      g.normalized(i, j) = static_cast<T>(a[i * n + j] * inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    }
  }
  return g;
}

template <typename T>
EsemParams<T> make_esem_params(nn::ParamStore<T>& store, const RunConfig& cfg) {
  EsemParams<T> p;
  p.d_e = cfg.d_e;
  p.d_h = cfg.gcn_width();
  p.pool = cfg.pool_kind();
  p.gcn1 = &store.glorot("esem.gcn1", p.d_e, p.d_h);
  p.gcn2 = &store.glorot("esem.gcn2", p.d_h, p.d_h);
  p.semantic_head = nn::make_linear(store, "esem.semantic_head", kNumClasses * class_width(p), cfg.hidden);
  return p;
}

template <typename T>
ClassEncoding<T> encode_class_semantics(Graph<T>& g, const ClassGraph<T>& graph,
                                        const EsemParams<T>& p, const ForwardContext& ctx) {
  if (graph.nodes.cols() != p.d_e) {
    throw DimensionError("encode_class_semantics: node width " + std::to_string(graph.nodes.cols()) +
                         " vs d_e " + std::to_string(p.d_e));
  }
  Var<T> h = nn::gcn_layer(g.constant(graph.nodes), graph.normalized, g.parameter(*p.gcn1));
  if (ctx.train && ctx.dropout > 0.0) {
    if (!ctx.rng) throw ContractError("encode_class_semantics: dropout requested without a generator");
    h = ad::dropout(h, ctx.dropout, *ctx.rng, true);
  }
  h = nn::gcn_layer(h, graph.normalized, g.parameter(*p.gcn2));

  // The raw class embedding scores each node. When d_h != d_e it is zero
  // padded or truncated to d_h.
  Tensor<T> query({1, p.d_h});
  for (std::size_t c = 0; c < std::min(p.d_e, p.d_h); ++c) query[c] = graph.class_embedding[c];
  Var<T> scores = ad::matmul(g.constant(query), ad::transpose(h));  // 1×(M+1)
  Var<T> attn = ad::softmax_rows(scores);
  Var<T> pooled = ad::matmul(attn, h);  // 1×d_h
  Var<T> fused = ad::add_row(h, pooled);

  ClassEncoding<T> out;
  out.nodes = h;
  const Tensor<T>& a = attn.value();
  out.attention = Tensor<T>({a.cols(), 1}, std::vector<T>(a.values()));
  if (p.pool == ClassPool::kSum) {
    out.pooled = ad::add(ad::mean_rows(fused), ad::max_rows(fused));
  } else {
    out.pooled = ad::concat_cols<T>({ad::mean_rows(fused), ad::max_rows(fused)});
  }
  return out;
}

template <typename T>
Var<T> assemble_semantic_rep(const std::array<Var<T>, kNumClasses>& classes, const EsemParams<T>& p) {
  for (const auto& c : classes) {
    if (c.rows() != 1 || c.cols() != class_width(p)) {
      throw DimensionError("assemble_semantic_rep: class vector " + ad::shape_string(c.shape()));
    }
  }
  return nn::linear(ad::concat_cols<T>({classes[0], classes[1], classes[2]}), p.semantic_head);
}

template <typename T>
Var<T> class_semantic_for_label(const std::array<Var<T>, kNumClasses>& classes, int label,
                                const EsemParams<T>& p) {
  if (label < 0 || label >= static_cast<int>(kNumClasses)) {
    throw ContractError("class_semantic_for_label: label " + std::to_string(label) + " outside {0,1,2}");
  }
  auto& g = classes[0].graph();
  const std::size_t w = class_width(p);
  std::vector<Var<T>> parts;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    parts.push_back(static_cast<int>(c) == label ? classes[c] : g.constant(Tensor<T>({1, w})));
  }
  return nn::linear(ad::concat_cols(parts), p.semantic_head);
}

template <typename T>
EsemOutput<T> esem_forward(Graph<T>& g, const std::array<ClassGraph<T>, kNumClasses>& graphs,
                           const EsemParams<T>& p, const ForwardContext& ctx) {
  EsemOutput<T> out;
  std::array<Var<T>, kNumClasses> pooled;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out.classes[c] = encode_class_semantics(g, graphs[c], p, ctx);
    pooled[c] = out.classes[c].pooled;
  }
  out.semantic = assemble_semantic_rep(pooled, p);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out.class_semantics[c] = class_semantic_for_label(pooled, static_cast<int>(c), p);
  }
  return out;
}

#define GEMO_INSTANTIATE_ESEM(T)                                                                   \
  template ClassGraph<T> build_class_graph<T>(const LexiconClass&);                                \
  template EsemParams<T> make_esem_params(nn::ParamStore<T>&, const RunConfig&);                   \
  template ClassEncoding<T> encode_class_semantics(Graph<T>&, const ClassGraph<T>&,                \
                                                   const EsemParams<T>&, const ForwardContext&);   \
  template Var<T> assemble_semantic_rep(const std::array<Var<T>, kNumClasses>&, const EsemParams<T>&); \
  template Var<T> class_semantic_for_label(const std::array<Var<T>, kNumClasses>&, int,            \
                                           const EsemParams<T>&);                                  \
  template EsemOutput<T> esem_forward(Graph<T>&, const std::array<ClassGraph<T>, kNumClasses>&,    \
                                      const EsemParams<T>&, const ForwardContext&);

GEMO_INSTANTIATE_ESEM(float)
GEMO_INSTANTIATE_ESEM(double)

#undef GEMO_INSTANTIATE_ESEM

}  // namespace gemo::model
