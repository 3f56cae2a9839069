// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "gemo/config.hpp"
#include "gemo/model/lexicon.hpp"
#include "gemo/nn/layers.hpp"

namespace gemo::model {

using ad::Graph;
using ad::Parameter;
using ad::Tensor;
using ad::Var;
using nn::ForwardContext;

template <typename T>
struct ClassGraph {
  Tensor<T> nodes;       // (M+1)×d_e, lexicons first, class embedding last
  Tensor<T> adjacency;   // max(cos, 0) with unit diagonal
  Tensor<T> normalized;  // D^-1/2 A D^-1/2
  Tensor<T> class_embedding;  // 1×d_e, the raw v(E_c)
};

template <typename T>
ClassGraph<T> build_class_graph(const LexiconClass& cls);

template <typename T>
struct EsemParams {
  Parameter<T>* gcn1 = nullptr;  // d_e×d_h
  Parameter<T>* gcn2 = nullptr;  // d_h×d_h
  nn::Linear<T> semantic_head;   // pooled width·3 → hidden
  std::size_t d_e = 0;
  std::size_t d_h = 0;
  ClassPool pool = ClassPool::kSum;
};

template <typename T>
EsemParams<T> make_esem_params(nn::ParamStore<T>& store, const RunConfig& cfg);

// Width of one pooled class vector: d_h for the summed pool, 2·d_h for concat.
template <typename T>
std::size_t class_width(const EsemParams<T>& p) {
  return p.pool == ClassPool::kSum ? p.d_h : 2 * p.d_h;
}

template <typename T>
struct ClassEncoding {
  Var<T> pooled;     // F_c
  Var<T> nodes;      // H after the two GCN layers
  Tensor<T> attention;  // (M+1)×1 node weights
};

/// Two GCN layers over the class graph, attention pooling against the raw
/// class embedding, residual broadcast, then mean+max (or mean|max) pooling.
template <typename T>
ClassEncoding<T> encode_class_semantics(Graph<T>& g, const ClassGraph<T>& graph,
                                        const EsemParams<T>& p, const ForwardContext& ctx);

// Concatenates (pos, neu, neg) and applies the semantic head: F_t, 1×hidden.
template <typename T>
Var<T> assemble_semantic_rep(const std::array<Var<T>, kNumClasses>& classes, const EsemParams<T>& p);

// F_c for `label` placed in its own slot of an otherwise zero concatenation,
// through the same semantic head.
template <typename T>
Var<T> class_semantic_for_label(const std::array<Var<T>, kNumClasses>& classes, int label,
                                const EsemParams<T>& p);

template <typename T>
struct EsemOutput {
  std::array<ClassEncoding<T>, kNumClasses> classes;
  std::array<Var<T>, kNumClasses> class_semantics;  // head(slot(F_c)), 1×hidden
  Var<T> semantic;                                   // F_t
};

template <typename T>
EsemOutput<T> esem_forward(Graph<T>& g, const std::array<ClassGraph<T>, kNumClasses>& graphs,
                           const EsemParams<T>& p, const ForwardContext& ctx);

}  // namespace gemo::model
