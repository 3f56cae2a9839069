// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gemo/autodiff/ops.hpp"
#include "gemo/nn/param_store.hpp"

namespace gemo::nn {

using ad::RowMask;
using ad::Var;

/// Per-call switches shared by every layer of one forward pass.
struct ForwardContext {
  bool train = false;
  double dropout = 0.0;
  Rng* rng = nullptr;  // required when train && dropout > 0
};

template <typename T>
struct Linear {
  Parameter<T>* weight = nullptr;  // d_in×d_out
  Parameter<T>* bias = nullptr;    // 1×d_out, optional
  std::size_t in = 0;
  std::size_t out = 0;
};

template <typename T>
Linear<T> make_linear(ParamStore<T>& store, const std::string& name, std::size_t in,
                      std::size_t out, bool with_bias = true);

// x·W + b with the bias broadcast over rows.
template <typename T>
Var<T> linear(const Var<T>& x, const Linear<T>& layer);

template <typename T>
struct LayerNorm {
  Parameter<T>* gamma = nullptr;
  Parameter<T>* beta = nullptr;
};

template <typename T>
LayerNorm<T> make_layer_norm(ParamStore<T>& store, const std::string& name, std::size_t width);

template <typename T>
Var<T> layer_norm(const Var<T>& x, const LayerNorm<T>& norm);

template <typename T>
struct Attention {
  Linear<T> query, key, value, output;
  std::size_t heads = 1;
};

template <typename T>
Attention<T> make_attention(ParamStore<T>& store, const std::string& name, std::size_t hidden,
                            std::size_t heads);

/// Scaled dot-product attention per head (scale 1/sqrt(head_dim)), keys with
/// key_mask == 0 excluded, heads concatenated and output-projected. No
/// positional terms. When `weights` is non-null the per-head attention
/// matrices are appended to it.
template <typename T>
Var<T> multi_head_attention(const Var<T>& q_in, const Var<T>& k_in, const Var<T>& v_in,
                            const RowMask& key_mask, const Attention<T>& attn,
                            std::vector<Tensor<T>>* weights = nullptr);

template <typename T>
struct EncoderBlock {
  Attention<T> attention;
  Linear<T> ffn_in;
  Linear<T> ffn_out;
  LayerNorm<T> norm1;
  LayerNorm<T> norm2;
};

template <typename T>
EncoderBlock<T> make_encoder_block(ParamStore<T>& store, const std::string& name,
                                   std::size_t hidden, std::size_t heads, std::size_t ffn_width);

// Post-norm: x' = LN(x + MHA(x,x,x)); out = LN(x' + FFN(x')).
template <typename T>
Var<T> encoder_block(const Var<T>& x, const RowMask& mask, const EncoderBlock<T>& block,
                     const ForwardContext& ctx);

template <typename T>
std::vector<EncoderBlock<T>> make_encoder_stack(ParamStore<T>& store, const std::string& name,
                                                std::size_t depth, std::size_t hidden,
                                                std::size_t heads, std::size_t ffn_width);

template <typename T>
Var<T> encoder_stack(const Var<T>& x, const RowMask& mask, const std::vector<EncoderBlock<T>>& blocks,
                     const ForwardContext& ctx);

/// relu(Â·H·W). Â must be square, symmetric and match H's row count.
template <typename T>
Var<T> gcn_layer(const Var<T>& h, const Tensor<T>& a_hat, const Var<T>& weight);

}  // namespace gemo::nn
