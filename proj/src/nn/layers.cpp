// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gemo::nn {

template <typename T>
Linear<T> make_linear(ParamStore<T>& store, const std::string& name, std::size_t in,
                      std::size_t out, bool with_bias) {
  Linear<T> layer;
  layer.weight = &store.glorot(name + ".weight", in, out);
  if (with_bias) layer.bias = &store.zeros(name + ".bias", {1, out});
  layer.in = in;
  layer.out = out;
  return layer;
}

template <typename T>
Var<T> linear(const Var<T>& x, const Linear<T>& layer) {
  auto& g = x.graph();
  if (x.cols() != layer.in) {
    throw DimensionError("linear: input " + ad::shape_string(x.shape()) + " vs weight " +
                         ad::shape_string(layer.weight->value.shape()));
  }
  Var<T> y = ad::matmul(x, g.parameter(*layer.weight));
  if (layer.bias) y = ad::add_row(y, g.parameter(*layer.bias));
  return y;
}

template <typename T>
LayerNorm<T> make_layer_norm(ParamStore<T>& store, const std::string& name, std::size_t width) {
  return {&store.ones(name + ".gamma", {1, width}), &store.zeros(name + ".beta", {1, width})};
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const LayerNorm<T>& norm) {
  auto& g = x.graph();
  return ad::layer_norm_rows(x, g.parameter(*norm.gamma), g.parameter(*norm.beta));
}

template <typename T>
Attention<T> make_attention(ParamStore<T>& store, const std::string& name, std::size_t hidden,
                            std::size_t heads) {
  if (heads == 0 || hidden % heads != 0) {
    throw ConfigError("hidden size " + std::to_string(hidden) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  Attention<T> attn;
  attn.query = make_linear(store, name + ".query", hidden, hidden);
  attn.key = make_linear(store, name + ".key", hidden, hidden);
  attn.value = make_linear(store, name + ".value", hidden, hidden);
  attn.output = make_linear(store, name + ".output", hidden, hidden);
  attn.heads = heads;
  return attn;
}

template <typename T>
Var<T> multi_head_attention(const Var<T>& q_in, const Var<T>& k_in, const Var<T>& v_in,
                            const RowMask& key_mask, const Attention<T>& attn,
                            std::vector<Tensor<T>>* weights) {
  const std::size_t hidden = attn.query.out;
  if (q_in.cols() != hidden || k_in.cols() != hidden || v_in.cols() != hidden) {
    throw DimensionError("multi_head_attention: inputs " + ad::shape_string(q_in.shape()) + ", " +
                         ad::shape_string(k_in.shape()) + ", " + ad::shape_string(v_in.shape()) +
                         " vs hidden " + std::to_string(hidden));
  }
  if (k_in.rows() != v_in.rows() || key_mask.size() != k_in.rows()) {
    throw DimensionError("multi_head_attention: key/value/mask row counts disagree");
  }
  const std::size_t head_dim = hidden / attn.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Var<T> q = linear(q_in, attn.query);
  Var<T> k = linear(k_in, attn.key);
  Var<T> v = linear(v_in, attn.value);
  std::vector<Var<T>> heads;
  heads.reserve(attn.heads);
  for (std::size_t h = 0; h < attn.heads; ++h) {
    const std::size_t off = h * head_dim;
    Var<T> qh = ad::slice_cols(q, off, head_dim);
    Var<T> kh = ad::slice_cols(k, off, head_dim);
    Var<T> vh = ad::slice_cols(v, off, head_dim);
    Var<T> scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), scale);
    Var<T> probs = ad::softmax_masked(scores, key_mask);
    if (weights) weights->push_back(probs.value());
    heads.push_back(ad::matmul(probs, vh));
  }
  Var<T> merged = attn.heads == 1 ? heads.front() : ad::concat_cols(heads);
  return linear(merged, attn.output);
}

template <typename T>
EncoderBlock<T> make_encoder_block(ParamStore<T>& store, const std::string& name,
                                   std::size_t hidden, std::size_t heads, std::size_t ffn_width) {
  EncoderBlock<T> block;
  block.attention = make_attention(store, name + ".attn", hidden, heads);
  block.ffn_in = make_linear(store, name + ".ffn_in", hidden, ffn_width);
  block.ffn_out = make_linear(store, name + ".ffn_out", ffn_width, hidden);
  block.norm1 = make_layer_norm(store, name + ".norm1", hidden);
  block.norm2 = make_layer_norm(store, name + ".norm2", hidden);
  return block;
}

template <typename T>
Var<T> encoder_block(const Var<T>& x, const RowMask& mask, const EncoderBlock<T>& block,
                     const ForwardContext& ctx) {
  if (x.cols() != block.attention.query.in) {
    throw DimensionError("encoder_block: input " + ad::shape_string(x.shape()) +
                         " vs hidden " + std::to_string(block.attention.query.in));
  }
  Var<T> attended = multi_head_attention(x, x, x, mask, block.attention);
  Var<T> mid = layer_norm(ad::add(x, attended), block.norm1);
  Var<T> inner = ad::relu(linear(mid, block.ffn_in));
  if (ctx.train && ctx.dropout > 0.0) {
    if (!ctx.rng) throw ContractError("encoder_block: dropout requested without a generator");
    inner = ad::dropout(inner, ctx.dropout, *ctx.rng, true);
  }
  Var<T> ffn = linear(inner, block.ffn_out);
  return layer_norm(ad::add(mid, ffn), block.norm2);
}

template <typename T>
std::vector<EncoderBlock<T>> make_encoder_stack(ParamStore<T>& store, const std::string& name,
                                                std::size_t depth, std::size_t hidden,
                                                std::size_t heads, std::size_t ffn_width) {
  std::vector<EncoderBlock<T>> blocks;
  for (std::size_t i = 0; i < depth; ++i) {
    blocks.push_back(make_encoder_block(store, name + "." + std::to_string(i), hidden, heads, ffn_width));
  }
  return blocks;
}

template <typename T>
Var<T> encoder_stack(const Var<T>& x, const RowMask& mask, const std::vector<EncoderBlock<T>>& blocks,
                     const ForwardContext& ctx) {
  Var<T> out = x;
  for (const auto& block : blocks) out = encoder_block(out, mask, block, ctx);
  return out;
}

template <typename T>
Var<T> gcn_layer(const Var<T>& h, const Tensor<T>& a_hat, const Var<T>& weight) {
  const std::size_t n = a_hat.rows();
  if (a_hat.rank() != 2 || a_hat.cols() != n || h.rows() != n) {
    throw DimensionError("gcn_layer: adjacency " + ad::shape_string(a_hat.shape()) +
                         " vs node features " + ad::shape_string(h.shape()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const T v = a_hat(i, j);
      if (!std::isfinite(static_cast<double>(v))) throw ContractError("gcn_layer: non-finite adjacency");
      const double tol = 1e-6 * std::max(1.0, std::abs(static_cast<double>(v)));
      if (std::abs(static_cast<double>(v - a_hat(j, i))) > tol) {
        throw ContractError("gcn_layer: adjacency is not symmetric at (" + std::to_string(i) +
                            ", " + std::to_string(j) + ")");
      }
    }
  }
  auto& g = h.graph();
  Var<T> a = g.constant(a_hat);
  return ad::relu(ad::matmul(ad::matmul(a, h), weight));
}

#define GEMO_INSTANTIATE_LAYERS(T)                                                                 \
  template Linear<T> make_linear(ParamStore<T>&, const std::string&, std::size_t, std::size_t, bool); \
  template Var<T> linear(const Var<T>&, const Linear<T>&);                                         \
  template LayerNorm<T> make_layer_norm(ParamStore<T>&, const std::string&, std::size_t);          \
  template Var<T> layer_norm(const Var<T>&, const LayerNorm<T>&);                                  \
  template Attention<T> make_attention(ParamStore<T>&, const std::string&, std::size_t, std::size_t); \
  template Var<T> multi_head_attention(const Var<T>&, const Var<T>&, const Var<T>&, const RowMask&, \
                                       const Attention<T>&, std::vector<Tensor<T>>*);              \
  template EncoderBlock<T> make_encoder_block(ParamStore<T>&, const std::string&, std::size_t,    \
                                              std::size_t, std::size_t);                           \
  template Var<T> encoder_block(const Var<T>&, const RowMask&, const EncoderBlock<T>&,             \
                                const ForwardContext&);                                            \
  template std::vector<EncoderBlock<T>> make_encoder_stack(ParamStore<T>&, const std::string&,     \
                                                           std::size_t, std::size_t, std::size_t,  \
                                                           std::size_t);                           \
  template Var<T> encoder_stack(const Var<T>&, const RowMask&, const std::vector<EncoderBlock<T>>&, \
                                const ForwardContext&);                                            \
  template Var<T> gcn_layer(const Var<T>&, const Tensor<T>&, const Var<T>&);

GEMO_INSTANTIATE_LAYERS(float)
GEMO_INSTANTIATE_LAYERS(double)

#undef GEMO_INSTANTIATE_LAYERS

}  // namespace gemo::nn
