// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/model/vsim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gemo::model {

void SimStats::update(double batch_mean, double batch_std) {
  batch_std = std::max(batch_std, 1e-6);
  if (count == 0) {
    mean = batch_mean;
    std = batch_std;
  } else {
    mean = momentum * mean + (1.0 - momentum) * batch_mean;
    std = std::max(momentum * std + (1.0 - momentum) * batch_std, 1e-6);
  }
  ++count;
}

template <typename T>
VsimParams<T> make_vsim_params(nn::ParamStore<T>& store, const RunConfig& cfg) {
  VsimParams<T> p;
  p.hidden = cfg.hidden;
  p.visual_proj = nn::make_linear(store, "vsim.visual_proj", cfg.hidden, cfg.hidden);
  p.fusion = nn::make_encoder_stack(store, "vsim.fusion", cfg.depth, cfg.hidden, cfg.heads, cfg.hidden);
  p.group_head = nn::make_linear(store, "vsim.group_head", cfg.hidden, 3);
  return p;
}

namespace {

template <typename T>
void check_inputs(const Var<T>& visual, const Var<T>& semantic, std::size_t hidden) {
  if (visual.cols() != hidden || semantic.rows() != 1 || semantic.cols() != hidden) {
    throw DimensionError("similarity fusion: visual " + ad::shape_string(visual.shape()) +
                         ", semantic " + ad::shape_string(semantic.shape()) + ", hidden " +
                         std::to_string(hidden));
  }
}

}  // namespace

template <typename T>
SimilarityFusion<T> similarity_fuse(const Var<T>& visual, const Var<T>& semantic,
                                    SimStats& stats, const VsimParams<T>& p,
                                    const ForwardContext& ctx, bool update_stats) {
  check_inputs(visual, semantic, p.hidden);
  const std::size_t n = visual.rows();
  SimilarityFusion<T> out;
  out.projected = nn::linear(visual, p.visual_proj);
  std::vector<Var<T>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back(ad::cosine_similarity(ad::slice_rows(out.projected, i, 1), semantic));
  }
  Var<T> sims = ad::concat_rows(rows);  // N×1
  out.sims = sims.value();

  Var<T> z;
  if (ctx.train && n >= 2) {
    z = ad::standardize(sims, 1e-8);
    if (update_stats) {
      double mu = 0.0;
      for (T s : sims.value().values()) mu += static_cast<double>(s);
      mu /= static_cast<double>(n);
      double var = 0.0;
      for (T s : sims.value().values()) var += (static_cast<double>(s) - mu) * (static_cast<double>(s) - mu);
      stats.update(mu, std::sqrt(var / static_cast<double>(n)));
    }
  } else {
    z = ad::scale(ad::add_scalar(sims, -stats.mean), 1.0 / (stats.std + 1e-8));
  }
  Var<T> gates = ad::sigmoid(z);
  out.gates = gates.value();
  for (std::size_t i = 0; i < n; ++i) {
    Var<T> g = ad::slice_rows(gates, i, 1);
    Var<T> pair = ad::concat_rows<T>({ad::slice_rows(out.projected, i, 1), semantic});
    out.tokens.push_back(ad::scale_rows(pair, ad::concat_rows<T>({g, g})));
  }
  return out;
}

template <typename T>
SimilarityFusion<T> plain_fuse(const Var<T>& visual, const Var<T>& semantic, const VsimParams<T>& p) {
  check_inputs(visual, semantic, p.hidden);
  SimilarityFusion<T> out;
  out.projected = nn::linear(visual, p.visual_proj);
  for (std::size_t i = 0; i < visual.rows(); ++i) {
    out.tokens.push_back(ad::concat_rows<T>({ad::slice_rows(out.projected, i, 1), semantic}));
  }
  return out;
}

template <typename T>
GroupOutput<T> group_encode(const Var<T>& tokens, const VsimParams<T>& p, const ForwardContext& ctx) {
  if (tokens.cols() != p.hidden) {
    throw DimensionError("group_encode: tokens " + ad::shape_string(tokens.shape()));
  }
  Var<T> encoded = nn::encoder_stack(tokens, ad::RowMask(tokens.rows(), 1), p.fusion, ctx);
  GroupOutput<T> out;
  out.group = ad::mean_rows(encoded);
  out.logits = nn::linear(out.group, p.group_head);
  return out;
}

#define GEMO_INSTANTIATE_VSIM(T)                                                                   \
  template VsimParams<T> make_vsim_params(nn::ParamStore<T>&, const RunConfig&);                   \
  template SimilarityFusion<T> similarity_fuse(const Var<T>&, const Var<T>&, SimStats&,            \
                                               const VsimParams<T>&, const ForwardContext&, bool); \
  template SimilarityFusion<T> plain_fuse(const Var<T>&, const Var<T>&, const VsimParams<T>&);     \
  template GroupOutput<T> group_encode(const Var<T>&, const VsimParams<T>&, const ForwardContext&);

GEMO_INSTANTIATE_VSIM(float)
GEMO_INSTANTIATE_VSIM(double)

#undef GEMO_INSTANTIATE_VSIM

}  // namespace gemo::model
