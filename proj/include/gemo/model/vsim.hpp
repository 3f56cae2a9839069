// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "gemo/config.hpp"
#include "gemo/nn/layers.hpp"

namespace gemo::model {

using ad::Graph;
using ad::Tensor;
using ad::Var;
using nn::ForwardContext;

/// Running mean/std of the similarity scores, used whenever batch
/// statistics are unavailable (eval, or a batch of one).
struct SimStats {
  double mean = 0.0;
  double std = 1.0;
  double momentum = 0.9;
  std::uint64_t count = 0;  // number of batches folded in

  // First call copies the batch values; later calls blend with `momentum`
  // weight on the running value. std is floored at 1e-6.
  void update(double batch_mean, double batch_std);
};

template <typename T>
struct VsimParams {
  nn::Linear<T> visual_proj;  // hidden→hidden
  std::vector<nn::EncoderBlock<T>> fusion;
  nn::Linear<T> group_head;   // hidden→3
  std::size_t hidden = 0;
};

template <typename T>
VsimParams<T> make_vsim_params(nn::ParamStore<T>& store, const RunConfig& cfg);

template <typename T>
struct SimilarityFusion {
  std::vector<Var<T>> tokens;  // per sample, 2×hidden: g·[proj F_v; F_t]
  Var<T> projected;            // N×hidden, proj(F_v)
  Tensor<T> sims;              // N×1
  Tensor<T> gates;             // N×1
};

/// sim_n = cos(proj F_v[n], F_t); z standardized with batch statistics when
/// `ctx.train` and N >= 2, otherwise with `stats`; gate = sigmoid(z). In that
/// batch-statistics case `stats` is folded forward when `update_stats`.
template <typename T>
SimilarityFusion<T> similarity_fuse(const Var<T>& visual, const Var<T>& semantic,
                                    SimStats& stats, const VsimParams<T>& p,
                                    const ForwardContext& ctx, bool update_stats = true);

// The same arrangement without the gate: tokens [proj F_v; F_t].
template <typename T>
SimilarityFusion<T> plain_fuse(const Var<T>& visual, const Var<T>& semantic, const VsimParams<T>& p);

template <typename T>
struct GroupOutput {
  Var<T> group;   // F_group, 1×hidden
  Var<T> logits;  // 1×3
};

template <typename T>
GroupOutput<T> group_encode(const Var<T>& tokens, const VsimParams<T>& p, const ForwardContext& ctx);

}  // namespace gemo::model
