// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gemo/config.hpp"
#include "gemo/data/batch.hpp"
#include "gemo/data/checkpoint.hpp"
#include "gemo/model/esem.hpp"
#include "gemo/model/vcem.hpp"
#include "gemo/model/vsim.hpp"
#include "gemo/objectives.hpp"

namespace gemo::harness {

using ad::Graph;
using ad::Tensor;
using ad::Var;

template <typename T>
struct ForwardResult {
  Var<T> group_logits;   // N×3
  Var<T> scene_logits;   // N×3
  Var<T> face_logits;    // N×3
  Var<T> object_logits;  // N×3, zero rows for samples without objects
  std::vector<std::uint8_t> object_included;
  Var<T> visual;    // N×hidden: F_v, projected where the variant has a projection
  Var<T> semantic;  // N×hidden: per-label class semantics (variants with ESEM)
  Var<T> global_semantic;  // F_t (variants with ESEM)
  Tensor<T> sims;   // N×1, similarity-gated variants only
  Tensor<T> gates;  // N×1
  obj::LossTerms<T> loss;
};

/// All learnable state of one variant plus the static class graphs. Every
/// parameter exists in every variant; a variant simply leaves some unused.
template <typename T>
class GroupEmotionModel {
 public:
  GroupEmotionModel(const RunConfig& cfg, const model::LexiconSet& lexicons);

  /// Runs the variant's wiring on a collated batch and computes the loss
  /// terms. `rng` drives dropout and is required when training with a
  /// nonzero rate. Similarity statistics are folded forward only when
  /// `update_stats` is set (and the batch statistics were used).
  ForwardResult<T> forward(Graph<T>& g, const data::Batch<T>& batch, bool train, Rng* rng,
                           bool update_stats = true);

  nn::ParamStore<T>& params() { return store_; }
  const nn::ParamStore<T>& params() const { return store_; }
  model::SimStats& sim_stats() { return stats_; }
  const model::SimStats& sim_stats() const { return stats_; }
  const RunConfig& config() const { return cfg_; }
  Variant variant() const { return variant_; }
  const std::array<model::ClassGraph<T>, model::kNumClasses>& class_graphs() const { return graphs_; }

  // Writes parameters (widened to double) and similarity stats.
  void export_state(data::Checkpoint& ckpt) const;
  // Restores parameters and stats; ContractError on a missing or misshaped name.
  void import_state(const data::Checkpoint& ckpt);

 private:
  RunConfig cfg_;
  Variant variant_;
  nn::ParamStore<T> store_;
  model::VcemParams<T> vcem_;
  model::EsemParams<T> esem_;
  model::VsimParams<T> vsim_;
  nn::Linear<T> cue_concat_head_;  // 3·hidden → 3
  nn::Linear<T> visual_head_;      // hidden → 3
  nn::Linear<T> concat_head_;      // 2·hidden → 3
  std::array<model::ClassGraph<T>, model::kNumClasses> graphs_;
  model::SimStats stats_;
};

std::vector<std::size_t> argmax_rows(const Tensor<float>& logits);
std::vector<std::size_t> argmax_rows(const Tensor<double>& logits);

}  // namespace gemo::harness
