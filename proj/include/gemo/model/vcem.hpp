// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "gemo/config.hpp"
#include "gemo/nn/layers.hpp"

namespace gemo::model {

using ad::Graph;
using ad::Parameter;
using ad::RowMask;
using ad::Tensor;
using ad::Var;
using nn::ForwardContext;

/// One sample's cue features. Padded face/object rows are allowed as long
/// as their mask entry is 0.
template <typename T>
struct VisualCues {
  Var<T> faces;    // I×d
  Var<T> objects;  // J×d, J may be 0
  Var<T> scenes;   // K×d
  RowMask face_mask;
  RowMask object_mask;
};

template <typename T>
struct VcemParams {
  Parameter<T>* w_q = nullptr;
  Parameter<T>* w_k = nullptr;
  Parameter<T>* w_v = nullptr;
  nn::Linear<T> gate;  // d→1, no bias
  nn::EncoderBlock<T> mixer;
  std::vector<nn::EncoderBlock<T>> fusion;
  nn::Linear<T> scene_head;
  nn::Linear<T> face_head;
  nn::Linear<T> object_head;
  std::size_t hidden = 0;
  std::size_t scales = 0;
  GateMode gate_mode = GateMode::kPerRow;
};

template <typename T>
VcemParams<T> make_vcem_params(nn::ParamStore<T>& store, const RunConfig& cfg);

/// Queries from [scene_k; faces], keys and values from faces only, single
/// head scaled by 1/sqrt(d). Result is (1+I)×d; the scene row is kept.
template <typename T>
Var<T> cam_cross_attention(const Var<T>& scene_k, const Var<T>& faces, const RowMask& face_mask,
                           const VcemParams<T>& p, Tensor<T>* weights = nullptr);

// Gates for scale k: one per row of [scene_k; faces] (per_row) or a single
// gate from the pooled valid rows (per_scale). Shape (1+I)×1.
template <typename T>
Var<T> scale_gates(const Var<T>& scene_k, const Var<T>& faces, const RowMask& face_mask,
                   const VcemParams<T>& p);

// v^f = Σ_k w_k ⊙ h_k.
template <typename T>
Var<T> multiscale_gate_fuse(const std::vector<Var<T>>& h_all, const Var<T>& scenes,
                            const Var<T>& faces, const RowMask& face_mask, const VcemParams<T>& p,
                            std::vector<Tensor<T>>* gates = nullptr);

// One encoder block over [v^f; scenes].
template <typename T>
Var<T> face_scene_mix(const Var<T>& v_f, const Var<T>& scenes, const RowMask& face_mask,
                      const VcemParams<T>& p, const ForwardContext& ctx);

// Mask for the rows of [v^f; scenes]: scene row, faces, then every scale.
RowMask mixed_mask(const RowMask& face_mask, std::size_t scales);

// Fusion stack over [v_fs; objects] then masked mean: F_v, 1×d.
template <typename T>
Var<T> visual_fuse(const Var<T>& v_fs, const RowMask& fs_mask, const Var<T>& objects,
                   const RowMask& object_mask, const VcemParams<T>& p, const ForwardContext& ctx);

template <typename T>
struct CueLogits {
  Var<T> scene;
  Var<T> face;
  Var<T> object;  // zeros when the sample has no objects
  bool has_objects = false;
};

// Per-cue classifiers on the masked means of the raw cue sets.
template <typename T>
CueLogits<T> cue_logits(const VisualCues<T>& cues, const VcemParams<T>& p);

// Full module: CAM per scale, gating, mixer, fusion.
template <typename T>
Var<T> vcem_forward(const VisualCues<T>& cues, const VcemParams<T>& p, const ForwardContext& ctx);

// The same fusion stack applied straight to [faces; scenes; objects],
// without the mixer path.
template <typename T>
Var<T> vcem_forward_without_cam(const VisualCues<T>& cues, const VcemParams<T>& p,
                                const ForwardContext& ctx);

bool any_set(const RowMask& mask);

}  // namespace gemo::model
