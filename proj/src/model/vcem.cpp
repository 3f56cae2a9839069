// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/model/vcem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gemo::model {

bool any_set(const RowMask& mask) {
  return std::any_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; });
}

template <typename T>
VcemParams<T> make_vcem_params(nn::ParamStore<T>& store, const RunConfig& cfg) {
  const std::size_t d = cfg.hidden;
  VcemParams<T> p;
  p.hidden = d;
  p.scales = cfg.scales;
  p.gate_mode = cfg.gate_kind();
  p.w_q = &store.glorot("vcem.cam.w_q", d, d);
  p.w_k = &store.glorot("vcem.cam.w_k", d, d);
  p.w_v = &store.glorot("vcem.cam.w_v", d, d);
  p.gate = nn::make_linear(store, "vcem.gate", d, 1, false);
  p.mixer = nn::make_encoder_block(store, "vcem.mixer", d, cfg.heads, d);
  p.fusion = nn::make_encoder_stack(store, "vcem.fusion", cfg.depth, d, cfg.heads, d);
  p.scene_head = nn::make_linear(store, "vcem.scene_head", d, 3);
  p.face_head = nn::make_linear(store, "vcem.face_head", d, 3);
  p.object_head = nn::make_linear(store, "vcem.object_head", d, 3);
  return p;
}

template <typename T>
Var<T> cam_cross_attention(const Var<T>& scene_k, const Var<T>& faces, const RowMask& face_mask,
                           const VcemParams<T>& p, Tensor<T>* weights) {
  if (scene_k.rows() != 1 || scene_k.cols() != p.hidden || faces.cols() != p.hidden) {
    throw DimensionError("cam_cross_attention: scene " + ad::shape_string(scene_k.shape()) +
                         ", faces " + ad::shape_string(faces.shape()));
  }
  if (face_mask.size() != faces.rows()) throw DimensionError("cam_cross_attention: face mask length");
  if (!any_set(face_mask)) throw InvalidMaskError("cam_cross_attention: no valid faces");
  auto& g = faces.graph();
  Var<T> q = ad::matmul(ad::concat_rows<T>({scene_k, faces}), g.parameter(*p.w_q));
  Var<T> k = ad::matmul(faces, g.parameter(*p.w_k));
  Var<T> v = ad::matmul(faces, g.parameter(*p.w_v));
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.hidden));
  Var<T> attn = ad::softmax_masked(ad::scale(ad::matmul(q, ad::transpose(k)), scale), face_mask);
  if (weights) *weights = attn.value();
  return ad::matmul(attn, v);
}

template <typename T>
Var<T> scale_gates(const Var<T>& scene_k, const Var<T>& faces, const RowMask& face_mask,
                   const VcemParams<T>& p) {
  Var<T> rows = ad::concat_rows<T>({scene_k, faces});
  if (p.gate_mode == GateMode::kPerRow) return ad::sigmoid(nn::linear(rows, p.gate));
  RowMask valid{1};
  valid.insert(valid.end(), face_mask.begin(), face_mask.end());
  Var<T> w = ad::sigmoid(nn::linear(ad::masked_mean_rows(rows, valid), p.gate));  // 1×1
  std::vector<Var<T>> copies(rows.rows(), w);
  return ad::concat_rows(copies);
}

template <typename T>
Var<T> multiscale_gate_fuse(const std::vector<Var<T>>& h_all, const Var<T>& scenes,
                            const Var<T>& faces, const RowMask& face_mask, const VcemParams<T>& p,
                            std::vector<Tensor<T>>* gates) {
  if (h_all.empty() || h_all.size() != scenes.rows()) {
    throw ContractError("multiscale_gate_fuse: " + std::to_string(h_all.size()) +
                        " attended maps for " + std::to_string(scenes.rows()) + " scales");
  }
  Var<T> acc;
  for (std::size_t k = 0; k < h_all.size(); ++k) {
    Var<T> w = scale_gates(ad::slice_rows(scenes, k, 1), faces, face_mask, p);
    if (gates) gates->push_back(w.value());
    Var<T> term = ad::scale_rows(h_all[k], w);
    acc = acc.valid() ? ad::add(acc, term) : term;
  }
  return acc;
}

RowMask mixed_mask(const RowMask& face_mask, std::size_t scales) {
  RowMask m(1 + face_mask.size() + scales, 1);
  std::copy(face_mask.begin(), face_mask.end(), m.begin() + 1);
  return m;
}

template <typename T>
Var<T> face_scene_mix(const Var<T>& v_f, const Var<T>& scenes, const RowMask& face_mask,
                      const VcemParams<T>& p, const ForwardContext& ctx) {
  if (v_f.rows() != face_mask.size() + 1) throw DimensionError("face_scene_mix: v_f rows vs face mask");
  return nn::encoder_block(ad::concat_rows<T>({v_f, scenes}), mixed_mask(face_mask, scenes.rows()),
                           p.mixer, ctx);
}

template <typename T>
Var<T> visual_fuse(const Var<T>& v_fs, const RowMask& fs_mask, const Var<T>& objects,
                   const RowMask& object_mask, const VcemParams<T>& p, const ForwardContext& ctx) {
  if (fs_mask.size() != v_fs.rows() || object_mask.size() != objects.rows()) {
    throw DimensionError("visual_fuse: mask lengths disagree with row counts");
  }
  Var<T> tokens = v_fs;
  RowMask mask = fs_mask;
  if (objects.rows() > 0) {
    tokens = ad::concat_rows<T>({v_fs, objects});
    mask.insert(mask.end(), object_mask.begin(), object_mask.end());
  }
  Var<T> encoded = nn::encoder_stack(tokens, mask, p.fusion, ctx);
  return ad::masked_mean_rows(encoded, mask);
}

template <typename T>
CueLogits<T> cue_logits(const VisualCues<T>& cues, const VcemParams<T>& p) {
  auto& g = cues.faces.graph();
  CueLogits<T> out;
  out.scene = nn::linear(ad::mean_rows(cues.scenes), p.scene_head);
  out.face = nn::linear(ad::masked_mean_rows(cues.faces, cues.face_mask), p.face_head);
  out.has_objects = cues.objects.valid() && cues.objects.rows() > 0 && any_set(cues.object_mask);
  if (out.has_objects) {
    out.object = nn::linear(ad::masked_mean_rows(cues.objects, cues.object_mask), p.object_head);
  } else {
    out.object = g.constant(Tensor<T>({1, 3}));
  }
  return out;
}

template <typename T>
Var<T> vcem_forward(const VisualCues<T>& cues, const VcemParams<T>& p, const ForwardContext& ctx) {
  if (cues.scenes.rows() != p.scales) {
    throw DimensionError("vcem: " + std::to_string(cues.scenes.rows()) + " scene rows, expected " +
                         std::to_string(p.scales));
  }
  std::vector<Var<T>> h_all;
  for (std::size_t k = 0; k < p.scales; ++k) {
    h_all.push_back(cam_cross_attention(ad::slice_rows(cues.scenes, k, 1), cues.faces, cues.face_mask, p));
  }
  Var<T> v_f = multiscale_gate_fuse(h_all, cues.scenes, cues.faces, cues.face_mask, p);
  Var<T> v_fs = face_scene_mix(v_f, cues.scenes, cues.face_mask, p, ctx);
  return visual_fuse(v_fs, mixed_mask(cues.face_mask, p.scales), cues.objects, cues.object_mask, p, ctx);
}

template <typename T>
Var<T> vcem_forward_without_cam(const VisualCues<T>& cues, const VcemParams<T>& p,
                                const ForwardContext& ctx) {
  Var<T> tokens = ad::concat_rows<T>({cues.faces, cues.scenes});
  RowMask mask = cues.face_mask;
  mask.insert(mask.end(), cues.scenes.rows(), 1);
  return visual_fuse(tokens, mask, cues.objects, cues.object_mask, p, ctx);
}

#define GEMO_INSTANTIATE_VCEM(T)                                                                   \
  template VcemParams<T> make_vcem_params(nn::ParamStore<T>&, const RunConfig&);                   \
  template Var<T> cam_cross_attention(const Var<T>&, const Var<T>&, const RowMask&,                \
                                      const VcemParams<T>&, Tensor<T>*);                           \
  template Var<T> scale_gates(const Var<T>&, const Var<T>&, const RowMask&, const VcemParams<T>&); \
  template Var<T> multiscale_gate_fuse(const std::vector<Var<T>>&, const Var<T>&, const Var<T>&,   \
                                       const RowMask&, const VcemParams<T>&,                       \
                                       std::vector<Tensor<T>>*);                                   \
  template Var<T> face_scene_mix(const Var<T>&, const Var<T>&, const RowMask&,                     \
                                 const VcemParams<T>&, const ForwardContext&);                     \
  template Var<T> visual_fuse(const Var<T>&, const RowMask&, const Var<T>&, const RowMask&,        \
                              const VcemParams<T>&, const ForwardContext&);                        \
  template CueLogits<T> cue_logits(const VisualCues<T>&, const VcemParams<T>&);                    \
  template Var<T> vcem_forward(const VisualCues<T>&, const VcemParams<T>&, const ForwardContext&); \
  template Var<T> vcem_forward_without_cam(const VisualCues<T>&, const VcemParams<T>&,             \
                                           const ForwardContext&);

GEMO_INSTANTIATE_VCEM(float)
GEMO_INSTANTIATE_VCEM(double)

#undef GEMO_INSTANTIATE_VCEM

}  // namespace gemo::model
