// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/harness/model.hpp"

#include <map>
#include <string>

namespace gemo::harness {

namespace {

bool uses_sam(Variant v) { return v == Variant::kB4NoSff || v == Variant::kB4; }

template <typename T>
std::vector<std::size_t> argmax_impl(const Tensor<T>& logits) {
  std::vector<std::size_t> out(logits.rows(), 0);
  for (std::size_t r = 0; r < logits.rows(); ++r)
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, out[r])) out[r] = c;
  return out;
}

}  // namespace

std::vector<std::size_t> argmax_rows(const Tensor<float>& logits) { return argmax_impl(logits); }
std::vector<std::size_t> argmax_rows(const Tensor<double>& logits) { return argmax_impl(logits); }

template <typename T>
GroupEmotionModel<T>::GroupEmotionModel(const RunConfig& cfg, const model::LexiconSet& lexicons)
    : cfg_(cfg), variant_(cfg.variant_kind()), store_(cfg.seed) {
  cfg_.validate();
  if (lexicons.dim != cfg_.d_e) {
    throw ConfigError("d_e: config says " + std::to_string(cfg_.d_e) + " but the lexicons carry width " +
                      std::to_string(lexicons.dim));
  }
  vcem_ = model::make_vcem_params(store_, cfg_);
  esem_ = model::make_esem_params(store_, cfg_);
  vsim_ = model::make_vsim_params(store_, cfg_);
  cue_concat_head_ = nn::make_linear(store_, "head.cue_concat", 3 * cfg_.hidden, 3);
  visual_head_ = nn::make_linear(store_, "head.visual", cfg_.hidden, 3);
  concat_head_ = nn::make_linear(store_, "head.visual_semantic", 2 * cfg_.hidden, 3);
  for (std::size_t c = 0; c < model::kNumClasses; ++c) {
    graphs_[c] = model::build_class_graph<T>(lexicons.classes[c]);
  }
  stats_.momentum = cfg_.sim_momentum;
}

template <typename T>
ForwardResult<T> GroupEmotionModel<T>::forward(Graph<T>& g, const data::Batch<T>& batch, bool train,
                                               Rng* rng, bool update_stats) {
  if (batch.dim != cfg_.hidden) {
    throw DimensionError("forward: feature width " + std::to_string(batch.dim) + " but hidden size is " +
                         std::to_string(cfg_.hidden));
  }
  if (batch.scales != cfg_.scales) {
    throw DimensionError("forward: " + std::to_string(batch.scales) + " scene rows but scales is " +
                         std::to_string(cfg_.scales));
  }
  const nn::ForwardContext ctx{train, cfg_.dropout, rng};
  const std::size_t n = batch.size;
  ForwardResult<T> out;

  std::vector<Var<T>> scene_rows, face_rows, object_rows, group_rows, visual_rows;
  for (std::size_t i = 0; i < n; ++i) {
    model::VisualCues<T> cues;
    cues.faces = g.constant(batch.sample_faces(i));
    cues.objects = g.constant(batch.sample_objects(i));
    cues.scenes = g.constant(batch.sample_scenes(i));
    cues.face_mask = batch.face_mask[i];
    cues.object_mask = batch.object_mask[i];

    const auto cue = model::cue_logits(cues, vcem_);
    scene_rows.push_back(cue.scene);
    face_rows.push_back(cue.face);
    object_rows.push_back(cue.object);
    out.object_included.push_back(cue.has_objects ? 1 : 0);

    switch (variant_) {
      case Variant::kB1: {
        Var<T> objects = cue.has_objects ? ad::masked_mean_rows(cues.objects, cues.object_mask)
                                         : g.constant(Tensor<T>({1, cfg_.hidden}));
        Var<T> pooled = ad::concat_cols<T>({ad::mean_rows(cues.scenes),
                                            ad::masked_mean_rows(cues.faces, cues.face_mask), objects});
        group_rows.push_back(nn::linear(pooled, cue_concat_head_));
        break;
      }
      case Variant::kB2NoCam:
        visual_rows.push_back(model::vcem_forward_without_cam(cues, vcem_, ctx));
        break;
      default:
        visual_rows.push_back(model::vcem_forward(cues, vcem_, ctx));
        break;
    }
  }
  out.scene_logits = ad::concat_rows(scene_rows);
  out.face_logits = ad::concat_rows(face_rows);
  out.object_logits = ad::concat_rows(object_rows);

  if (variant_ == Variant::kB1) {
    out.group_logits = ad::concat_rows(group_rows);
  } else if (variant_ == Variant::kB2 || variant_ == Variant::kB2NoCam) {
    out.visual = ad::concat_rows(visual_rows);
    out.group_logits = nn::linear(out.visual, visual_head_);
  } else {
    const auto sem = model::esem_forward(g, graphs_, esem_, ctx);
    out.global_semantic = sem.semantic;
    std::vector<Var<T>> per_label;
    for (int label : batch.labels) {
      if (label < 0 || label >= static_cast<int>(model::kNumClasses)) {
        throw ContractError("forward: label " + std::to_string(label) + " outside {0,1,2}");
      }
      per_label.push_back(sem.class_semantics[static_cast<std::size_t>(label)]);
    }
    out.semantic = ad::concat_rows(per_label);
    Var<T> visual = ad::concat_rows(visual_rows);
    if (variant_ == Variant::kB3) {
      out.visual = visual;
      std::vector<Var<T>> rows;
      for (std::size_t i = 0; i < n; ++i) {
        rows.push_back(ad::concat_cols<T>({visual_rows[i], sem.semantic}));
      }
      out.group_logits = nn::linear(ad::concat_rows(rows), concat_head_);
    } else {
      auto fused = variant_ == Variant::kB4NoSff
                       ? model::plain_fuse(visual, sem.semantic, vsim_)
                       : model::similarity_fuse(visual, sem.semantic, stats_, vsim_, ctx, update_stats);
      out.visual = fused.projected;
      out.sims = fused.sims;
      out.gates = fused.gates;
      std::vector<Var<T>> rows;
      for (const auto& tokens : fused.tokens) rows.push_back(model::group_encode(tokens, vsim_, ctx).logits);
      out.group_logits = ad::concat_rows(rows);
    }
  }

  Var<T> sam = g.constant(Tensor<T>::scalar(T(0)));
  if (uses_sam(variant_)) {
    obj::SamConfig sc;
    sc.tau = cfg_.tau;
    sc.epsilon = cfg_.sam_eps;
    sc.alpha_literal = cfg_.sam_alpha_literal;
    sam = obj::sam_loss(out.visual, out.semantic, batch.labels, sc);
  }
  out.loss = obj::total_loss(obj::cross_entropy(out.group_logits, batch.labels),
                             obj::cross_entropy(out.scene_logits, batch.labels),
                             obj::cross_entropy(out.face_logits, batch.labels),
                             obj::cross_entropy(out.object_logits, batch.labels, out.object_included), sam);
  return out;
}

template <typename T>
void GroupEmotionModel<T>::export_state(data::Checkpoint& ckpt) const {
  ckpt.params.clear();
  for (const auto* p : store_.all()) ckpt.params.emplace_back(p->name, p->value.template cast<double>());
  ckpt.sim_stats = stats_;
}

template <typename T>
void GroupEmotionModel<T>::import_state(const data::Checkpoint& ckpt) {
  std::map<std::string, const Tensor<double>*> by_name;
  for (const auto& [name, t] : ckpt.params) by_name[name] = &t;
  for (auto* p : store_.all()) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw ContractError("checkpoint lacks parameter '" + p->name + "'");
    if (it->second->shape() != p->value.shape()) {
      throw ContractError("checkpoint parameter '" + p->name + "' has shape " +
                          ad::shape_string(it->second->shape()) + ", expected " +
                          ad::shape_string(p->value.shape()));
    }
    p->value = it->second->template cast<T>();
    p->zero_grad();
  }
  if (by_name.size() != store_.size()) throw ContractError("checkpoint holds parameters this model does not have");
  stats_ = ckpt.sim_stats;
}

template class GroupEmotionModel<float>;
template class GroupEmotionModel<double>;

}  // namespace gemo::harness
