// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/objectives.hpp"

#include <cmath>
#include <string>

namespace gemo::obj {

void SamConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("sam: tau must be positive");
  if (!(epsilon >= 0.0)) throw ConfigError("sam: epsilon must be nonnegative");
}

template <typename T>
Var<T> cross_entropy(const Var<T>& logits, const std::vector<int>& labels,
                     const std::vector<std::uint8_t>& include) {
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  if (labels.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
  }
  if (!include.empty() && include.size() != n) throw DimensionError("cross_entropy: include mask length");
  Tensor<T> pick({n, c});
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw ContractError("cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " +
                          std::to_string(c) + ")");
    }
    if (!include.empty() && !include[i]) continue;
    pick(i, static_cast<std::size_t>(labels[i])) = T(1);
    ++count;
  }
  auto& g = logits.graph();
  if (count == 0) return g.constant(Tensor<T>::scalar(T(0)));
  Var<T> ls = ad::log_softmax_rows(logits);
  return ad::scale(ad::sum(ad::mul(ls, g.constant(pick))), -1.0 / static_cast<double>(count));
}

template <typename T>
Var<T> pairwise_similarity(const Var<T>& fv, const Var<T>& ft) {
  return ad::pairwise_cosine(fv, ft);
}

template <typename T>
Var<T> match_probabilities(const Var<T>& sim, const SamConfig& cfg) {
  cfg.validate();
  return ad::softmax_rows(ad::scale(sim, cfg.alpha_literal ? cfg.tau : 1.0 / cfg.tau));
}

template <typename T>
Tensor<T> ground_truth_distribution(const std::vector<int>& labels) {
  const std::size_t n = labels.size();
  Tensor<T> q({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t same = 0;
    for (std::size_t j = 0; j < n; ++j) same += labels[i] == labels[j];
    for (std::size_t j = 0; j < n; ++j) {
      if (labels[i] == labels[j]) q(i, j) = T(1) / static_cast<T>(same);
    }
  }
  return q;
}

namespace {

// (1/N)·Σ q log(q / (p + eps)) with q = 0 terms dropped.
template <typename T>
Var<T> kl_rows(const Var<T>& p, const Tensor<T>& q, double eps) {
  double entropy_part = 0.0;
  for (T v : q.values()) {
    if (v != T(0)) entropy_part += static_cast<double>(v) * std::log(static_cast<double>(v));
  }
  const double inv_n = 1.0 / static_cast<double>(q.rows());
  Var<T> cross = ad::weighted_log_sum(p, q, eps);
  return ad::add_scalar(ad::scale(cross, -inv_n), entropy_part * inv_n);
}

}  // namespace

template <typename T>
Var<T> sam_loss_from_similarity(const Var<T>& sim, const std::vector<int>& labels, const SamConfig& cfg) {
  const std::size_t n = labels.size();
  if (n == 0) throw ContractError("sam_loss: empty batch");
  if (sim.rows() != n || sim.cols() != n) {
    throw DimensionError("sam_loss: similarity " + ad::shape_string(sim.shape()) + " for " +
                         std::to_string(n) + " labels");
  }
  const Tensor<T> q = ground_truth_distribution<T>(labels);
  Var<T> v2t = kl_rows(match_probabilities(sim, cfg), q, cfg.epsilon);
  Var<T> t2v = kl_rows(match_probabilities(ad::transpose(sim), cfg), q, cfg.epsilon);
  return ad::add(ad::scale(v2t, cfg.weight_v2t), ad::scale(t2v, cfg.weight_t2v));
}

template <typename T>
Var<T> sam_loss(const Var<T>& fv, const Var<T>& ft, const std::vector<int>& labels, const SamConfig& cfg) {
  return sam_loss_from_similarity(pairwise_similarity(fv, ft), labels, cfg);
}

template <typename T>
LossTerms<T> total_loss(const Var<T>& group, const Var<T>& scene, const Var<T>& face,
                        const Var<T>& object, const Var<T>& sam) {
  LossTerms<T> t{group, scene, face, object, sam, {}, {}};
  t.total = ad::add(ad::add(ad::add(ad::add(group, scene), face), object), sam);
  t.report.l_group = static_cast<double>(group.item());
  t.report.l_s = static_cast<double>(scene.item());
  t.report.l_f = static_cast<double>(face.item());
  t.report.l_o = static_cast<double>(object.item());
  t.report.l_sam = static_cast<double>(sam.item());
  t.report.l_total = t.report.component_sum();
  return t;
}

#define GEMO_INSTANTIATE_OBJ(T)                                                                    \
  template Var<T> cross_entropy(const Var<T>&, const std::vector<int>&,                            \
                                const std::vector<std::uint8_t>&);                                 \
  template Var<T> pairwise_similarity(const Var<T>&, const Var<T>&);                               \
  template Var<T> match_probabilities(const Var<T>&, const SamConfig&);                            \
  template Tensor<T> ground_truth_distribution<T>(const std::vector<int>&);                        \
  template Var<T> sam_loss_from_similarity(const Var<T>&, const std::vector<int>&, const SamConfig&); \
  template Var<T> sam_loss(const Var<T>&, const Var<T>&, const std::vector<int>&, const SamConfig&); \
  template LossTerms<T> total_loss(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&,     \
                                   const Var<T>&);

GEMO_INSTANTIATE_OBJ(float)
GEMO_INSTANTIATE_OBJ(double)

#undef GEMO_INSTANTIATE_OBJ

}  // namespace gemo::obj
