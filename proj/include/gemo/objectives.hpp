// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "gemo/autodiff/ops.hpp"

namespace gemo::obj {

using ad::Tensor;
using ad::Var;

struct SamConfig {
  double tau = 0.02;
  double epsilon = 1e-8;
  double weight_v2t = 1.0;
  double weight_t2v = 1.0;
  bool alpha_literal = false;  // exp(tau·sim) instead of exp(sim/tau)

  void validate() const;
};

/// Batch-mean of -log softmax(logits)[label] over the rows whose `include`
/// flag is set (all rows when `include` is empty). Returns a 1×1 zero
/// constant when no row is included.
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, const std::vector<int>& labels,
                     const std::vector<std::uint8_t>& include = {});

// (i, j) = cos(fv_i, ft_j).
template <typename T>
Var<T> pairwise_similarity(const Var<T>& fv, const Var<T>& ft);

template <typename T>
Var<T> match_probabilities(const Var<T>& sim, const SamConfig& cfg);

// q_ij = [l_i == l_j] / #{k : l_k == l_i}.
template <typename T>
Tensor<T> ground_truth_distribution(const std::vector<int>& labels);

// Both KL directions, each averaged over the N rows.
template <typename T>
Var<T> sam_loss_from_similarity(const Var<T>& sim, const std::vector<int>& labels, const SamConfig& cfg);

template <typename T>
Var<T> sam_loss(const Var<T>& fv, const Var<T>& ft, const std::vector<int>& labels, const SamConfig& cfg);

struct LossReport {
  double l_group = 0.0;
  double l_s = 0.0;
  double l_f = 0.0;
  double l_o = 0.0;
  double l_sam = 0.0;
  double l_total = 0.0;

  double component_sum() const { return l_group + l_s + l_f + l_o + l_sam; }
};

template <typename T>
struct LossTerms {
  Var<T> group, scene, face, object, sam;
  Var<T> total;  // differentiable unweighted sum
  LossReport report;
};

/// Sums the five components. The report's l_total is accumulated in double
/// from the component values.
template <typename T>
LossTerms<T> total_loss(const Var<T>& group, const Var<T>& scene, const Var<T>& face,
                        const Var<T>& object, const Var<T>& sam);

}  // namespace gemo::obj
