// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gemo/autodiff/tensor.hpp"

namespace gemo::nn {

using ad::Parameter;
using ad::Tensor;

enum class DecayUnit { kEpoch, kIteration };

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay = 0.9;  // multiplicative, applied once per DecayUnit
  DecayUnit decay_unit = DecayUnit::kEpoch;
};

// lr0 · decay^n where n counts epochs or completed steps depending on the unit.
double scheduled_lr(const AdamOptions& opt, std::size_t epoch, std::uint64_t step);

/// Moments are kept in double regardless of parameter precision so that a
/// checkpoint written from an f32 run reloads without rounding drift.
struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

struct AdamState {
  std::uint64_t t = 0;
  std::map<std::string, AdamMoments> moments;  // keyed by parameter name
};

// One bias-corrected update of every parameter with learning rate `lr`.
// Each parameter must carry a gradient of its own shape (ContractError
// otherwise). Moments are created lazily on first sight of a name.
template <typename T>
void adam_step(const std::vector<Parameter<T>*>& params, AdamState& state, const AdamOptions& opt,
               double lr);

}  // namespace gemo::nn
