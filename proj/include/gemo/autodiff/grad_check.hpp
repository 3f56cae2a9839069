// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "gemo/autodiff/graph.hpp"

namespace gemo::ad {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // 0 checks every entry; otherwise entries are visited with a fixed stride.
  std::size_t max_entries_per_tensor = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_name;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

/// Compares reverse-mode gradients against central differences
/// (f(x+h) - f(x-h)) / 2h for every entry of every parameter. The error of an
/// entry is |analytic - numeric| / max(1, |numeric|).
///
/// `loss` must bind the parameters through Graph::parameter() and return a
/// scalar; it is called once with gradients enabled and twice per entry
/// without.
template <typename T>
GradCheckResult check_gradients(const std::vector<Parameter<T>*>& params,
                                const std::function<Var<T>(Graph<T>&)>& loss,
                                const GradCheckOptions& options = {});

}  // namespace gemo::ad
