// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gemo::ad {

template <typename T>
GradCheckResult check_gradients(const std::vector<Parameter<T>*>& params,
                                const std::function<Var<T>(Graph<T>&)>& loss,
                                const GradCheckOptions& options) {
  for (auto* p : params) p->zero_grad();
  {
    Graph<T> graph;
    Var<T> out = loss(graph);
    graph.backward(out);
  }

  auto evaluate = [&]() {
    Graph<T> graph(GradMode::kDisabled);
    return static_cast<double>(loss(graph).item());
  };

  GradCheckResult result;
  for (auto* p : params) {
    const std::size_t n = p->value.size();
    std::size_t stride = 1;
    if (options.max_entries_per_tensor > 0 && n > options.max_entries_per_tensor) {
      stride = (n + options.max_entries_per_tensor - 1) / options.max_entries_per_tensor;
    }
    for (std::size_t i = 0; i < n; i += stride) {
      const T original = p->value[i];
      p->value[i] = static_cast<T>(static_cast<double>(original) + options.step);
      const double plus = evaluate();
      p->value[i] = static_cast<T>(static_cast<double>(original) - options.step);
      const double minus = evaluate();
      p->value[i] = original;

      const double numeric = (plus - minus) / (2.0 * options.step);
      const double analytic = static_cast<double>(p->grad[i]);
      double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
      if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
      ++result.checked;
      if (err > result.max_rel_error || result.worst_name.empty()) {
        result.max_rel_error = err;
        result.worst_name = p->name;
        result.worst_index = i;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }
  result.passed = result.max_rel_error < options.tolerance;
  return result;
}

template GradCheckResult check_gradients<float>(const std::vector<Parameter<float>*>&,
                                                const std::function<Var<float>(Graph<float>&)>&,
                                                const GradCheckOptions&);
template GradCheckResult check_gradients<double>(const std::vector<Parameter<double>*>&,
                                                 const std::function<Var<double>(Graph<double>&)>&,
                                                 const GradCheckOptions&);

}  // namespace gemo::ad
