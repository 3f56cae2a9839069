// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/nn/adam.hpp"

#include <cmath>

#include "gemo/errors.hpp"

namespace gemo::nn {

double scheduled_lr(const AdamOptions& opt, std::size_t epoch, std::uint64_t step) {
  const double n = opt.decay_unit == DecayUnit::kEpoch ? static_cast<double>(epoch)
                                                       : static_cast<double>(step);
  return opt.lr * std::pow(opt.decay, n);
}

template <typename T>
void adam_step(const std::vector<Parameter<T>*>& params, AdamState& state, const AdamOptions& opt,
               double lr) {
  for (const auto* p : params) {
    if (p->grad.shape() != p->value.shape()) {
      throw ContractError("adam_step: parameter '" + p->name + "' has no gradient");
    }
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (auto* p : params) {
    auto& mom = state.moments[p->name];
    const std::size_t n = p->value.size();
    if (mom.m.size() != n) {
      if (!mom.m.empty()) {
        throw ContractError("adam_step: moment size mismatch for '" + p->name + "'");
      }
      mom.m.assign(n, 0.0);
      mom.v.assign(n, 0.0);
    }
    auto w = p->value.data();
    auto g = p->grad.data();
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = static_cast<double>(g[i]);
      mom.m[i] = opt.beta1 * mom.m[i] + (1.0 - opt.beta1) * gi;
      mom.v[i] = opt.beta2 * mom.v[i] + (1.0 - opt.beta2) * gi * gi;
      const double m_hat = mom.m[i] / c1;
      const double v_hat = mom.v[i] / c2;
      w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * m_hat / (std::sqrt(v_hat) + opt.eps));
    }
  }
}

template void adam_step(const std::vector<Parameter<float>*>&, AdamState&, const AdamOptions&, double);
template void adam_step(const std::vector<Parameter<double>*>&, AdamState&, const AdamOptions&, double);

}  // namespace gemo::nn
