// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/nn/param_store.hpp"

#include <cmath>

#include "gemo/rng.hpp"

namespace gemo::nn {

template <typename T>
Parameter<T>& ParamStore<T>::add(const std::string& name, Tensor<T> value) {
  if (index_.contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  auto param = std::make_unique<Parameter<T>>();
  param->name = name;
  param->value = std::move(value);
  param->zero_grad();
  index_.emplace(name, params_.size());
  params_.push_back(std::move(param));
  return *params_.back();
}

template <typename T>
Parameter<T>& ParamStore<T>::glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out) {
  Rng rng(mix_seed(seed_, hash_text(name)));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> w({fan_in, fan_out});
  for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return add(name, std::move(w));
}

template <typename T>
Parameter<T>& ParamStore<T>::zeros(const std::string& name, ad::Shape shape) {
  return add(name, Tensor<T>(std::move(shape), T(0)));
}

template <typename T>
Parameter<T>& ParamStore<T>::ones(const std::string& name, ad::Shape shape) {
  return add(name, Tensor<T>(std::move(shape), T(1)));
}

template <typename T>
Parameter<T>& ParamStore<T>::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return *params_[it->second];
}

template <typename T>
const Parameter<T>& ParamStore<T>::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return *params_[it->second];
}

template <typename T>
std::vector<Parameter<T>*> ParamStore<T>::all() {
  std::vector<Parameter<T>*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> ParamStore<T>::all() const {
  std::vector<const Parameter<T>*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace gemo::nn
