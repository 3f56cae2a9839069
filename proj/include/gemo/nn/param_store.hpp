// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "gemo/autodiff/tensor.hpp"

namespace gemo::nn {

using ad::Parameter;
using ad::Tensor;

/// Named parameters in creation order. Each initializer draws from a stream
/// seeded by (run seed, parameter name), so values do not depend on which
/// other parameters exist or the order they were created in.
template <typename T>
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;

  Parameter<T>& add(const std::string& name, Tensor<T> value);

  // Uniform in ±sqrt(6 / (fan_in + fan_out)), shape fan_in×fan_out.
  Parameter<T>& glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out);
  Parameter<T>& zeros(const std::string& name, ad::Shape shape);
  Parameter<T>& ones(const std::string& name, ad::Shape shape);

  Parameter<T>& get(const std::string& name);
  const Parameter<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::vector<Parameter<T>*> all();
  std::vector<const Parameter<T>*> all() const;

  void zero_grad();
  std::size_t scalar_count() const;
  std::size_t size() const noexcept { return params_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace gemo::nn
