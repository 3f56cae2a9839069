// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/autodiff/graph.hpp"

#include <string>

namespace gemo::ad {

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::variable(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), {}, grad_enabled(), {}});
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::parameter(Parameter<T>& param) {
  if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) {
    return Var<T>(this, it->second);
  }
  Node node{param.value, {}, grad_enabled(), {}};
  if (grad_enabled()) {
    Parameter<T>* target = &param;
    node.backward = [target](Graph&, const Tensor<T>& g) {
      if (target->grad.shape() != target->value.shape()) target->zero_grad();
      auto dst = target->grad.data();
      auto src = g.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    };
  }
  nodes_.push_back(std::move(node));
  param_nodes_.emplace(&param, nodes_.size() - 1);
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::record(Tensor<T> value, std::initializer_list<Var<T>> inputs,
                        BackwardFn backward) {
  return record(std::move(value), std::vector<Var<T>>(inputs), std::move(backward));
}

template <typename T>
Var<T> Graph<T>::record(Tensor<T> value, const std::vector<Var<T>>& inputs,
                        BackwardFn backward) {
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{}});
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
const Tensor<T>* Graph<T>::grad(const Var<T>& v) const {
  const Node& node = nodes_[v.id()];
  return node.requires_grad && node.grad.shape() == node.value.shape() ? &node.grad : nullptr;
}

template <typename T>
Tensor<T>* Graph<T>::grad_slot(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return nullptr;
  if (node.grad.shape() != node.value.shape()) node.grad = Tensor<T>(node.value.shape());
  return &node.grad;
}

template <typename T>
std::size_t Graph<T>::backward(const Var<T>& loss) {
  if (loss.value().size() != 1) {
    throw ContractError("backward seed must be a scalar, got shape " +
                        shape_string(loss.value().shape()));
  }
  if (!nodes_[loss.id()].requires_grad) return 0;
  grad_slot(loss.id())->fill(T(1));
  std::size_t visited = 0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward || node.grad.shape() != node.value.shape()) continue;
    node.backward(*this, node.grad);
    ++visited;
  }
  return visited;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace gemo::ad
