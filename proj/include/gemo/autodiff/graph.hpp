// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "gemo/autodiff/tensor.hpp"

namespace gemo::ad {

template <typename T>
class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; valid while the graph
/// that produced it is alive.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  bool valid() const noexcept { return graph_ != nullptr; }
  Graph<T>& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor<T>& value() const { return graph_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  T item() const { return value().item(); }

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

enum class GradMode { kEnabled, kDisabled };

/// Tape of executed operations. Nodes are appended in execution order, which
/// is a topological order; backward() walks the tape once in reverse.
template <typename T>
class Graph {
 public:
  // Receives the gradient of the loss w.r.t. this node's output and
  // accumulates into its inputs through grad_slot().
  using BackwardFn = std::function<void(Graph&, const Tensor<T>&)>;

  explicit Graph(GradMode mode = GradMode::kEnabled) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const noexcept { return mode_ == GradMode::kEnabled; }

  Var<T> constant(Tensor<T> value);

  // Leaf whose gradient is kept on the node (read back with grad()).
  Var<T> variable(Tensor<T> value);

  // Leaf bound to a parameter; backward accumulates into param.grad. Binding
  // the same parameter twice returns the same node.
  Var<T> parameter(Parameter<T>& param);

  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn backward);
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn backward);

  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(const Var<T>& v) const { return nodes_[v.id()].requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient held by a node after backward(); nullptr when none reached it.
  const Tensor<T>* grad(const Var<T>& v) const;

  // Zero-initialized accumulation buffer for node `id`, or nullptr when the
  // node does not participate in differentiation.
  Tensor<T>* grad_slot(std::size_t id);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Returns the number of
  /// operations whose backward rule ran.
  std::size_t backward(const Var<T>& loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  // deque keeps value() references valid while later ops append nodes
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> param_nodes_;
  GradMode mode_;
};

}  // namespace gemo::ad
