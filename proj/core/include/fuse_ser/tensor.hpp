// Copyright 2026 The fuse-ser Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fuse_ser/error.hpp"

namespace fuse_ser {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads `self.grad` and accumulates into `self.inputs[i]->grad`.
  std::function<void(Node& self)> backward;

  bool is_leaf() const noexcept { return !backward; }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T{0});
  }
};

bool grad_enabled() noexcept;

struct KinkTapeState;
KinkTapeState* active_kink_tape() noexcept;
/// Records `natural` or, when replaying, returns the next stored decision.
std::uint64_t kink_decide(KinkTapeState& tape, std::uint64_t natural);

// Test hook: gradients flowing out of nodes whose op name matches are scaled
// by 1.5 during backward. Empty string disables.
void set_corrupt_backward_op(std::string op);
const std::string& corrupt_backward_op() noexcept;

}  // namespace detail

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Sequence of kink decisions (ReLU signs, pooling argmaxes) taken by the ops
/// of one forward pass on this thread. Replaying a tape makes a later pass
/// take the same decisions, i.e. stay on the same linear piece.
struct KinkTape {
  std::vector<std::uint64_t> decisions;
  std::size_t cursor = 0;
  std::size_t divergences = 0;  // replayed decisions that differ from the natural ones
};

namespace detail {
struct KinkTapeState {
  KinkTape* tape;
  bool replay;
};
}  // namespace detail

/// While alive, ops on this thread record into (kRecord, clearing it first)
/// or replay from (kReplay) `tape`.
class KinkTapeGuard {
 public:
  enum class Mode { kRecord, kReplay };
  KinkTapeGuard(KinkTape& tape, Mode mode);
  ~KinkTapeGuard();
  KinkTapeGuard(const KinkTapeGuard&) = delete;
  KinkTapeGuard& operator=(const KinkTapeGuard&) = delete;

 private:
  detail::KinkTapeState state_;
  detail::KinkTapeState* previous_;
};

/// Reference-counted handle to an n-dimensional row-major array that may
/// participate in a reverse-mode autodiff graph. Copies share storage; use
/// clone() or detach() for an independent copy.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;
  using NodeType = detail::Node<T>;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, bool requires_grad = false);
  BasicTensor(Shape shape, std::vector<T> data, bool requires_grad = false);
  BasicTensor(Shape shape, std::initializer_list<T> data, bool requires_grad = false)
      : BasicTensor(std::move(shape), std::vector<T>(data), requires_grad) {}

  static BasicTensor scalar(T value, bool requires_grad = false);
  static BasicTensor full(Shape shape, T value, bool requires_grad = false);
  static BasicTensor from_node(std::shared_ptr<NodeType> node);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return data().size(); }

  std::span<T> data();
  std::span<const T> data() const;
  T item() const;

  bool requires_grad() const;
  BasicTensor& set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  std::string_view op() const;
  bool is_leaf() const;

  BasicTensor detach() const;
  BasicTensor clone() const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(numel());
    auto src = data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(src[i]);
    return BasicTensor<U>(shape(), std::move(out), requires_grad());
  }

  const std::shared_ptr<NodeType>& node() const noexcept { return node_; }

 private:
  NodeType& checked() const;
  std::shared_ptr<NodeType> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// One entry of a traced graph.
struct GraphRecord {
  std::string_view op;
  std::vector<std::size_t> input_ids;
  std::size_t output_id = 0;
};

/// Topologically ordered view of every node reachable from a root tensor.
template <typename T>
class Graph {
 public:
  static Graph trace(const BasicTensor<T>& root);

  const std::vector<GraphRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(root)/d(root) = 1 and propagates in reverse topological order.
  /// Intermediate gradients are reset first; leaf gradients accumulate.
  void backward();

 private:
  std::vector<detail::Node<T>*> nodes_;
  std::vector<GraphRecord> records_;
  std::shared_ptr<detail::Node<T>> root_;
};

/// Reverse-mode pass from a scalar loss.
template <typename T>
void backward(const BasicTensor<T>& loss);

namespace detail {

/// Creates the output tensor of an operation, wiring it into the graph when
/// recording is enabled and any input requires a gradient.
template <typename T>
BasicTensor<T> make_result(std::string_view op, Shape shape, std::vector<T> data,
                           std::initializer_list<BasicTensor<T>> inputs,
                           std::function<void(Node<T>&)> backward_fn);

}  // namespace detail

}  // namespace fuse_ser
