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

#include "fuse_ser/tensor.hpp"

#include <algorithm>
#include <unordered_map>

namespace fuse_ser {

namespace {

thread_local bool tl_grad_enabled = true;
thread_local detail::KinkTapeState* tl_kink_tape = nullptr;
thread_local std::string tl_corrupt_op;

}  // namespace

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kDegenerate: return "degenerate";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kUninitialized: return "uninitialized";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
  }
  return "unknown";
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace detail {

bool grad_enabled() noexcept { return tl_grad_enabled; }
KinkTapeState* active_kink_tape() noexcept { return tl_kink_tape; }

std::uint64_t kink_decide(KinkTapeState& state, std::uint64_t natural) {
  auto& tape = *state.tape;
  if (!state.replay) {
    tape.decisions.push_back(natural);
    return natural;
  }
  if (tape.cursor >= tape.decisions.size()) {
    throw InvalidArgument("kink tape exhausted: the replayed pass takes more decisions than were recorded");
  }
  const auto stored = tape.decisions[tape.cursor++];
  if (stored != natural) ++tape.divergences;
  return stored;
}

void set_corrupt_backward_op(std::string op) { tl_corrupt_op = std::move(op); }
const std::string& corrupt_backward_op() noexcept { return tl_corrupt_op; }

template <typename T>
BasicTensor<T> make_result(std::string_view op, Shape shape, std::vector<T> data,
                           std::initializer_list<BasicTensor<T>> inputs,
                           std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool needs = false;
  if (tl_grad_enabled) {
    for (const auto& in : inputs) {
      if (in.defined() && in.requires_grad()) {
        needs = true;
        break;
      }
    }
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(backward_fn);
  }
  return BasicTensor<T>::from_node(std::move(node));
}

}  // namespace detail

NoGradGuard::NoGradGuard() : previous_(tl_grad_enabled) { tl_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { tl_grad_enabled = previous_; }

KinkTapeGuard::KinkTapeGuard(KinkTape& tape, Mode mode)
    : state_{&tape, mode == Mode::kReplay}, previous_(tl_kink_tape) {
  if (mode == Mode::kRecord) tape.decisions.clear();
  tape.cursor = 0;
  tape.divergences = 0;
  tl_kink_tape = &state_;
}
KinkTapeGuard::~KinkTapeGuard() { tl_kink_tape = previous_; }

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, bool requires_grad)
    : node_(std::make_shared<NodeType>()) {
  node_->data.assign(fuse_ser::numel(shape), T{0});
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad)
    : node_(std::make_shared<NodeType>()) {
  if (fuse_ser::numel(shape) != data.size()) {
    throw DimensionError("tensor", "data", "shape " + to_string(shape) + " holds " +
                                               std::to_string(fuse_ser::numel(shape)) +
                                               " elements but " + std::to_string(data.size()) +
                                               " were given");
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return BasicTensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  std::vector<T> data(fuse_ser::numel(shape), value);
  return BasicTensor(std::move(shape), std::move(data), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_node(std::shared_ptr<NodeType> node) {
  BasicTensor t;
  t.node_ = std::move(node);
  return t;
}

template <typename T>
typename BasicTensor<T>::NodeType& BasicTensor<T>::checked() const {
  if (!node_) throw InvalidArgument("use of an undefined tensor");
  return *node_;
}

template <typename T>
const Shape& BasicTensor<T>::shape() const {
  return checked().shape;
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("tensor", std::to_string(axis), "rank is " + std::to_string(s.size()));
  }
  return s[axis];
}

template <typename T>
std::span<T> BasicTensor<T>::data() {
  return checked().data;
}

template <typename T>
std::span<const T> BasicTensor<T>::data() const {
  return checked().data;
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) {
    throw DimensionError("item", "all", "expected one element, tensor has shape " + to_string(shape()));
  }
  return data()[0];
}

template <typename T>
bool BasicTensor<T>::requires_grad() const {
  return checked().requires_grad;
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool value) {
  auto& n = checked();
  if (!n.is_leaf()) throw InvalidArgument("requires_grad can only be set on leaf tensors");
  n.requires_grad = value;
  return *this;
}

template <typename T>
bool BasicTensor<T>::has_grad() const {
  return !checked().grad.empty();
}

template <typename T>
std::span<const T> BasicTensor<T>::grad() const {
  return checked().grad;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_grad() {
  auto& n = checked();
  n.ensure_grad();
  return n.grad;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  auto& g = checked().grad;
  std::fill(g.begin(), g.end(), T{0});
}

template <typename T>
std::string_view BasicTensor<T>::op() const {
  return checked().op;
}

template <typename T>
bool BasicTensor<T>::is_leaf() const {
  return checked().is_leaf();
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  auto& n = checked();
  return BasicTensor(n.shape, n.data, false);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  auto& n = checked();
  BasicTensor out(n.shape, n.data, n.requires_grad);
  out.node_->grad = n.grad;
  return out;
}

template <typename T>
Graph<T> Graph<T>::trace(const BasicTensor<T>& root) {
  Graph g;
  if (!root.defined()) throw InvalidArgument("backward: undefined tensor");
  g.root_ = root.node();
  std::unordered_map<const detail::Node<T>*, std::size_t> ids;
  // Iterative post-order DFS so deep graphs cannot overflow the stack.
  std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
  std::unordered_map<const detail::Node<T>*, bool> visiting;
  stack.emplace_back(g.root_.get(), 0);
  visiting[g.root_.get()] = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      auto* child = node->inputs[next++].get();
      if (!ids.contains(child) && !visiting[child]) {
        visiting[child] = true;
        stack.emplace_back(child, 0);
      }
      continue;
    }
    ids[node] = g.nodes_.size();
    g.nodes_.push_back(node);
    stack.pop_back();
  }
  g.records_.reserve(g.nodes_.size());
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
    GraphRecord rec;
    rec.op = g.nodes_[i]->op;
    rec.output_id = i;
    for (const auto& in : g.nodes_[i]->inputs) rec.input_ids.push_back(ids.at(in.get()));
    g.records_.push_back(std::move(rec));
  }
  return g;
}

template <typename T>
void Graph<T>::backward() {
  for (auto* node : nodes_) {
    if (!node->is_leaf()) node->grad.assign(node->data.size(), T{0});
  }
  root_->ensure_grad();
  for (auto& g : root_->grad) g += T{1};
  const auto& corrupt = detail::corrupt_backward_op();
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto* node = *it;
    if (node->is_leaf()) continue;
    if (!corrupt.empty() && node->op == corrupt) {
      for (auto& g : node->grad) g *= T(1.5);
    }
    for (auto& in : node->inputs) {
      if (in->requires_grad) in->ensure_grad();
    }
    node->backward(*node);
  }
}

template <typename T>
void backward(const BasicTensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw DimensionError("backward", "all",
                         "loss must be a scalar, got shape " +
                             (loss.defined() ? to_string(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) {
    throw InvalidArgument("backward: loss does not depend on any tensor that requires a gradient");
  }
  Graph<T>::trace(loss).backward();
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class Graph<float>;
template class Graph<double>;
template void backward(const BasicTensor<float>&);
template void backward(const BasicTensor<double>&);
template BasicTensor<float> detail::make_result(std::string_view, Shape, std::vector<float>,
                                                std::initializer_list<BasicTensor<float>>,
                                                std::function<void(detail::Node<float>&)>);
template BasicTensor<double> detail::make_result(std::string_view, Shape, std::vector<double>,
                                                 std::initializer_list<BasicTensor<double>>,
                                                 std::function<void(detail::Node<double>&)>);

}  // namespace fuse_ser
