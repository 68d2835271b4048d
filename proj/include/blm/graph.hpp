#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "blm/tensor.hpp"

namespace blm {

struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  bool valid() const { return id != std::numeric_limits<std::size_t>::max(); }
};

// Reverse-mode tape. Every op appends one node holding its value and a
// closure that pushes the node's gradient onto its inputs. Nodes are only
// appended, so node order is a topological order.
template <class T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& out_grad)>;

  Var constant(Tensor<T> value) { return push(std::move(value), false, {}); }
  Var leaf(Tensor<T> value) { return push(std::move(value), true, {}); }

  // Parameter leaf; its gradient is routed to `slot` by accumulate_param_grads.
  Var param(const Parameter<T>& p, std::size_t slot) {
    Var v = push(p.value, true, {});
    nodes_[v.id].slot = slot;
    return v;
  }

  Var record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
  }

  Var record(Tensor<T> value, std::span<const Var> inputs, BackwardFn backward) {
    bool needs = false;
    for (Var in : inputs) needs = needs || nodes_.at(in.id).requires_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{});
  }

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  // Gradient of the last backward() target w.r.t. v (zeros if untouched).
  const Tensor<T>& grad(Var v) {
    Node& n = nodes_.at(v.id);
    ensure_grad(n);
    return n.grad;
  }

  // Accumulates into v's gradient buffer; no-op for constants.
  Tensor<T>* grad_buffer(Var v) {
    Node& n = nodes_.at(v.id);
    if (!n.requires_grad) return nullptr;
    ensure_grad(n);
    return &n.grad;
  }

  void backward(Var target) {
    Node& t = nodes_.at(target.id);
    if (t.value.size() != 1) throw ShapeError("backward target must be a scalar, got " + shape_string(t.value.shape()));
    for (auto& n : nodes_) n.grad = Tensor<T>();
    if (!t.requires_grad) return;
    ensure_grad(t);
    t.grad[0] = T{1};
    for (std::size_t i = target.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.empty()) continue;
      n.backward(*this, n.grad);
    }
  }

  void accumulate_param_grads(ParamGrads<T>& out) const {
    for (const auto& n : nodes_) {
      if (n.slot == kNoSlot || n.grad.empty()) continue;
      auto& dst = out.at(n.slot);
      if (dst.size() != n.grad.size()) throw ShapeError("parameter gradient slot size mismatch");
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  static constexpr std::size_t kNoSlot = std::numeric_limits<std::size_t>::max();

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
    std::size_t slot = kNoSlot;
  };

  Var push(Tensor<T> value, bool requires_grad, BackwardFn backward) {
    nodes_.push_back({std::move(value), Tensor<T>(), requires_grad, std::move(backward), kNoSlot});
    return Var{nodes_.size() - 1};
  }

  static void ensure_grad(Node& n) {
    if (n.grad.size() != n.value.size()) n.grad = Tensor<T>(n.value.shape());
  }

  std::vector<Node> nodes_;
};

}  // namespace blm
