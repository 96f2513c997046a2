#pragma once

#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include "t2/core/tensor.hpp"
#include "t2/nn/params.hpp"

namespace t2 {

// Handle into a Graph. Plain index; Vars from different graphs must not mix.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Define-by-run reverse-mode tape. One Graph is built per forward pass; ops
// append nodes and capture whatever they need for their backward closure.
// backward() walks the tape in reverse and finally flushes leaf gradients
// into the bound Param objects.
//
// In inference mode no closures are recorded and no gradient buffers are
// allocated; the tape is then just a value arena.
template <class T>
class Graph {
 public:
  explicit Graph(bool training = true) : training_(training) {}

  bool training() const { return training_; }

  Var constant(Tensor<T> v) { return push(std::move(v), false, {}, nullptr); }

  Var param(Param<T>& p) {
    Var v = push(p.value, training_, {}, nullptr);
    if (training_) bindings_.emplace_back(v.id, &p);
    return v;
  }

  const Tensor<T>& val(Var v) const { return nodes_[v.id].value; }
  Tensor<T>& val(Var v) { return nodes_[v.id].value; }

  Tensor<T>& grad(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.size() == 0) n.grad = n.value.zeros_like();
    return n.grad;
  }

  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  // Appends a node. `backward` receives this graph and the new node's Var;
  // it must accumulate (+=) into the parents' grads.
  Var push(Tensor<T> value, bool needs_grad, std::vector<Var> parents,
           std::function<void(Graph&, Var)> backward) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = training_ && needs_grad;
    if (n.needs_grad) {
      n.parents = std::move(parents);
      n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  bool any_needs_grad(std::initializer_list<Var> vs) const {
    for (Var v : vs)
      if (nodes_[v.id].needs_grad) return true;
    return false;
  }

  // Seeds d(loss)/d(loss) = 1 and runs the tape in reverse creation order
  // (a valid topological order by construction). Gradients of the bound
  // parameters are accumulated into Param::grad.
  void backward(Var loss) {
    require(training_, "backward() on an inference graph");
    require(val(loss).size() == 1, "backward() needs a scalar loss");
    grad(loss).m(0, 0) = static_cast<T>(1);
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.needs_grad || !n.backward) continue;
      if (n.grad.size() == 0) continue;  // never reached the loss
      n.backward(*this, Var{id});
    }
    for (auto& [id, p] : bindings_) {
      if (nodes_[id].grad.size() != 0) p->grad.m += nodes_[id].grad.m;
    }
  }

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
    std::vector<Var> parents;
    std::function<void(Graph&, Var)> backward;
  };

  bool training_;
  // deque: push() must not invalidate value references held by op code
  std::deque<Node> nodes_;
  std::vector<std::pair<int, Param<T>*>> bindings_;
};

}  // namespace t2
