#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "atat/tensor.hpp"

namespace atat {

enum class Mode { Train, Infer };

// A named leaf that outlives any single graph: model weights, biases and
// batch-norm running statistics (trainable=false) all live here so they
// share one checkpoint path.
template <class S>
struct Parameter {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;
  bool trainable = true;
};

// Registry with stable addresses; registration order fixes checkpoint and
// optimizer-slot order, which keeps runs bit-reproducible.
template <class S>
class ParameterStore {
 public:
  Parameter<S>& add(const std::string& name, Tensor<S> init, bool trainable = true) {
    require(!index_.count(name), Errc::InvalidInput, "duplicate parameter name " + name);
    auto p = std::make_unique<Parameter<S>>();
    p->name = name;
    p->grad = Tensor<S>::zeros(init.shape());
    p->value = std::move(init);
    p->trainable = trainable;
    index_[name] = items_.size();
    items_.push_back(std::move(p));
    return *items_.back();
  }

  Parameter<S>& get(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), Errc::InvalidInput, "unknown parameter " + name);
    return *items_[it->second];
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  size_t size() const { return items_.size(); }
  Parameter<S>& at(size_t i) { return *items_[i]; }
  const Parameter<S>& at(size_t i) const { return *items_[i]; }

  Index count_trainable() const {
    Index n = 0;
    for (const auto& p : items_)
      if (p->trainable) n += p->value.size();
    return n;
  }

  Index count_all() const {
    Index n = 0;
    for (const auto& p : items_) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : items_) p->grad.array().setZero();
  }

 private:
  std::vector<std::unique_ptr<Parameter<S>>> items_;
  std::unordered_map<std::string, size_t> index_;
};

template <class S>
class Graph;

template <class S>
struct Var {
  int id = -1;
  Graph<S>* g = nullptr;
  bool valid() const { return id >= 0 && g != nullptr; }
};

// Reverse-mode tape. Ops append nodes in topological order; backward() walks
// the tape in reverse running each node's closure, then flushes accumulated
// gradients into parameter sinks.
template <class S>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<S> constant(Tensor<S> v) {
    nodes_.push_back(NodeT{std::move(v), {}, false, false, nullptr, nullptr});
    return Var<S>{static_cast<int>(nodes_.size() - 1), this};
  }

  Var<S> leaf(Tensor<S> v, bool requires_grad) {
    nodes_.push_back(NodeT{std::move(v), {}, requires_grad, false, nullptr, nullptr});
    return Var<S>{static_cast<int>(nodes_.size() - 1), this};
  }

  // Parameter enters the graph by value; after backward() the node gradient
  // is added into p.grad.
  Var<S> use(Parameter<S>& p) {
    nodes_.push_back(NodeT{p.value, {}, true, false, nullptr, &p});
    return Var<S>{static_cast<int>(nodes_.size() - 1), this};
  }

  // Interior node; requires_grad is inherited from parents and the closure is
  // dropped when no parent needs gradients. The closure receives the node's
  // own Var so it can read its accumulated output gradient.
  Var<S> make(Tensor<S> value, const std::vector<Var<S>>& parents,
              std::function<void(Var<S>)> backward) {
    bool req = false;
    for (const Var<S>& p : parents) {
      require(p.g == this, Errc::InvalidInput, "op mixes graphs");
      req = req || nodes_[static_cast<size_t>(p.id)].requires_grad;
    }
    Var<S> self{static_cast<int>(nodes_.size()), this};
    std::function<void()> bound;
    if (req && backward)
      bound = [self, b = std::move(backward)]() { b(self); };
    nodes_.push_back(NodeT{std::move(value), {}, req, false, std::move(bound), nullptr});
    return self;
  }

  Tensor<S>& val(Var<S> v) { return nodes_[static_cast<size_t>(v.id)].value; }
  const Tensor<S>& val(Var<S> v) const { return nodes_[static_cast<size_t>(v.id)].value; }

  bool needs_grad(Var<S> v) const { return nodes_[static_cast<size_t>(v.id)].requires_grad; }

  // Gradient buffer, zero-allocated on first touch.
  Tensor<S>& grad(Var<S> v) {
    NodeT& n = nodes_[static_cast<size_t>(v.id)];
    if (!n.grad_alloc) {
      n.grad = Tensor<S>::zeros(n.value.shape());
      n.grad_alloc = true;
    }
    return n.grad;
  }

  bool grad_touched(Var<S> v) const { return nodes_[static_cast<size_t>(v.id)].grad_alloc; }

  void backward(Var<S> root) {
    require(root.valid() && root.g == this, Errc::InvalidInput, "backward on foreign var");
    require(val(root).size() == 1, Errc::ShapeError, "backward root must be scalar");
    grad(root).array().setConstant(S(1));
    for (int i = root.id; i >= 0; --i) {
      NodeT& n = nodes_[static_cast<size_t>(i)];
      if (!n.requires_grad || !n.grad_alloc || !n.backward) continue;
      n.backward();
    }
    for (auto& n : nodes_) {
      if (n.sink && n.grad_alloc) n.sink->grad.array() += n.grad.array();
    }
  }

  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct NodeT {
    Tensor<S> value;
    Tensor<S> grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    std::function<void()> backward;
    Parameter<S>* sink = nullptr;
  };
  std::vector<NodeT> nodes_;
};

}  // namespace atat
