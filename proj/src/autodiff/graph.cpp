#include "cyclone/autodiff/graph.hpp"

#include "cyclone/error.hpp"

namespace cyclone::ad {

const Tensor& Var::value() const { return graph->value(*this); }

Var Graph::push(Node node) {
  require(nodes_.size() < std::numeric_limits<std::uint32_t>::max() - 1,
          Errc::contract, "graph node limit reached");
#ifndef NDEBUG
  const Tensor& v = node.external ? *node.external : node.owned;
  require(v.all_finite(), Errc::non_finite, "non-finite value produced by op");
#endif
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Tensor value) {
  return push({OpKind::constant, false, std::move(value), nullptr, {}});
}

Var Graph::input(Tensor value) {
  return push({OpKind::input, true, std::move(value), nullptr, {}});
}

Var Graph::param(const Parameter& p) {
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) {
    return Var{this, it->second};
  }
  const bool tracked = track_params_ && p.trainable;
  Var v = push({OpKind::parameter, tracked, Tensor{}, &p.value, {}});
  param_ids_.emplace(&p, v.id);
  return v;
}

Var Graph::record(OpKind kind, std::initializer_list<Var> inputs, Tensor value,
                  Backward backward) {
  return record(kind, std::vector<Var>(inputs), std::move(value), std::move(backward));
}

Var Graph::record(OpKind kind, const std::vector<Var>& inputs, Tensor value,
                  Backward backward) {
  bool needs_grad = false;
  for (const Var& in : inputs) {
    require(in.graph == this, Errc::contract, "operand belongs to another graph");
    needs_grad = needs_grad || nodes_[in.id].requires_grad;
  }
  if (!needs_grad) backward = nullptr;
  return push({kind, needs_grad, std::move(value), nullptr, std::move(backward)});
}

const Tensor& Graph::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.external ? *n.external : n.owned;
}

Tensor* Graph::grad_buffer(Var v) {
  if (!nodes_[v.id].requires_grad) return nullptr;
  Tensor& g = grads_[v.id];
  if (g.empty()) g = Tensor(value(v).shape());
  return &g;
}

void Graph::backward(Var loss) {
  require(loss.graph == this, Errc::contract, "loss belongs to another graph");
  require(value(loss).size() == 1, Errc::contract,
          [&] { return "backward needs a scalar loss, got shape " + to_string(value(loss).shape()); });
  grads_.assign(nodes_.size(), Tensor{});
  backward_visits_ = 0;
  if (!nodes_[loss.id].requires_grad) return;
  grads_[loss.id] = Tensor(value(loss).shape(), 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || grads_[i].empty()) continue;
    ++backward_visits_;
    // grads_ is sized up front and closures only touch inputs (ids < i), so
    // the reference stays valid.
    n.backward(*this, grads_[i]);
  }
}

const Tensor* Graph::grad(Var v) const {
  if (v.id >= grads_.size() || grads_[v.id].empty()) return nullptr;
  return &grads_[v.id];
}

const Tensor* Graph::grad(const Parameter& p) const {
  auto it = param_ids_.find(&p);
  if (it == param_ids_.end()) return nullptr;
  return grad(Var{const_cast<Graph*>(this), it->second});
}

Gradients::Gradients(const ParamStore& store) {
  grads_.reserve(store.size());
  for (const auto& p : store) grads_.emplace_back(p.value.shape());
}

void Gradients::accumulate(const Graph& graph, const ParamStore& store, double scale) {
  require(store.size() == grads_.size(), Errc::contract,
          "gradient buffer does not match parameter store");
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (!store[i].trainable) continue;
    const Tensor* g = graph.grad(store[i]);
    if (g == nullptr) continue;
    auto dst = grads_[i].values();
    auto src = g->values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
  }
}

void Gradients::zero() {
  for (auto& g : grads_) {
    for (auto& v : g.values()) v = 0.0;
  }
}

bool Gradients::all_finite() const {
  for (const auto& g : grads_) {
    if (!g.all_finite()) return false;
  }
  return true;
}

}  // namespace cyclone::ad
