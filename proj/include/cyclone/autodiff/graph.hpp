#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <unordered_map>
#include <vector>

#include "cyclone/autodiff/params.hpp"
#include "cyclone/autodiff/tensor.hpp"

namespace cyclone::ad {

class Graph;

// Handle to a node of a Graph. Only valid while that graph is alive.
struct Var {
  Graph* graph = nullptr;
  std::uint32_t id = std::numeric_limits<std::uint32_t>::max();

  bool valid() const noexcept { return graph != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

enum class OpKind : std::uint8_t {
  constant,
  input,
  parameter,
  matmul,
  add,
  sub,
  mul,
  scale,
  add_scalar,
  add_bias,
  layer_norm,
  gelu,
  sigmoid,
  tanh,
  reshape,
  transpose,
  concat,
  slice,
  mean_axis,
  gather_rows,
  gather,
  softmax,
  cross_entropy,
  softmax_cross_entropy,
  sum,
  mean,
};

// Append-only tape. Nodes are recorded in topological order, so backward is
// one reverse sweep. Not thread-safe; use one graph per thread.
class Graph {
 public:
  using Backward = std::function<void(Graph&, const Tensor& grad_out)>;

  // track_params = false records parameters as constants (attribution runs).
  explicit Graph(bool track_params = true) : track_params_(track_params) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var input(Tensor value);
  // Parameters are referenced, not copied; the store must outlive the graph.
  Var param(const Parameter& p);

  Var record(OpKind kind, std::initializer_list<Var> inputs, Tensor value,
             Backward backward);
  Var record(OpKind kind, const std::vector<Var>& inputs, Tensor value,
             Backward backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  OpKind kind(Var v) const { return nodes_[v.id].kind; }
  std::size_t size() const noexcept { return nodes_.size(); }

  void backward(Var loss);

  // Gradient of the last backward pass; nullptr when no gradient reached v.
  const Tensor* grad(Var v) const;
  const Tensor* grad(const Parameter& p) const;
  std::size_t backward_visits() const noexcept { return backward_visits_; }

  // Zero-initialized gradient accumulator for v, used by backward closures.
  // Returns nullptr when v does not require a gradient.
  Tensor* grad_buffer(Var v);

 private:
  struct Node {
    OpKind kind;
    bool requires_grad;
    Tensor owned;
    const Tensor* external = nullptr;
    Backward backward;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::unordered_map<const Parameter*, std::uint32_t> param_ids_;
  bool track_params_;
  std::size_t backward_visits_ = 0;
};

// Per-parameter gradient buffer aligned with a ParamStore's indices.
class Gradients {
 public:
  explicit Gradients(const ParamStore& store);

  // Adds scale * dL/dp for every trainable parameter present in the graph.
  void accumulate(const Graph& graph, const ParamStore& store, double scale = 1.0);
  void zero();
  bool all_finite() const;

  std::size_t size() const noexcept { return grads_.size(); }
  const Tensor& operator[](std::size_t i) const { return grads_[i]; }
  Tensor& operator[](std::size_t i) { return grads_[i]; }

 private:
  std::vector<Tensor> grads_;
};

}  // namespace cyclone::ad
