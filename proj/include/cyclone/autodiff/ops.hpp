#pragma once

#include <span>
#include <vector>

#include "cyclone/autodiff/graph.hpp"

namespace cyclone::ad {

// Differentiable operations. Binary elementwise ops require identical shapes;
// the only broadcast is add_bias over the trailing axis.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var add_scalar(Var x, double offset);
Var add_bias(Var x, Var bias);

// Normalizes over the trailing axis: gamma * (x - mean) / sqrt(var + eps) + beta.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

Var gelu(Var x);  // exact (erf) form
Var sigmoid(Var x);
Var tanh(Var x);

Var reshape(Var x, Shape shape);
Var transpose(Var x);  // rank 2 only
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length);

// Mean over `axis`; the axis is kept with extent 1.
Var mean_axis(Var x, std::size_t axis);

// Row gather from a [n x d] table; repeated indices accumulate gradient.
Var gather_rows(Var table, std::span<const std::size_t> rows);
// out.flat[k] = x.flat[index[k]]
Var gather(Var x, std::vector<std::size_t> index, Shape shape);

Var softmax(Var x, std::size_t axis);
Var softmax(Var x);  // trailing axis

// -sum q * log(max(p, 1e-12)).
Var cross_entropy(Var probs, const Tensor& target);
// Same loss taken directly on logits, rows along the trailing axis, summed
// over rows. Gradient per row is p * sum(q) - q.
Var softmax_cross_entropy(Var logits, const Tensor& target);

Var sum(Var x);
Var mean(Var x);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(Var a, double k) { return scale(a, k); }
inline Var operator*(double k, Var a) { return scale(a, k); }

inline constexpr double kProbFloor = 1e-12;

}  // namespace cyclone::ad
