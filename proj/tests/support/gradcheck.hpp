#pragma once

// Central finite-difference oracle. Only forward evaluations are used, so it
// stays independent of the backward closures it is checking.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "cyclone/autodiff/graph.hpp"
#include "cyclone/autodiff/params.hpp"

namespace cyclone::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

using InputLoss = std::function<ad::Var(ad::Graph&, std::span<const ad::Var>)>;

inline GradCheck check_input_gradients(const InputLoss& build, std::vector<ad::Tensor> inputs,
                                       double h = 1e-5) {
  auto evaluate = [&](const std::vector<ad::Tensor>& xs) {
    ad::Graph g;
    std::vector<ad::Var> vars;
    for (const auto& x : xs) vars.push_back(g.input(x));
    return build(g, vars).value().item();
  };
  ad::Graph g;
  std::vector<ad::Var> vars;
  for (const auto& x : inputs) vars.push_back(g.input(x));
  ad::Var loss = build(g, vars);
  g.backward(loss);

  GradCheck result;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const ad::Tensor* grad = g.grad(vars[t]);
    for (std::size_t i = 0; i < inputs[t].size(); ++i) {
      const double saved = inputs[t][i];
      inputs[t][i] = saved + h;
      const double up = evaluate(inputs);
      inputs[t][i] = saved - h;
      const double down = evaluate(inputs);
      inputs[t][i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grad ? (*grad)[i] : 0.0;
      result.max_rel_error = std::max(result.max_rel_error, rel_error(analytic, numeric));
      ++result.checked;
    }
  }
  return result;
}

using ParamLoss = std::function<ad::Var(ad::Graph&)>;

// Checks up to `per_param` evenly spaced elements of every trainable parameter.
inline GradCheck check_param_gradients(const ParamLoss& build, ad::ParamStore& store,
                                       std::size_t per_param = 8, double h = 1e-5) {
  ad::Graph g;
  ad::Var loss = build(g);
  g.backward(loss);
  ad::Gradients grads(store);
  grads.accumulate(g, store);

  auto evaluate = [&] {
    ad::Graph fg;
    return build(fg).value().item();
  };
  GradCheck result;
  for (std::size_t p = 0; p < store.size(); ++p) {
    if (!store[p].trainable) continue;
    auto values = store[p].value.values();
    const std::size_t stride = std::max<std::size_t>(1, values.size() / per_param);
    for (std::size_t i = 0; i < values.size(); i += stride) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = evaluate();
      values[i] = saved - h;
      const double down = evaluate();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      result.max_rel_error = std::max(result.max_rel_error, rel_error(grads[p][i], numeric));
      ++result.checked;
    }
  }
  return result;
}

inline ad::Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  ad::Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace cyclone::testing
