#include "cyclone/autodiff/optim.hpp"

#include <cmath>

#include "cyclone/error.hpp"

namespace cyclone::ad {

Adam::Adam(const ParamStore& store, AdamConfig config) : config_(config) {
  for (const auto& p : store) {
    first_moment_.emplace_back(p.value.shape());
    second_moment_.emplace_back(p.value.shape());
  }
}

void Adam::step(ParamStore& store, const Gradients& grads) {
  require(store.size() == first_moment_.size() && grads.size() == store.size(),
          Errc::contract, "optimizer state does not match parameter store");
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, double(steps_));
  const double correction2 = 1.0 - std::pow(b2, double(steps_));
  for (std::size_t i = 0; i < store.size(); ++i) {
    Parameter& p = store[i];
    if (!p.trainable) continue;
    auto w = p.value.values();
    auto g = grads[i].values();
    auto m = first_moment_[i].values();
    auto v = second_moment_[i].values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      w[k] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

double PlateauSchedule::update(double loss, double learning_rate) {
  if (!has_best_ || loss < best_) {
    best_ = loss;
    has_best_ = true;
    stagnant_ = 0;
    return learning_rate;
  }
  if (++stagnant_ > patience_) {
    stagnant_ = 0;
    return learning_rate * factor_;
  }
  return learning_rate;
}

}  // namespace cyclone::ad
