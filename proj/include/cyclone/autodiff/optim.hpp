#pragma once

#include <cstddef>
#include <vector>

#include "cyclone/autodiff/graph.hpp"
#include "cyclone/autodiff/params.hpp"

namespace cyclone::ad {

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Frozen parameters are skipped entirely.
class Adam {
 public:
  Adam(const ParamStore& store, AdamConfig config);

  void step(ParamStore& store, const Gradients& grads);

  double learning_rate() const noexcept { return config_.learning_rate; }
  void set_learning_rate(double lr) noexcept { config_.learning_rate = lr; }
  std::size_t steps() const noexcept { return steps_; }

 private:
  AdamConfig config_;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
  std::size_t steps_ = 0;
};

// Multiplies the learning rate by `factor` once the monitored loss has failed
// to improve for more than `patience` consecutive epochs.
class PlateauSchedule {
 public:
  PlateauSchedule(double factor = 0.2, std::size_t patience = 10)
      : factor_(factor), patience_(patience) {}

  // Returns the learning rate to use for the next epoch.
  double update(double loss, double learning_rate);

  std::size_t stagnant_epochs() const noexcept { return stagnant_; }
  double best() const noexcept { return best_; }

 private:
  double factor_;
  std::size_t patience_;
  double best_ = 0.0;
  bool has_best_ = false;
  std::size_t stagnant_ = 0;
};

}  // namespace cyclone::ad
