#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cyclone/autodiff/tensor.hpp"
#include "cyclone/rng.hpp"

namespace cyclone::ad {

struct Parameter {
  std::string name;
  std::string group;
  Tensor value;
  bool trainable = true;
};

// Named learnable tensors, grouped so whole sub-networks can be frozen.
// Element addresses are stable for the lifetime of the store.
class ParamStore {
 public:
  Parameter& add(std::string name, std::string group, Tensor init);

  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  const Parameter* find(std::string_view name) const;

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t element_count() const noexcept;
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void set_trainable(std::string_view group, bool trainable);
  std::vector<std::string> groups() const;

  // FNV-1a over names, shapes and raw bytes of every parameter in `group`.
  std::uint64_t checksum(std::string_view group) const;

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

Tensor normal_tensor(Shape shape, double stddev, Rng& rng);

}  // namespace cyclone::ad
