#include "cyclone/autodiff/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "cyclone/error.hpp"

namespace cyclone::ad {

std::size_t numel(const Shape& shape) noexcept {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(numel(shape_), fill) {
  for (auto extent : shape_) {
    require(extent > 0, Errc::dimension,
            [&] { return "tensor extents must be positive, got " + to_string(shape_); });
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto extent : shape_) {
    require(extent > 0, Errc::dimension,
            [&] { return "tensor extents must be positive, got " + to_string(shape_); });
  }
  require(numel(shape_) == data_.size(), Errc::dimension,
          [&] { return "shape " + to_string(shape_) + " does not match " +
              std::to_string(data_.size()) + " values"; });
}

double Tensor::item() const {
  require(data_.size() == 1, Errc::dimension,
          [&] { return "item() needs a single-element tensor, got " + to_string(shape_); });
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  require(numel(shape) == data_.size(), Errc::dimension,
          [&] { return "cannot reshape " + to_string(shape_) + " to " + to_string(shape); });
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace cyclone::ad
