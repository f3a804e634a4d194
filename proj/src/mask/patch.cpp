#include "cyclone/mask/patch.hpp"

#include <cmath>

#include "cyclone/autodiff/ops.hpp"
#include "cyclone/error.hpp"

namespace cyclone::mask {

PatchGrid::PatchGrid(std::size_t height, std::size_t width, std::size_t patch)
    : h_(height), w_(width), p_(patch) {
  require(p_ > 0 && h_ > 0 && w_ > 0, Errc::contract, "patch grid sizes must be positive");
  require(h_ % p_ == 0 && w_ % p_ == 0, Errc::contract,
          [&] { return "patch size " + std::to_string(p_) + " does not divide " + std::to_string(h_) + "x" +
              std::to_string(w_); });
}

double PatchGrid::offset_y(std::size_t patch) const {
  const double centre = (double(patch / cols()) + 0.5) * double(p_);
  return (centre - double(h_) / 2.0) / (double(h_) / 2.0);
}

double PatchGrid::offset_x(std::size_t patch) const {
  const double centre = (double(patch % cols()) + 0.5) * double(p_);
  return (centre - double(w_) / 2.0) / (double(w_) / 2.0);
}

double PatchGrid::radius(std::size_t patch) const {
  return std::hypot(offset_y(patch), offset_x(patch));
}

std::vector<std::size_t> PatchGrid::patch_index(std::size_t channels) const {
  std::vector<std::size_t> idx;
  idx.reserve(h_ * w_ * channels);
  for (std::size_t n = 0; n < count(); ++n) {
    const std::size_t r0 = (n / cols()) * p_, c0 = (n % cols()) * p_;
    for (std::size_t i = 0; i < p_; ++i) {
      for (std::size_t j = 0; j < p_; ++j) {
        for (std::size_t c = 0; c < channels; ++c) {
          idx.push_back(((r0 + i) * w_ + (c0 + j)) * channels + c);
        }
      }
    }
  }
  return idx;
}

std::vector<std::size_t> PatchGrid::field_index(std::size_t channels) const {
  const auto fwd = patch_index(channels);
  std::vector<std::size_t> inv(fwd.size());
  for (std::size_t k = 0; k < fwd.size(); ++k) inv[fwd[k]] = k;
  return inv;
}

namespace {

void check_field(const ad::Shape& s, const PatchGrid& grid) {
  require(s.size() == 3 && s[0] == grid.height() && s[1] == grid.width(), Errc::contract,
          [&] { return "field " + ad::to_string(s) + " does not match the " + std::to_string(grid.height()) +
              "x" + std::to_string(grid.width()) + " patch grid"; });
}

void check_patches(const ad::Shape& s, const PatchGrid& grid, std::size_t channels) {
  const std::size_t per = grid.patch() * grid.patch() * channels;
  require(s.size() == 2 && s[0] == grid.count() && s[1] == per, Errc::contract,
          [&] { return "patch tensor " + ad::to_string(s) + " does not match " + std::to_string(grid.count()) +
              " patches of " + std::to_string(per) + " values"; });
}

}  // namespace

ad::Tensor patchify(const ad::Tensor& field, const PatchGrid& grid) {
  check_field(field.shape(), grid);
  const std::size_t c = field.dim(2);
  const auto idx = grid.patch_index(c);
  ad::Tensor out({grid.count(), grid.patch() * grid.patch() * c});
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = field[idx[k]];
  return out;
}

ad::Tensor unpatchify(const ad::Tensor& patches, const PatchGrid& grid, std::size_t channels) {
  check_patches(patches.shape(), grid, channels);
  const auto idx = grid.patch_index(channels);
  ad::Tensor out({grid.height(), grid.width(), channels});
  for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = patches[k];
  return out;
}

ad::Var patchify(ad::Var field, const PatchGrid& grid) {
  check_field(field.shape(), grid);
  const std::size_t c = field.shape()[2];
  return ad::gather(field, grid.patch_index(c), {grid.count(), grid.patch() * grid.patch() * c});
}

ad::Var unpatchify(ad::Var patches, const PatchGrid& grid, std::size_t channels) {
  check_patches(patches.shape(), grid, channels);
  return ad::gather(patches, grid.field_index(channels), {grid.height(), grid.width(), channels});
}

}  // namespace cyclone::mask
