#pragma once

#include <cstdint>
#include <vector>

#include "cyclone/autodiff/graph.hpp"
#include "cyclone/autodiff/tensor.hpp"

namespace cyclone::mask {

// Non-overlapping p x p tiling of an H x W lattice. Patches are numbered
// row-major over the (H/p) x (W/p) patch lattice.
class PatchGrid {
 public:
  PatchGrid(std::size_t height, std::size_t width, std::size_t patch);

  std::size_t height() const noexcept { return h_; }
  std::size_t width() const noexcept { return w_; }
  std::size_t patch() const noexcept { return p_; }
  std::size_t rows() const noexcept { return h_ / p_; }
  std::size_t cols() const noexcept { return w_ / p_; }
  std::size_t count() const noexcept { return rows() * cols(); }

  // Patch-centre offset from the field centre, scaled so the half-width is 1.
  double offset_y(std::size_t patch) const;
  double offset_x(std::size_t patch) const;
  double radius(std::size_t patch) const;  // in [0, sqrt 2]

  // Same patch lattice (count and arrangement), regardless of pixel size.
  bool same_lattice(const PatchGrid& other) const noexcept {
    return rows() == other.rows() && cols() == other.cols();
  }

  // index[n * p*p*C + k] = flat field index of element k of patch n.
  std::vector<std::size_t> patch_index(std::size_t channels) const;
  std::vector<std::size_t> field_index(std::size_t channels) const;  // inverse of patch_index

 private:
  std::size_t h_, w_, p_;
};

// [H x W x C] -> [N x (p*p*C)], and back.
ad::Tensor patchify(const ad::Tensor& field, const PatchGrid& grid);
ad::Tensor unpatchify(const ad::Tensor& patches, const PatchGrid& grid, std::size_t channels);

ad::Var patchify(ad::Var field, const PatchGrid& grid);
ad::Var unpatchify(ad::Var patches, const PatchGrid& grid, std::size_t channels);

}  // namespace cyclone::mask
