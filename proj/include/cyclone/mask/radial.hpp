#pragma once

#include <cstdint>
#include <vector>

#include "cyclone/mask/patch.hpp"

namespace cyclone::mask {

// Masking probability by normalised patch radius: gamma_core inside r_eye,
// gamma_wall up to r_outer, gamma_env beyond.
struct RadialMaskPolicy {
  double r_eye = 0.20;
  double r_outer = 0.55;
  double gamma_core = 0.20;
  double gamma_wall = 0.50;
  double gamma_env = 0.75;

  // Contract error unless 0 < r_eye < r_outer, each gamma in [0, 1] and the
  // gammas are non-decreasing outward.
  void validate() const;
};

enum class Band { core, wall, env };

Band band_of(double d, const RadialMaskPolicy& policy);
double mask_probability(double d, const RadialMaskPolicy& policy);

struct MaskPartition {
  std::vector<std::size_t> masked;   // sorted
  std::vector<std::size_t> visible;  // sorted
  std::uint64_t seed = 0;            // seed of the accepted draw

  std::size_t size() const noexcept { return masked.size() + visible.size(); }

  // Every patch visible; only for the overfit debug mode.
  static MaskPartition all_visible(std::size_t n);
};

inline constexpr int kMaxRedraws = 64;

// Independent Bernoulli draw per patch. A draw that masks nothing or
// everything is repeated with seed + 1, up to kMaxRedraws times; then a
// degenerate error is raised.
MaskPartition sample_partition(const PatchGrid& grid, const RadialMaskPolicy& policy,
                               std::uint64_t seed);

}  // namespace cyclone::mask
