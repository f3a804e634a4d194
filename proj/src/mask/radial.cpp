#include "cyclone/mask/radial.hpp"

#include "cyclone/error.hpp"
#include "cyclone/rng.hpp"

namespace cyclone::mask {

void RadialMaskPolicy::validate() const {
  require(r_eye > 0.0 && r_eye < r_outer, Errc::contract, "mask radii need 0 < r_eye < r_outer");
  for (double g : {gamma_core, gamma_wall, gamma_env}) {
    require(g >= 0.0 && g <= 1.0, Errc::contract, "mask probabilities must lie in [0, 1]");
  }
  require(gamma_core <= gamma_wall && gamma_wall <= gamma_env, Errc::contract,
          "mask probabilities must not decrease outward (core <= wall <= env)");
}

Band band_of(double d, const RadialMaskPolicy& policy) {
  require(d >= 0.0, Errc::contract, "radial distance must be non-negative");
  if (d < policy.r_eye) return Band::core;
  if (d < policy.r_outer) return Band::wall;
  return Band::env;
}

double mask_probability(double d, const RadialMaskPolicy& policy) {
  switch (band_of(d, policy)) {
    case Band::core: return policy.gamma_core;
    case Band::wall: return policy.gamma_wall;
    case Band::env: return policy.gamma_env;
  }
  return policy.gamma_env;
}

MaskPartition MaskPartition::all_visible(std::size_t n) {
  MaskPartition p;
  for (std::size_t i = 0; i < n; ++i) p.visible.push_back(i);
  return p;
}

MaskPartition sample_partition(const PatchGrid& grid, const RadialMaskPolicy& policy,
                               std::uint64_t seed) {
  policy.validate();
  const std::size_t n = grid.count();
  std::vector<double> prob(n);
  for (std::size_t i = 0; i < n; ++i) prob[i] = mask_probability(grid.radius(i), policy);

  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    const std::uint64_t s = seed + std::uint64_t(attempt);
    Rng rng(derive_seed(s, 0x6d61736bULL));
    MaskPartition part;
    part.seed = s;
    for (std::size_t i = 0; i < n; ++i) {
      (rng.uniform() < prob[i] ? part.masked : part.visible).push_back(i);
    }
    if (!part.masked.empty() && !part.visible.empty()) return part;
  }
  fail(Errc::degenerate, "mask policy produced an all-masked or all-visible partition in " +
                             std::to_string(kMaxRedraws) + " draws");
}

}  // namespace cyclone::mask
