#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cyclone/data/sample.hpp"

namespace cyclone::data {

// Lattice sizes and geographic extents of the two storm-centred fields.
struct FieldGeometry {
  std::size_t sat_hw = 64;
  std::size_t era5_hw = 64;
  double sat_extent_deg = 28.0;
  double era5_extent_deg = 20.0;
};

// Parametric vortex: an IR depression base_temp - A exp(-(r/r0)^2), a matching
// pressure deficit, cyclonic winds and a warm core, drifting linearly.
struct VortexConfig {
  std::string id = "SYN0000";
  Basin basin = Basin::WP;
  TimePoint start = make_time(2020, 7, 1, 0);
  std::size_t steps = 25;
  std::size_t window_steps = 5;
  int max_lead_hours = 120;

  double start_lat = 15.0;
  double start_lon = 140.0;
  double drift_lat = 0.3;   // degrees per 6-h step
  double drift_lon = -0.6;  // degrees per 6-h step

  double base_temp = 290.0;      // kelvin
  double amplitude = 60.0;       // IR depression at the centre, kelvin
  double core_radius_deg = 2.5;  // r0

  double msw_start = 20.0;  // m/s
  double msw_rate = 2.0;    // m/s per step while intensifying
  std::size_t peak_step = 12;
  double decay_rate = 1.5;  // m/s per step after the peak

  double noise = 0.0;      // field noise, as a fraction of each channel's vortex signal
  double obs_noise = 0.0;  // best-track MSW noise, m/s

  FieldGeometry geometry;
};

CycloneRecord synth_cyclone(const VortexConfig& config, std::uint64_t seed);

// Pressure implied by the synthetic wind-pressure relation.
double synthetic_mslp(double msw) noexcept;

struct SynthDatasetConfig {
  std::size_t cyclones = 20;
  std::size_t min_steps = 25;
  std::size_t max_steps = 30;
  int max_lead_hours = 120;
  double noise = 0.05;
  double obs_noise = 0.3;
  std::vector<Basin> basins{Basin::WP, Basin::NA, Basin::EP, Basin::SI, Basin::SP};
  FieldGeometry geometry;
};

// Cyclone ids are "SYN0000", "SYN0001", ... in generation order.
std::vector<CycloneRecord> synth_dataset(const SynthDatasetConfig& config, std::uint64_t seed);

}  // namespace cyclone::data
