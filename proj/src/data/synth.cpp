#include "cyclone/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "cyclone/error.hpp"
#include "cyclone/rng.hpp"

namespace cyclone::data {

namespace {

constexpr double kEnvPressure = 1010.0;
constexpr double kMetersPerDegree = 111.0e3;
constexpr double kStepSeconds = 6.0 * 3600.0;

struct StormState {
  double lat, lon, msw, mslp;
};

// Vortex-signal amplitude per environmental channel, used to scale noise.
constexpr std::array<double, kEra5ChannelCount> kEra5NoiseScale{
    300.0, 60.0, 1.0, 6.0, 0.003, 0.0001, 20.0, 10.0, 20.0, 10.0, 20.0, 20.0, 1.0, 60.0};

void fill_fields(TCSample& sample, const StormState& s, const VortexConfig& cfg, Rng& rng) {
  const FieldGeometry& geo = cfg.geometry;
  const double r0 = cfg.core_radius_deg;
  const double rm = r0 * std::numbers::sqrt2 / 2.0;
  const double hemisphere = s.lat >= 0.0 ? 1.0 : -1.0;
  const double deficit = kEnvPressure - s.mslp;
  const double cos_lat = std::cos(s.lat * std::numbers::pi / 180.0);
  const double steer_u = cfg.drift_lon * kMetersPerDegree * cos_lat / kStepSeconds;
  const double steer_v = cfg.drift_lat * kMetersPerDegree / kStepSeconds;

  auto tangential = [&](double r) {
    const double x = r / rm;
    return 0.8 * s.msw * x * std::exp(0.5 * (1.0 - x * x));
  };

  {
    const std::size_t hw = geo.sat_hw;
    const double res = geo.sat_extent_deg / double(hw);
    sample.sat = ad::Tensor({hw, hw, kSatChannelCount});
    for (std::size_t i = 0; i < hw; ++i) {
      for (std::size_t j = 0; j < hw; ++j) {
        const double dy = (double(hw / 2) - double(i)) * res;
        const double dx = (double(j) - double(hw / 2)) * res;
        const double f = std::exp(-(dx * dx + dy * dy) / (r0 * r0));
        double* px = &sample.sat.values()[(i * hw + j) * kSatChannelCount];
        px[0] = cfg.base_temp - cfg.amplitude * f;
        px[1] = 250.0 - 0.4 * cfg.amplitude * f * (s.msw / 50.0);
        if (cfg.noise > 0.0) {
          px[0] += rng.normal(0.0, cfg.noise * cfg.amplitude);
          px[1] += rng.normal(0.0, cfg.noise * 0.4 * cfg.amplitude);
        }
      }
    }
  }

  const std::size_t hw = geo.era5_hw;
  const double res = geo.era5_extent_deg / double(hw);
  sample.era5 = ad::Tensor({hw, hw, kEra5ChannelCount});
  for (std::size_t i = 0; i < hw; ++i) {
    for (std::size_t j = 0; j < hw; ++j) {
      const double dy = (double(hw / 2) - double(i)) * res;
      const double dx = (double(j) - double(hw / 2)) * res;
      const double r = std::sqrt(dx * dx + dy * dy);
      const double f = std::exp(-(r * r) / (r0 * r0));
      const double abs_lat = std::abs(s.lat + dy);
      const double vt = tangential(r);
      // Unit vector perpendicular to the radius, counter-clockwise in the north.
      const double ex = r > 0.0 ? -dy / r : 0.0;
      const double ey = r > 0.0 ? dx / r : 0.0;
      const double cyc_u = hemisphere * vt * ex;
      const double cyc_v = hemisphere * vt * ey;

      double* px = &sample.era5.values()[(i * hw + j) * kEra5ChannelCount];
      px[0] = 1500.0 - 9.0 * deficit * f;                         // z850
      px[1] = 12300.0 + 3.0 * deficit * f;                        // z200
      px[2] = 290.0 - 0.3 * (abs_lat - 15.0) + 0.05 * deficit * f;  // t850
      px[3] = 218.0 + 0.12 * deficit * f;                         // t200
      px[4] = 0.014 + 0.004 * f * (s.msw / 50.0);                 // q850
      px[5] = 0.0003 + 0.0002 * f;                                // q200
      px[6] = 0.7 * steer_u + cyc_u;                              // u850
      px[7] = 1.3 * steer_u - 0.3 * cyc_u;                        // u200
      px[8] = 0.7 * steer_v + cyc_v;                              // v850
      px[9] = 1.3 * steer_v - 0.3 * cyc_v;                        // v200
      px[10] = 0.9 * cyc_u;                                       // u10
      px[11] = 0.9 * cyc_v;                                       // v10
      px[12] = 300.0 - 0.2 * (abs_lat - 15.0) - 0.5 * f;          // t2m
      px[13] = kEnvPressure - deficit * f;                        // msl
      if (cfg.noise > 0.0) {
        for (std::size_t c = 0; c < kEra5ChannelCount; ++c) {
          px[c] += rng.normal(0.0, cfg.noise * kEra5NoiseScale[c]);
        }
      }
    }
  }
}

}  // namespace

double synthetic_mslp(double msw) noexcept {
  return 1012.0 - 0.9 * msw - 0.011 * msw * msw;
}

CycloneRecord synth_cyclone(const VortexConfig& cfg, std::uint64_t seed) {
  const std::size_t lead_steps = std::size_t(std::max(cfg.max_lead_hours, 0) / 6);
  const std::size_t needed = std::max<std::size_t>(10, cfg.window_steps + lead_steps);
  require(cfg.steps >= needed, Errc::insufficient_length,
          [&] { return "cyclone " + cfg.id + " has " + std::to_string(cfg.steps) + " steps, needs at least " +
              std::to_string(needed) + " for the input window and maximum lead"; });
  require(cfg.core_radius_deg > 0.0 && cfg.amplitude >= 0.0, Errc::contract,
          "vortex radius must be positive and amplitude non-negative");
  require(on_synoptic_hour(cfg.start), Errc::alignment, "start time must be 6-hourly");

  Rng rng(seed);
  CycloneRecord record;
  record.track.id = cfg.id;
  record.track.basin = cfg.basin;
  const double peak_msw = cfg.msw_start + cfg.msw_rate * double(cfg.peak_step);
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    double msw = k <= cfg.peak_step ? cfg.msw_start + cfg.msw_rate * double(k)
                                    : peak_msw - cfg.decay_rate * double(k - cfg.peak_step);
    msw = std::clamp(msw, 10.0, 85.0);
    if (cfg.obs_noise > 0.0) msw = std::max(5.0, msw + rng.normal(0.0, cfg.obs_noise));
    StormState s{std::clamp(cfg.start_lat + cfg.drift_lat * double(k), -89.0, 89.0),
                 wrap_longitude(cfg.start_lon + cfg.drift_lon * double(k)), msw,
                 synthetic_mslp(msw)};
    const TimePoint t = cfg.start + kStep * std::int64_t(k);
    record.track.points.push_back({t, s.lat, s.lon, s.msw, s.mslp});

    TCSample sample;
    sample.att = {s.msw, s.mslp, s.lat, s.lon};
    sample.time = t;
    sample.basin = cfg.basin;
    fill_fields(sample, s, cfg, rng);
    record.samples.push_back(std::move(sample));
  }
  return record;
}

std::vector<CycloneRecord> synth_dataset(const SynthDatasetConfig& config, std::uint64_t seed) {
  require(!config.basins.empty(), Errc::contract, "no basins configured");
  require(config.min_steps <= config.max_steps, Errc::contract, "min_steps exceeds max_steps");
  std::vector<CycloneRecord> out;
  Rng rng(seed);
  for (std::size_t n = 0; n < config.cyclones; ++n) {
    VortexConfig v;
    char id[16];
    std::snprintf(id, sizeof id, "SYN%04zu", n);
    v.id = id;
    v.basin = config.basins[rng.below(config.basins.size())];
    v.steps = config.min_steps + std::size_t(rng.below(config.max_steps - config.min_steps + 1));
    v.max_lead_hours = config.max_lead_hours;
    v.geometry = config.geometry;
    v.noise = config.noise;
    v.obs_noise = config.obs_noise;

    const bool south = southern_hemisphere(v.basin);
    const double pole = south ? -1.0 : 1.0;
    v.start_lat = pole * rng.uniform(8.0, 20.0);
    switch (v.basin) {
      case Basin::WP: v.start_lon = rng.uniform(125.0, 160.0); break;
      case Basin::NA: v.start_lon = rng.uniform(-75.0, -35.0); break;
      case Basin::EP: v.start_lon = rng.uniform(-125.0, -95.0); break;
      case Basin::SI: v.start_lon = rng.uniform(55.0, 110.0); break;
      case Basin::SP: v.start_lon = rng.uniform(155.0, 185.0); break;
    }
    v.start_lon = wrap_longitude(v.start_lon);
    v.drift_lat = pole * rng.uniform(0.1, 0.6);
    v.drift_lon = -rng.uniform(0.2, 0.9);

    v.amplitude = rng.uniform(40.0, 70.0);
    v.core_radius_deg = rng.uniform(1.5, 3.0);
    v.msw_start = rng.uniform(15.0, 25.0);
    v.msw_rate = rng.uniform(1.0, 3.0);
    v.peak_step = 6 + std::size_t(rng.below(std::max<std::size_t>(1, v.steps - 10)));
    v.decay_rate = rng.uniform(1.0, 2.5);

    const int year = 2020 + int(rng.below(5));
    const unsigned month = 6 + unsigned(rng.below(5));
    const unsigned day = 1 + unsigned(rng.below(28));
    v.start = make_time(year, month, day, 6 * int(rng.below(4)));

    out.push_back(synth_cyclone(v, derive_seed(seed, 1000 + n)));
  }
  return out;
}

}  // namespace cyclone::data
