#pragma once

#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "cyclone/autodiff/tensor.hpp"
#include "cyclone/data/sample.hpp"

namespace cyclone::data {

// A channel-last field [rows x cols x C] on a regular lat/lon grid. Row r sits at
// latitude lat0 + r*dlat and column c at longitude lon0 + c*dlon; dlat is
// negative for north-up rasters.
struct GeoField {
  ad::Tensor values;
  double lat0 = 0.0;
  double lon0 = 0.0;
  double dlat = -1.0;
  double dlon = 1.0;
};

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

// Bilinear value of one channel at fractional (row, col); coordinates outside
// [0, rows-1] x [0, cols-1] return `fill`.
double bilinear_sample(const ad::Tensor& field, std::size_t channel, double row, double col,
                       double fill);

// Resamples the extent_deg x extent_deg window centred on `center` to
// [out_h x out_w x C]. Output pixel centres are spaced extent/out apart.
// Regions outside the source grid take the channel mean.
ad::Tensor center_crop_resample(const GeoField& field, GeoPoint center, double extent_deg,
                                std::size_t out_h, std::size_t out_w);

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct NormStats {
  ChannelStats sat;
  ChannelStats era5;
  ChannelStats att;

  nlohmann::json to_json() const;
  static NormStats from_json(const nlohmann::json& j);
};

// Population mean/std per channel over every pixel of every sample.
NormStats fit_stats(std::span<const TCSample> samples);
NormStats fit_stats(std::span<const CycloneRecord> records);

// Per-channel standardisation of a channel-last tensor (last axis = channel).
void zscore_inplace(ad::Tensor& x, const ChannelStats& stats);
void unzscore_inplace(ad::Tensor& x, const ChannelStats& stats);

TCSample zscore(const TCSample& sample, const NormStats& stats);
TCSample unzscore(const TCSample& sample, const NormStats& stats);

double zscore_value(double v, const ChannelStats& stats, std::size_t channel);
double unzscore_value(double z, const ChannelStats& stats, std::size_t channel);

template <typename T>
struct Timed {
  TimePoint time;
  T value;
};

// Inserts linear midpoints into a 12-hourly series; endpoints are preserved.
std::vector<Timed<double>> upsample_12h_to_6h(std::span<const Timed<double>> series);
std::vector<Timed<ad::Tensor>> upsample_12h_to_6h(std::span<const Timed<ad::Tensor>> series);

inline constexpr std::size_t kWindowSteps = 5;
inline constexpr int kMaxLeadHours = 120;

// Input window ending at t0 together with best-track targets per lead.
struct Window {
  std::array<const TCSample*, kWindowSteps> inputs{};  // oldest first
  TimePoint t0{};
  std::map<int, TrackPoint> targets;  // keyed by lead hours
};

// Raises a gap error naming the first missing input timestamp, or the first
// requested lead whose target is absent.
Window build_window(const CycloneRecord& record, TimePoint t0, std::span<const int> leads);

// Largest multiple of 6 h such that every lead up to it is present after t0.
int max_available_lead_hours(const CycloneRecord& record, TimePoint t0);

// All t0 for which the window and every one of `leads` are available.
std::vector<TimePoint> forecast_origins(const CycloneRecord& record, std::span<const int> leads);

std::vector<int> all_leads();  // 6, 12, ..., 120

}  // namespace cyclone::data
