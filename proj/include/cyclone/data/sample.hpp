#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "cyclone/autodiff/tensor.hpp"
#include "cyclone/time.hpp"

namespace cyclone::data {

enum class Basin { WP, NA, EP, SI, SP };

std::string_view basin_name(Basin basin) noexcept;
Basin parse_basin(std::string_view name);
bool southern_hemisphere(Basin basin) noexcept;

inline constexpr std::array<std::string_view, 2> kSatChannels{"ir", "wv"};

// Environmental channel order is fixed; attribution and file manifests rely on it.
inline constexpr std::array<std::string_view, 14> kEra5Channels{
    "z850", "z200", "t850", "t200", "q850", "q200", "u850",
    "u200", "v850", "v200", "u10",  "v10",  "t2m",  "msl"};

inline constexpr std::size_t kSatChannelCount = kSatChannels.size();
inline constexpr std::size_t kEra5ChannelCount = kEra5Channels.size();

// Attribute vector layout.
enum AttIndex : std::size_t { kMsw = 0, kMslp = 1, kLat = 2, kLon = 3 };
inline constexpr std::size_t kAttCount = 4;
using Attributes = std::array<double, kAttCount>;

// One 6-hourly multi-modal observation of a storm.
struct TCSample {
  ad::Tensor sat;   // [H x W x 2], kelvin
  ad::Tensor era5;  // [H x W x 14]
  Attributes att{};  // MSW m/s, MSLP hPa, latitude, longitude
  TimePoint time{};
  Basin basin = Basin::WP;

  double lat() const noexcept { return att[kLat]; }
  double lon() const noexcept { return att[kLon]; }
};

struct TrackPoint {
  TimePoint time{};
  double lat = 0.0;
  double lon = 0.0;
  double msw = 0.0;
  double mslp = 0.0;
};

struct TrackSeries {
  std::string id;
  Basin basin = Basin::WP;
  std::vector<TrackPoint> points;
};

// A storm's best track together with its per-step samples (same length and
// timestamps).
struct CycloneRecord {
  TrackSeries track;
  std::vector<TCSample> samples;
};

// Throws a contract error describing the first violated invariant.
void validate(const TCSample& sample);
void validate(const TrackSeries& track);
void validate(const CycloneRecord& record);

double wrap_longitude(double lon) noexcept;  // into [-180, 180)

}  // namespace cyclone::data
