#include "cyclone/data/sample.hpp"

#include <cmath>

#include "cyclone/error.hpp"

namespace cyclone::data {

std::string_view basin_name(Basin basin) noexcept {
  switch (basin) {
    case Basin::WP: return "WP";
    case Basin::NA: return "NA";
    case Basin::EP: return "EP";
    case Basin::SI: return "SI";
    case Basin::SP: return "SP";
  }
  return "??";
}

Basin parse_basin(std::string_view name) {
  for (Basin b : {Basin::WP, Basin::NA, Basin::EP, Basin::SI, Basin::SP}) {
    if (basin_name(b) == name) return b;
  }
  fail(Errc::contract, "unknown basin '" + std::string(name) + "'");
}

bool southern_hemisphere(Basin basin) noexcept {
  return basin == Basin::SI || basin == Basin::SP;
}

double wrap_longitude(double lon) noexcept {
  double wrapped = std::fmod(lon + 180.0, 360.0);
  if (wrapped < 0) wrapped += 360.0;
  return wrapped - 180.0;
}

void validate(const TCSample& s) {
  require(s.sat.rank() == 3 && s.sat.dim(2) == kSatChannelCount, Errc::contract,
          [&] { return "satellite field must be [H x W x 2], got " + ad::to_string(s.sat.shape()); });
  require(s.era5.rank() == 3 && s.era5.dim(2) == kEra5ChannelCount, Errc::contract,
          [&] { return "environmental field must be [H x W x 14], got " + ad::to_string(s.era5.shape()); });
  require(on_synoptic_hour(s.time), Errc::alignment,
          [&] { return "sample time " + format_iso8601(s.time) + " is not on a 6-hourly synoptic hour"; });
  require(s.att[kLat] >= -90.0 && s.att[kLat] <= 90.0, Errc::contract, "latitude out of range");
  require(s.att[kLon] >= -180.0 && s.att[kLon] < 180.0, Errc::contract, "longitude out of range");
  require(s.att[kMsw] > 0.0, Errc::contract, "MSW must be positive");
  require(s.att[kMslp] > 850.0 && s.att[kMslp] < 1050.0, Errc::contract,
          "MSLP must lie in (850, 1050) hPa");
}

void validate(const TrackSeries& track) {
  for (std::size_t i = 1; i < track.points.size(); ++i) {
    require(track.points[i].time - track.points[i - 1].time == kStep, Errc::alignment,
            [&] { return "track " + track.id + " is not 6-hourly at " +
                format_iso8601(track.points[i].time); });
  }
}

void validate(const CycloneRecord& record) {
  validate(record.track);
  require(record.samples.size() == record.track.points.size(), Errc::contract,
          [&] { return "cyclone " + record.track.id + ": sample count differs from track length"; });
  for (std::size_t i = 0; i < record.samples.size(); ++i) {
    validate(record.samples[i]);
    require(record.samples[i].time == record.track.points[i].time, Errc::alignment,
            [&] { return "cyclone " + record.track.id + ": sample/track timestamps differ"; });
  }
}

}  // namespace cyclone::data
