#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "cyclone/data/sample.hpp"
#include "cyclone/data/synth.hpp"

namespace cyclone::data {

// Layout under `root`:
//   dataset.json                 index of cyclone ids plus free-form metadata
//   <id>/track.csv               time,lat,lon,msw,mslp (ISO-8601 times)
//   <id>/sat_<time>.f32          float32 little-endian, row-major, channel-last
//   <id>/era5_<time>.f32
//   <id>/manifest.json           shapes, channel names, basin, extents, times
void write_cyclone(const std::filesystem::path& dir, const CycloneRecord& record,
                   const FieldGeometry& geometry);
CycloneRecord read_cyclone(const std::filesystem::path& dir);

void write_dataset(const std::filesystem::path& root, const std::vector<CycloneRecord>& records,
                   const FieldGeometry& geometry, const nlohmann::json& meta = nlohmann::json::object());

// Missing index -> missing-artifact error.
std::vector<CycloneRecord> read_dataset(const std::filesystem::path& root,
                                        nlohmann::json* meta = nullptr);

std::string track_csv(const TrackSeries& track);
TrackSeries parse_track_csv(const std::string& text, std::string id, Basin basin);

}  // namespace cyclone::data
