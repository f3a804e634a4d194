#include "cyclone/data/dataset_io.hpp"

#include <cstdio>
#include <sstream>

#include "cyclone/binary_io.hpp"
#include "cyclone/error.hpp"

namespace cyclone::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCycloneFormat = "cyclonekit-cyclone-v1";
constexpr const char* kDatasetFormat = "cyclonekit-dataset-v1";

std::vector<std::string> names_of(std::span<const std::string_view> names) {
  return {names.begin(), names.end()};
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    fail(Errc::io, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

ad::Tensor read_field(const fs::path& path, const ad::Shape& shape) {
  std::vector<double> v = read_f32_le(path);
  require(v.size() == ad::numel(shape), Errc::io,
          [&] { return path.string() + " holds " + std::to_string(v.size()) + " values, expected " +
              std::to_string(ad::numel(shape)); });
  return ad::Tensor(shape, std::move(v));
}

}  // namespace

std::string track_csv(const TrackSeries& track) {
  std::string out = "time,lat,lon,msw,mslp\n";
  char line[160];
  for (const auto& p : track.points) {
    std::snprintf(line, sizeof line, "%s,%.6f,%.6f,%.6f,%.6f\n", format_iso8601(p.time).c_str(),
                  p.lat, p.lon, p.msw, p.mslp);
    out += line;
  }
  return out;
}

TrackSeries parse_track_csv(const std::string& text, std::string id, Basin basin) {
  TrackSeries track{std::move(id), basin, {}};
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line.rfind("time,lat,lon,msw,mslp", 0) == 0,
          Errc::io, [&] { return "track.csv of " + track.id + " lacks the expected header"; });
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    std::string field[5];
    for (auto& f : field) std::getline(row, f, ',');
    try {
      track.points.push_back({parse_iso8601(field[0]), std::stod(field[1]), std::stod(field[2]),
                              std::stod(field[3]), std::stod(field[4])});
    } catch (const std::logic_error&) {
      fail(Errc::io, "track.csv of " + track.id + ": unparsable line " + std::to_string(lineno));
    }
  }
  return track;
}

void write_cyclone(const fs::path& dir, const CycloneRecord& record, const FieldGeometry& geometry) {
  validate(record);
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, Errc::io, [&] { return "cannot create " + dir.string() + ": " + ec.message(); });
  write_text(dir / "track.csv", track_csv(record.track));

  json times = json::array();
  for (const auto& s : record.samples) {
    const std::string stamp = format_compact(s.time);
    write_f32_le(dir / ("sat_" + stamp + ".f32"), s.sat.values());
    write_f32_le(dir / ("era5_" + stamp + ".f32"), s.era5.values());
    times.push_back(format_iso8601(s.time));
  }
  const auto& first = record.samples.front();
  json manifest = {
      {"format", kCycloneFormat},
      {"id", record.track.id},
      {"basin", basin_name(record.track.basin)},
      {"sat", {{"shape", first.sat.shape()}, {"channels", names_of(kSatChannels)},
               {"extent_deg", geometry.sat_extent_deg}, {"units", "K"}}},
      {"era5", {{"shape", first.era5.shape()}, {"channels", names_of(kEra5Channels)},
                {"extent_deg", geometry.era5_extent_deg}}},
      {"dtype", "float32-le"},
      {"layout", "row-major, channel-last"},
      {"times", times}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

CycloneRecord read_cyclone(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  require(fs::exists(mpath), Errc::missing_artifact, [&] { return "no manifest.json in " + dir.string(); });
  const json m = parse_json_file(mpath);
  require(m.value("format", "") == kCycloneFormat, Errc::io,
          [&] { return mpath.string() + " is not a cyclone manifest"; });
  require(m.at("era5").at("channels").get<std::vector<std::string>>() == names_of(kEra5Channels),
          Errc::io, [&] { return mpath.string() + ": environmental channel order differs from the schema"; });

  CycloneRecord rec;
  const Basin basin = parse_basin(m.at("basin").get<std::string>());
  rec.track = parse_track_csv(read_text(dir / "track.csv"), m.at("id").get<std::string>(), basin);
  const auto sat_shape = m.at("sat").at("shape").get<ad::Shape>();
  const auto era5_shape = m.at("era5").at("shape").get<ad::Shape>();
  for (const auto& p : rec.track.points) {
    const std::string stamp = format_compact(p.time);
    TCSample s;
    s.sat = read_field(dir / ("sat_" + stamp + ".f32"), sat_shape);
    s.era5 = read_field(dir / ("era5_" + stamp + ".f32"), era5_shape);
    s.att = {p.msw, p.mslp, p.lat, p.lon};
    s.time = p.time;
    s.basin = basin;
    rec.samples.push_back(std::move(s));
  }
  validate(rec);
  return rec;
}

void write_dataset(const fs::path& root, const std::vector<CycloneRecord>& records,
                   const FieldGeometry& geometry, const json& meta) {
  json ids = json::array();
  for (const auto& r : records) {
    write_cyclone(root / r.track.id, r, geometry);
    ids.push_back(r.track.id);
  }
  json index = {{"format", kDatasetFormat}, {"cyclones", ids}, {"meta", meta}};
  write_text(root / "dataset.json", index.dump(2) + "\n");
}

std::vector<CycloneRecord> read_dataset(const fs::path& root, json* meta) {
  const fs::path ipath = root / "dataset.json";
  require(fs::exists(ipath), Errc::missing_artifact, [&] { return "no dataset at " + root.string(); });
  const json index = parse_json_file(ipath);
  require(index.value("format", "") == kDatasetFormat, Errc::io,
          [&] { return ipath.string() + " is not a dataset index"; });
  std::vector<CycloneRecord> out;
  for (const auto& id : index.at("cyclones")) out.push_back(read_cyclone(root / id.get<std::string>()));
  if (meta != nullptr) *meta = index.value("meta", json::object());
  return out;
}

}  // namespace cyclone::data
