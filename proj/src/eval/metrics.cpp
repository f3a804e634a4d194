#include "cyclone/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "cyclone/data/preprocess.hpp"
#include "cyclone/error.hpp"

namespace cyclone::eval {

double mae(std::span<const double> predictions, std::span<const double> observations) {
  require(!predictions.empty(), Errc::contract, "mean absolute error of an empty pairing");
  require(predictions.size() == observations.size(), Errc::contract, [&] {
    return "prediction/observation count mismatch: " + std::to_string(predictions.size()) +
           " vs " + std::to_string(observations.size());
  });
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) total += std::abs(predictions[i] - observations[i]);
  return total / double(predictions.size());
}

double track_error_km(double lat_a, double lon_a, double lat_b, double lon_b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (lat_b - lat_a) * rad;
  const double dlon = (lon_b - lon_a) * rad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  // Symmetric in (a, b): only squared half-differences and the cosine product.
  const double h = s1 * s1 + std::cos(lat_a * rad) * std::cos(lat_b * rad) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

bool known_variable(std::string_view v) noexcept { return v == "MSW" || v == "MSLP" || v == "Track"; }

std::string_view unit_of(std::string_view v) {
  if (v == "MSW") return "m/s";
  if (v == "MSLP") return "hPa";
  if (v == "Track") return "km";
  fail(Errc::config, "unknown variable '" + std::string(v) + "'");
}

std::vector<Scored> score_predictions(std::span<const Prediction> predictions,
                                      std::span<const data::CycloneRecord> records,
                                      std::string_view model) {
  std::map<std::string, const data::CycloneRecord*, std::less<>> by_id;
  for (const auto& r : records) by_id[r.track.id] = &r;
  std::vector<Scored> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) {
    const auto it = by_id.find(p.cyclone);
    require(it != by_id.end(), Errc::alignment,
            [&] { return "prediction for unknown cyclone " + p.cyclone; });
    const auto& pts = it->second->track.points;
    const TimePoint valid = p.t0 + std::chrono::hours(p.lead);
    const auto obs = std::find_if(pts.begin(), pts.end(), [&](const auto& q) { return q.time == valid; });
    require(obs != pts.end(), Errc::alignment, [&] {
      return "no best-track fix for " + p.cyclone + " at " + format_iso8601(valid);
    });
    Scored s{std::string(data::basin_name(it->second->track.basin)), std::string(model), p.variable,
             p.lead, year_of(p.t0), 0.0};
    if (p.variable == "MSW") s.error = std::abs(p.value - obs->msw);
    else if (p.variable == "MSLP") s.error = std::abs(p.value - obs->mslp);
    else if (p.variable == "Track") s.error = track_error_km(p.lat, p.lon, obs->lat, obs->lon);
    else unit_of(p.variable);  // raises
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Scored> persistence_scores(std::span<const data::CycloneRecord> records,
                                       std::string_view variable, std::span<const int> leads,
                                       std::string_view model) {
  unit_of(variable);
  std::vector<Scored> out;
  for (const auto& r : records) {
    const auto& pts = r.track.points;
    for (std::size_t t0 = data::kWindowSteps - 1; t0 < pts.size(); ++t0) {
      for (int lead : leads) {
        const std::size_t t = t0 + std::size_t(lead / 6);
        if (t >= pts.size()) continue;
        Scored s{std::string(data::basin_name(r.track.basin)), std::string(model),
                 std::string(variable), lead, year_of(pts[t0].time), 0.0};
        if (variable == "MSW") s.error = std::abs(pts[t0].msw - pts[t].msw);
        else if (variable == "MSLP") s.error = std::abs(pts[t0].mslp - pts[t].mslp);
        else s.error = track_error_km(pts[t0].lat, pts[t0].lon, pts[t].lat, pts[t].lon);
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

}  // namespace cyclone::eval
