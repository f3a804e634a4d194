#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cyclone/data/sample.hpp"

namespace cyclone::eval {

inline constexpr double kEarthRadiusKm = 6371.0;

// Mean absolute difference; empty or misaligned inputs are a contract error.
double mae(std::span<const double> predictions, std::span<const double> observations);

// Haversine great-circle distance in km.
double track_error_km(double lat_a, double lon_a, double lat_b, double lon_b);

// "MSW" -> "m/s", "MSLP" -> "hPa", "Track" -> "km"; anything else is a config error.
std::string_view unit_of(std::string_view variable);
bool known_variable(std::string_view variable) noexcept;

// One scored (cyclone, t0, lead): absolute error for scalars, km for tracks.
struct Scored {
  std::string basin;
  std::string model;
  std::string variable;
  int lead = 0;
  int year = 0;
  double error = 0.0;
};

// A forecast issued at t0 for t0 + lead.
struct Prediction {
  std::string cyclone;
  TimePoint t0{};
  std::string variable;
  int lead = 0;
  double value = 0.0;  // MSW / MSLP
  double lat = 0.0;    // Track
  double lon = 0.0;
};

// Matches predictions with the best track of their cyclone. Predictions whose
// cyclone or valid time is absent are an alignment error.
std::vector<Scored> score_predictions(std::span<const Prediction> predictions,
                                      std::span<const data::CycloneRecord> records,
                                      std::string_view model);

// Repeat the t0 value (or position) at every lead, over the same origins the
// forecast model uses: t0 with a full 5-step window and the lead available.
std::vector<Scored> persistence_scores(std::span<const data::CycloneRecord> records,
                                       std::string_view variable, std::span<const int> leads,
                                       std::string_view model = "Persistence");

}  // namespace cyclone::eval
