#pragma once

#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

namespace cyclone::grid {

// K uniform bins over [v_min, v_max]; bin i is represented by its centre
// v_min + (i + 0.5) * width.
struct BinSpec {
  double v_min = 0.0;
  double v_max = 1.0;
  std::size_t k = 256;

  // Contract error unless v_min < v_max and k >= 2.
  static BinSpec make(double v_min, double v_max, std::size_t k);

  double width() const noexcept { return (v_max - v_min) / double(k); }
  double center(std::size_t i) const noexcept { return v_min + (double(i) + 0.5) * width(); }
  std::vector<double> centers() const;

  nlohmann::json to_json() const;
  static BinSpec from_json(const nlohmann::json& j);
  bool operator==(const BinSpec&) const = default;
};

inline constexpr std::size_t kScalarBins = 256;
inline constexpr std::size_t kTrackBins = 64;

// Bins spanning the exact extrema of the training targets; a degenerate error
// when fewer than two distinct values exist.
BinSpec fit_binspec_global_scan(std::span<const double> targets, std::size_t k = kScalarBins);

enum class TrackRegime { narrow, wide };

// Displacement bins in degrees relative to the t0 centre.
struct TrackBinSpec {
  BinSpec lat;
  BinSpec lon;
  TrackRegime regime = TrackRegime::narrow;

  nlohmann::json to_json() const;
  static TrackBinSpec from_json(const nlohmann::json& j);
};

// Leads up to and including 48 h use the narrow box (+-15 lat, +-20 lon);
// longer leads the wide box (+-20 lat, +-25 lon).
TrackRegime regime_for_lead(int lead_hours);
TrackBinSpec track_binspec(int lead_hours, std::size_t m = kTrackBins);

// Gaussian soft target over the bin centres, normalised to sum to one. Values
// outside [v_min, v_max] concentrate on the edge bins.
std::vector<double> smooth_labels(double y, const BinSpec& spec, double sigma);
// Same rule on explicit centres (used for the worked examples).
std::vector<double> smooth_labels(double y, std::span<const double> centers, double sigma);

// -sum q_i log(max(p_i, 1e-12)).
double ce_loss(std::span<const double> p, std::span<const double> q);

// Probability-weighted mean of the centres.
double expect_decode(std::span<const double> probs, const BinSpec& spec);
double expect_decode(std::span<const double> probs, std::span<const double> centers);

struct Position {
  double lat = 0.0;
  double lon = 0.0;
  bool clamped = false;  // latitude left [-90, 90] and was clamped
};

// Adds a displacement; longitude wrapped into [-180, 180).
Position apply_displacement(double lat, double lon, double dlat, double dlon);

// Quantile of the categorical distribution, treating each bin as a point mass
// at its centre and interpolating the cumulative distribution linearly
// between consecutive centres that carry mass.
double quantile(std::span<const double> probs, const BinSpec& spec, double q);
std::pair<double, double> interval(std::span<const double> probs, const BinSpec& spec,
                                   double q_lo, double q_hi);

// Contract error unless probs are non-negative and sum to one within 1e-9.
void check_distribution(std::span<const double> probs, std::size_t expected_size);

}  // namespace cyclone::grid
