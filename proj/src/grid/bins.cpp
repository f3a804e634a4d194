#include "cyclone/grid/bins.hpp"

#include <algorithm>
#include <cmath>

#include "cyclone/data/sample.hpp"
#include "cyclone/error.hpp"

namespace cyclone::grid {

using nlohmann::json;

BinSpec BinSpec::make(double v_min, double v_max, std::size_t k) {
  require(std::isfinite(v_min) && std::isfinite(v_max) && v_min < v_max, Errc::degenerate,
          [&] { return "bin range needs v_min < v_max, got [" + std::to_string(v_min) + ", " +
                       std::to_string(v_max) + "]"; });
  require(k >= 2, Errc::contract, "a bin spec needs at least two bins");
  return {v_min, v_max, k};
}

std::vector<double> BinSpec::centers() const {
  std::vector<double> c(k);
  for (std::size_t i = 0; i < k; ++i) c[i] = center(i);
  return c;
}

json BinSpec::to_json() const {
  return {{"v_min", v_min}, {"v_max", v_max}, {"k", k}};
}

BinSpec BinSpec::from_json(const json& j) {
  return make(j.at("v_min").get<double>(), j.at("v_max").get<double>(), j.at("k").get<std::size_t>());
}

BinSpec fit_binspec_global_scan(std::span<const double> targets, std::size_t k) {
  require(!targets.empty(), Errc::degenerate, "no training targets to scan");
  const auto [lo, hi] = std::minmax_element(targets.begin(), targets.end());
  require(*lo < *hi, Errc::degenerate,
          [&] { return "training targets are constant (" + std::to_string(*lo) + "); cannot bin"; });
  return BinSpec::make(*lo, *hi, k);
}

TrackRegime regime_for_lead(int lead_hours) {
  require(lead_hours > 0 && lead_hours <= 120 && lead_hours % 6 == 0, Errc::contract,
          [&] { return "lead " + std::to_string(lead_hours) + " h is not one of 6, 12, ..., 120"; });
  return lead_hours <= 48 ? TrackRegime::narrow : TrackRegime::wide;
}

TrackBinSpec track_binspec(int lead_hours, std::size_t m) {
  const TrackRegime r = regime_for_lead(lead_hours);
  const double lat = r == TrackRegime::narrow ? 15.0 : 20.0;
  const double lon = r == TrackRegime::narrow ? 20.0 : 25.0;
  return {BinSpec::make(-lat, lat, m), BinSpec::make(-lon, lon, m), r};
}

json TrackBinSpec::to_json() const {
  return {{"lat", lat.to_json()},
          {"lon", lon.to_json()},
          {"regime", regime == TrackRegime::narrow ? "narrow" : "wide"}};
}

TrackBinSpec TrackBinSpec::from_json(const json& j) {
  const std::string r = j.at("regime").get<std::string>();
  require(r == "narrow" || r == "wide", Errc::config, "unknown track regime '" + r + "'");
  return {BinSpec::from_json(j.at("lat")), BinSpec::from_json(j.at("lon")),
          r == "narrow" ? TrackRegime::narrow : TrackRegime::wide};
}

std::vector<double> smooth_labels(double y, std::span<const double> centers, double sigma) {
  require(sigma > 0.0, Errc::contract, "smoothing bandwidth must be positive");
  require(!centers.empty(), Errc::contract, "no bin centres");
  std::vector<double> q(centers.size());
  // Log-domain normalisation keeps far-away targets from underflowing.
  double peak = -INFINITY;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double z = (centers[i] - y) / sigma;
    q[i] = -0.5 * z * z;
    peak = std::max(peak, q[i]);
  }
  double total = 0.0;
  for (double& v : q) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : q) v /= total;
  return q;
}

std::vector<double> smooth_labels(double y, const BinSpec& spec, double sigma) {
  return smooth_labels(y, spec.centers(), sigma);
}

double ce_loss(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), Errc::dimension, "ce_loss: distribution sizes differ");
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (q[i] != 0.0) loss -= q[i] * std::log(std::max(p[i], 1e-12));
  }
  return loss;
}

double expect_decode(std::span<const double> probs, std::span<const double> centers) {
  require(probs.size() == centers.size(), Errc::dimension, "expect_decode: size mismatch");
  double v = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) v += probs[i] * centers[i];
  return v;
}

double expect_decode(std::span<const double> probs, const BinSpec& spec) {
  require(probs.size() == spec.k, Errc::dimension, "expect_decode: probability count differs from K");
  double v = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) v += probs[i] * spec.center(i);
  // Guards against round-off pushing a one-sided distribution past the hull.
  return std::clamp(v, spec.center(0), spec.center(spec.k - 1));
}

Position apply_displacement(double lat, double lon, double dlat, double dlon) {
  Position p{lat + dlat, data::wrap_longitude(lon + dlon), false};
  if (p.lat > 90.0 || p.lat < -90.0) {
    p.lat = std::clamp(p.lat, -90.0, 90.0);
    p.clamped = true;
  }
  return p;
}

double quantile(std::span<const double> probs, const BinSpec& spec, double q) {
  require(probs.size() == spec.k, Errc::dimension, "quantile: probability count differs from K");
  require(q >= 0.0 && q <= 1.0, Errc::contract, "quantile level must lie in [0, 1]");
  double cum = 0.0;
  double prev_cum = 0.0;
  double prev_center = 0.0;
  bool have_prev = false;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last = i;
    cum += probs[i];
    if (cum >= q) {
      if (!have_prev) return spec.center(i);
      const double t = (q - prev_cum) / (cum - prev_cum);
      return prev_center + t * (spec.center(i) - prev_center);
    }
    prev_cum = cum;
    prev_center = spec.center(i);
    have_prev = true;
  }
  return spec.center(last);  // q beyond the accumulated mass (round-off)
}

std::pair<double, double> interval(std::span<const double> probs, const BinSpec& spec,
                                   double q_lo, double q_hi) {
  require(q_lo >= 0.0 && q_lo < q_hi && q_hi <= 1.0, Errc::contract,
          "interval needs 0 <= q_lo < q_hi <= 1");
  return {quantile(probs, spec, q_lo), quantile(probs, spec, q_hi)};
}

void check_distribution(std::span<const double> probs, std::size_t expected_size) {
  require(probs.size() == expected_size, Errc::dimension, "distribution has the wrong length");
  double total = 0.0;
  for (double p : probs) {
    require(p >= 0.0 && std::isfinite(p), Errc::contract, "negative or non-finite probability");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-9, Errc::contract,
          [&] { return "probabilities sum to " + std::to_string(total) + ", not 1"; });
}

}  // namespace cyclone::grid
