#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "cyclone/autodiff/graph.hpp"
#include "cyclone/autodiff/params.hpp"
#include "cyclone/forecast/features.hpp"
#include "cyclone/grid/bins.hpp"
#include "cyclone/nn/layers.hpp"

namespace cyclone::forecast {

struct ForecastArch {
  Variable variable = Variable::msw;
  std::size_t feature_width = 0;
  std::size_t hidden = 32;       // recurrent state width
  std::size_t layers = 2;        // stacked LSTM layers
  std::size_t head_hidden = 32;  // width of each head's hidden layer
  double sigma_bins = 1.0;       // label-smoothing bandwidth, in bin widths
};

// One prediction head: a lead time and the bins its softmax is defined over.
struct HeadSpec {
  int lead = 6;
  grid::BinSpec scalar;      // MSW / MSLP
  grid::TrackBinSpec track;  // Track: displacement from the t0 centre

  std::size_t width(Variable v) const { return v == Variable::track ? track.lat.k + track.lon.k : scalar.k; }
};

// Standardisation of fused features, fitted on training windows.
struct FeatureNorm {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct Interval {
  double q_lo = 0.0;
  double q_hi = 1.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct LeadForecast {
  int lead = 0;
  double value = 0.0;         // MSW / MSLP decode
  double lat = 0.0;           // Track decode (absolute position)
  double lon = 0.0;
  bool clamped = false;       // latitude clamped at a pole
  std::vector<double> probs;  // scalar bins, or latitude bins for Track
  std::vector<double> probs_lon;
  std::vector<Interval> intervals;      // scalar value, or latitude for Track
  std::vector<Interval> intervals_lon;  // Track only
};

inline constexpr std::size_t kWindow = 5;

// Stacked LSTM over the 5-step feature window, final state feeding one
// two-layer head per lead.
class ForecastModel {
 public:
  ForecastModel(ForecastArch arch, std::vector<HeadSpec> heads, FeatureNorm norm,
                std::uint64_t seed);
  ForecastModel(ForecastArch arch, std::vector<HeadSpec> heads, FeatureNorm norm,
                ad::ParamStore params);

  ForecastModel(const ForecastModel&) = delete;
  ForecastModel& operator=(const ForecastModel&) = delete;

  static std::unique_ptr<ForecastModel> load(const std::filesystem::path& manifest,
                                             nlohmann::json* meta = nullptr);
  void save(const std::filesystem::path& manifest, nlohmann::json meta = nlohmann::json::object()) const;

  const ForecastArch& arch() const noexcept { return arch_; }
  const std::vector<HeadSpec>& heads() const noexcept { return heads_; }
  const FeatureNorm& norm() const noexcept { return norm_; }
  ad::ParamStore& params() noexcept { return params_; }
  const ad::ParamStore& params() const noexcept { return params_; }

  // steps: kWindow tensors [B x feature_width] (raw fused features), oldest
  // first. Returns per-head logits [B x head width].
  std::vector<ad::Var> forward(ad::Graph& g, std::span<const ad::Var> steps) const;

  // Per-head probabilities for one window of raw features [1 x F] each.
  std::vector<std::vector<double>> probabilities(std::span<const ad::Tensor> window) const;

  // One forward evaluation yields every lead's value, distribution and
  // quantile intervals. lat0/lon0 are the t0 centre (used for Track).
  std::vector<LeadForecast> predict(std::span<const ad::Tensor> window, double lat0, double lon0,
                                    std::span<const std::pair<double, double>> quantiles) const;

  std::size_t forward_count() const noexcept { return forward_count_.load(); }

 private:
  void build(std::uint64_t seed);
  ad::Var normalize(ad::Graph& g, ad::Var features) const;

  struct LstmLayer {
    nn::Linear input;   // [in x 4H], carries the bias
    nn::Linear hidden;  // [H x 4H]
  };
  struct Head {
    nn::Linear fc1, fc2;
  };

  ForecastArch arch_;
  std::vector<HeadSpec> heads_;
  FeatureNorm norm_;
  ad::ParamStore params_;
  std::vector<LstmLayer> lstm_;
  std::vector<Head> head_layers_;
  ad::Tensor norm_scale_, norm_shift_;
  mutable std::atomic<std::size_t> forward_count_{0};
};

// Decoding helpers shared by predict and evaluation.
LeadForecast decode_head(const HeadSpec& head, Variable v, std::span<const double> probs,
                         double lat0, double lon0,
                         std::span<const std::pair<double, double>> quantiles);

nlohmann::json arch_to_json(const ForecastArch& a);
ForecastArch arch_from_json(const nlohmann::json& j);

}  // namespace cyclone::forecast
