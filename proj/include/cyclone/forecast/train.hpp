#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cyclone/data/sample.hpp"
#include "cyclone/forecast/model.hpp"
#include "cyclone/mae/model.hpp"

namespace cyclone::forecast {

// A forecast origin: cyclone index, sample index of t0 and the targets of
// every configured lead that exists in the best track.
struct WindowRef {
  std::size_t cyclone = 0;
  std::size_t t0 = 0;  // index into samples; inputs are t0-4 .. t0
  std::vector<std::optional<double>> scalar;                     // per head
  std::vector<std::optional<std::pair<double, double>>> track;  // per head: (dlat, dlon)
};

// Origins with a complete 5-step window and at least one configured lead.
std::vector<WindowRef> collect_windows(std::span<const data::CycloneRecord> records,
                                       Variable v, std::span<const int> leads);

// Physical target of `v` at `lead` relative to the origin at samples[t0].
std::optional<double> scalar_target(const data::CycloneRecord& r, std::size_t t0, Variable v, int lead);
std::optional<std::pair<double, double>> track_target(const data::CycloneRecord& r, std::size_t t0, int lead);

struct FinetuneConfig {
  ForecastArch arch;        // feature_width is filled in from the encoder
  std::vector<int> leads{6};
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 5e-4;
  double plateau_factor = 0.2;
  std::size_t plateau_patience = 10;
  double val_fraction = 0.2;
  std::size_t bins = grid::kScalarBins;
  std::size_t track_bins = grid::kTrackBins;
};

struct FinetuneResult {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> learning_rate;  // rate used in each epoch
  std::size_t best_epoch = 0;
  std::vector<std::string> validation_ids;
};

struct FinetuneHooks {
  // Called after every epoch, before the frozen-weight check.
  std::function<void(std::size_t epoch, double train_loss, double val_loss)> on_epoch;
};

// Splits `records` by cyclone id into training and validation parts, fits
// bins and feature normalisation on the training part, trains the sequence
// encoder and heads with Adam on the summed smoothed cross-entropy, decays
// the rate on validation plateaus and restores the best-validation weights.
// The encoder is frozen throughout; any change to its weights raises a
// frozen-drift error.
std::unique_ptr<ForecastModel> finetune(mae::MaskedAutoencoder& encoder,
                                        std::span<const data::CycloneRecord> records,
                                        const data::NormStats& stats, const FinetuneConfig& config,
                                        std::uint64_t seed, FinetuneResult* result = nullptr,
                                        const FinetuneHooks& hooks = {});

// Lower-level entry used by the above and by tests: trains on precomputed
// features with explicit splits.
struct TrainingSet {
  const FeatureTable* features = nullptr;
  std::vector<WindowRef> train;
  std::vector<WindowRef> val;
};

void train_model(ForecastModel& model, const TrainingSet& set, const FinetuneConfig& config,
                 std::uint64_t seed, FinetuneResult& result,
                 const std::function<void(std::size_t, double, double)>& after_epoch = {});

// Mean per-window loss (sum over heads with a target) without updating.
double evaluate_loss(const ForecastModel& model, const FeatureTable& features,
                     std::span<const WindowRef> windows);

// Window features [1 x F] x 5 for an origin.
std::vector<ad::Tensor> window_features(const FeatureTable& features, const WindowRef& w);

}  // namespace cyclone::forecast
