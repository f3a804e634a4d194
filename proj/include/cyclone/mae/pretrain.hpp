#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cyclone/autodiff/graph.hpp"
#include "cyclone/data/preprocess.hpp"
#include "cyclone/mae/model.hpp"

namespace cyclone::mae {

// One normalised pre-training example with its patchified targets.
struct PretrainSample {
  ad::Tensor sat;            // [H x W x 2]
  ad::Tensor era5;           // [H x W x 14]
  ad::Tensor att;            // [1 x 4]
  ad::Tensor sat_patches;    // [N x p*p*2]
  ad::Tensor era5_patches;   // [N x p*p*14]
  std::string label;         // "<cyclone id>@<time>", for diagnostics
};

// Z-scores every sample with `stats` and patchifies the targets.
std::vector<PretrainSample> make_pretrain_samples(std::span<const data::CycloneRecord> records,
                                                  const data::NormStats& stats,
                                                  const MaeConfig& config);

struct PretrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  double learning_rate = 5e-4;
  mask::RadialMaskPolicy mask;
  // Draw a new partition per sample every epoch; when false each sample
  // keeps the partition of epoch 0.
  bool resample_masks = true;
  // Debug mode: nothing masked and the loss taken over every patch.
  bool all_visible = false;
};

struct PretrainResult {
  std::vector<double> epoch_loss;  // mean over samples, per epoch
  std::size_t best_epoch = 0;
  double best_loss = 0.0;
};

// Loss of one sample under `partition`; when `grads` is given the sample's
// parameter gradients are added into it with weight `scale`.
double sample_loss(const MaskedAutoencoder& model, const PretrainSample& sample,
                   const mask::MaskPartition& partition, ad::Gradients* grads = nullptr,
                   double scale = 1.0);

// Partition used for sample `index` in `epoch`.
mask::MaskPartition pretrain_partition(const MaeConfig& model, const PretrainConfig& config,
                                       std::uint64_t seed, std::size_t epoch, std::size_t index);

struct PretrainOutputs {
  std::filesystem::path dir;  // empty: nothing written
  std::function<void(std::size_t epoch, double loss)> on_epoch;
};

// Adam on the masked reconstruction loss. Writes mae_best.json (lowest epoch
// loss), mae_final.json and pretrain_loss.csv (epoch,mean_loss) into
// outputs.dir. A non-finite loss or gradient aborts with a non-finite error
// naming the epoch, batch and sample.
PretrainResult pretrain(MaskedAutoencoder& model, std::span<const PretrainSample> samples,
                        const PretrainConfig& config, std::uint64_t seed,
                        const PretrainOutputs& outputs = {});

std::string loss_history_csv(std::span<const double> losses);

}  // namespace cyclone::mae
