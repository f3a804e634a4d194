#include "cyclone/mae/pretrain.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "cyclone/autodiff/ops.hpp"
#include "cyclone/autodiff/optim.hpp"
#include "cyclone/binary_io.hpp"
#include "cyclone/error.hpp"
#include "cyclone/rng.hpp"

namespace cyclone::mae {

using ad::Tensor;

std::vector<PretrainSample> make_pretrain_samples(std::span<const data::CycloneRecord> records,
                                                  const data::NormStats& stats,
                                                  const MaeConfig& config) {
  std::vector<PretrainSample> out;
  const auto sg = config.sat_grid();
  const auto eg = config.era5_grid();
  for (const auto& rec : records) {
    for (const auto& s : rec.samples) {
      const data::TCSample z = data::zscore(s, stats);
      PretrainSample p;
      p.sat = z.sat;
      p.era5 = z.era5;
      p.att = Tensor({1, data::kAttCount}, std::vector<double>(z.att.begin(), z.att.end()));
      p.sat_patches = mask::patchify(p.sat, sg);
      p.era5_patches = mask::patchify(p.era5, eg);
      p.label = rec.track.id + "@" + format_iso8601(s.time);
      out.push_back(std::move(p));
    }
  }
  return out;
}

double sample_loss(const MaskedAutoencoder& model, const PretrainSample& sample,
                   const mask::MaskPartition& partition, ad::Gradients* grads, double scale) {
  ad::Graph g(grads != nullptr);
  const Reconstruction rec = model.reconstruct(g, g.constant(sample.sat), g.constant(sample.era5),
                                               g.constant(sample.att), partition);
  std::vector<std::size_t> all;
  std::span<const std::size_t> scored = partition.masked;
  if (partition.masked.empty()) {
    all = partition.visible;
    scored = all;
  }
  ad::Var loss = recon_loss(rec, sample.sat_patches, sample.era5_patches, scored);
  const double value = loss.value().item();
  if (grads != nullptr && std::isfinite(value)) {
    g.backward(loss);
    grads->accumulate(g, model.params(), scale);
  }
  return value;
}

mask::MaskPartition pretrain_partition(const MaeConfig& model, const PretrainConfig& config,
                                       std::uint64_t seed, std::size_t epoch, std::size_t index) {
  if (config.all_visible) return mask::MaskPartition::all_visible(model.patch_count());
  const std::size_t e = config.resample_masks ? epoch : 0;
  return mask::sample_partition(model.sat_grid(), config.mask, derive_seed(seed, 1 + e, index));
}

std::string loss_history_csv(std::span<const double> losses) {
  std::string out = "epoch,mean_loss\n";
  char line[64];
  for (std::size_t e = 0; e < losses.size(); ++e) {
    std::snprintf(line, sizeof line, "%zu,%.17g\n", e + 1, losses[e]);
    out += line;
  }
  return out;
}

PretrainResult pretrain(MaskedAutoencoder& model, std::span<const PretrainSample> samples,
                        const PretrainConfig& config, std::uint64_t seed,
                        const PretrainOutputs& outputs) {
  require(!samples.empty(), Errc::contract, "no pre-training samples");
  require(config.batch_size > 0 && config.epochs > 0, Errc::config,
          "pretrain epochs and batch_size must be positive");
  config.mask.validate();

  ad::ParamStore& store = model.params();
  ad::Adam adam(store, {config.learning_rate});
  ad::Gradients grads(store);
  PretrainResult result;
  std::vector<std::size_t> order(samples.size());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffler(derive_seed(seed, 0, epoch));
    shuffler.shuffle(std::span<std::size_t>(order));

    double total = 0.0;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += config.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double weight = 1.0 / double(end - start);
      grads.zero();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        const auto part = pretrain_partition(model.config(), config, seed, epoch, idx);
        const double loss = sample_loss(model, samples[idx], part, &grads, weight);
        require(std::isfinite(loss), Errc::non_finite,
                [&] { return "non-finite reconstruction loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                    std::to_string(batch + 1) + ", sample " + samples[idx].label; });
        total += loss;
      }
      require(grads.all_finite(), Errc::non_finite,
              [&] { return "non-finite gradient at epoch " + std::to_string(epoch + 1) + ", batch " +
                  std::to_string(batch + 1); });
      adam.step(store, grads);
    }

    const double mean_loss = total / double(samples.size());
    result.epoch_loss.push_back(mean_loss);
    if (epoch == 0 || mean_loss < result.best_loss) {
      result.best_loss = mean_loss;
      result.best_epoch = epoch + 1;
      if (!outputs.dir.empty()) {
        model.save(outputs.dir / "mae_best.json", {{"epoch", epoch + 1}, {"loss", mean_loss}});
      }
    }
    if (outputs.on_epoch) outputs.on_epoch(epoch + 1, mean_loss);
  }

  if (!outputs.dir.empty()) {
    model.save(outputs.dir / "mae_final.json",
               {{"epoch", config.epochs}, {"loss", result.epoch_loss.back()}});
    write_text(outputs.dir / "pretrain_loss.csv", loss_history_csv(result.epoch_loss));
  }
  return result;
}

}  // namespace cyclone::mae
