#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cyclone/data/synth.hpp"
#include "cyclone/forecast/train.hpp"
#include "cyclone/mae/pretrain.hpp"

namespace cyclone::cli {

// Every key below has the default shown; keys not listed are rejected.
struct RunConfig {
  std::optional<std::uint64_t> seed;  // mandatory
  std::string out = "run";            // output root

  struct Data {
    std::size_t cyclones = 20;      // training cyclones (data/train)
    std::size_t test_cyclones = 5;  // held-out cyclones (data/test)
    std::size_t min_steps = 30;
    std::size_t max_steps = 36;
    double noise = 0.05;
    double obs_noise = 0.3;
    std::vector<std::string> basins{"WP", "NA", "EP", "SI", "SP"};
    std::size_t sat_hw = 64;
    std::size_t era5_hw = 64;
    double sat_extent_deg = 28.0;
    double era5_extent_deg = 20.0;
  } data;

  struct Mask {
    double r_eye = 0.20;
    double r_outer = 0.55;
    double gamma_core = 0.20;
    double gamma_wall = 0.50;
    double gamma_env = 0.75;
  } mask;

  struct Model {
    std::size_t sat_patch = 8;
    std::size_t era5_patch = 8;
    std::size_t encoder_depth = 2;
    std::size_t encoder_heads = 4;
    std::size_t encoder_dim = 64;
    std::size_t encoder_mlp = 128;
    std::size_t decoder_depth = 2;
    std::size_t decoder_heads = 4;
    std::size_t decoder_dim = 64;
    std::size_t decoder_mlp = 128;
    std::size_t cond_hidden = 64;
    double init_std = 0.02;
  } model;

  struct Pretrain {
    std::size_t epochs = 50;
    std::size_t batch_size = 8;
    double learning_rate = 5e-4;
    bool resample_masks = true;
  } pretrain;

  struct Finetune {
    std::vector<std::string> variables{"MSW", "MSLP", "Track"};
    std::vector<int> leads{6, 24, 48, 72, 96, 120};
    std::vector<int> track_leads{6, 24, 48, 72};
    std::string basin = "all";  // train on one basin only, or "all"
    bool shared_trunk = false;  // one multi-head model per variable instead of one per lead
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double learning_rate = 5e-4;
    double plateau_factor = 0.2;
    std::size_t plateau_patience = 10;
    double val_fraction = 0.2;
    std::size_t hidden = 512;
    std::size_t layers = 2;
    std::size_t head_hidden_scalar = 256;
    std::size_t head_hidden_track = 64;
    std::size_t bins = 256;
    std::size_t track_bins = 64;
    double sigma_bins = 1.0;
  } finetune;

  struct Eval {
    std::vector<double> quantiles{0.05, 0.95, 0.25, 0.75};  // (lo, hi) pairs
    std::vector<std::string> baselines;  // CSV files (model,basin,variable,lead,mae)
    bool persistence = true;
  } eval;

  struct Attribution {
    std::size_t steps = 64;
    std::size_t windows = 4;  // held-out origins pooled per variable
  } attribution;

  // Range and consistency checks; raises config errors.
  void validate() const;

  std::uint64_t require_seed() const;
  std::filesystem::path root() const { return out; }

  data::SynthDatasetConfig synth_config(std::size_t cyclones) const;
  mae::MaeConfig mae_config() const;
  mae::PretrainConfig pretrain_config() const;
  forecast::FinetuneConfig finetune_config(forecast::Variable v, std::vector<int> leads) const;
  std::vector<int> leads_for(forecast::Variable v) const;
  std::vector<std::pair<double, double>> quantile_pairs() const;
};

// TOML subset: [section] headers, key = value with integers, floats, booleans,
// "strings" and flat [arrays]; '#' comments. Unknown sections or keys, and
// values of the wrong type, are config errors naming the line.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Every key with its effective value, in the same syntax.
std::string effective_config(const RunConfig& config);

}  // namespace cyclone::cli
