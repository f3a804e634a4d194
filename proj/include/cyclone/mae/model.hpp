#pragma once

#include <filesystem>
#include <span>

#include <json.hpp>

#include "cyclone/autodiff/graph.hpp"
#include "cyclone/autodiff/params.hpp"
#include "cyclone/mask/patch.hpp"
#include "cyclone/mask/radial.hpp"
#include "cyclone/nn/layers.hpp"

namespace cyclone::mae {

struct EncoderConfig {
  std::size_t depth = 2;
  std::size_t heads = 4;
  std::size_t model_dim = 64;
  std::size_t mlp_dim = 128;
};

struct MaeConfig {
  std::size_t sat_hw = 64;
  std::size_t era5_hw = 64;
  std::size_t sat_patch = 8;
  std::size_t era5_patch = 8;
  EncoderConfig sat_encoder;
  EncoderConfig era5_encoder;
  EncoderConfig decoder;
  std::size_t cond_hidden = 64;
  double init_std = 0.02;

  mask::PatchGrid sat_grid() const { return {sat_hw, sat_hw, sat_patch}; }
  mask::PatchGrid era5_grid() const { return {era5_hw, era5_hw, era5_patch}; }
  std::size_t patch_count() const { return sat_grid().count(); }

  // Contract error when the two lattices differ or a width is unusable.
  void validate() const;
  nlohmann::json to_json() const;
  static MaeConfig from_json(const nlohmann::json& j);
};

// Parameter groups, usable with ParamStore::set_trainable.
inline constexpr const char* kSatEncoder = "sat_encoder";
inline constexpr const char* kEra5Encoder = "era5_encoder";
inline constexpr const char* kFusion = "fusion";
inline constexpr const char* kCondEncoder = "cond_encoder";
inline constexpr const char* kMaskToken = "mask_token";
inline constexpr const char* kDecoder = "decoder";
inline constexpr const char* kSatHead = "sat_head";
inline constexpr const char* kEra5Head = "era5_head";

struct Reconstruction {
  ad::Var sat;   // [N x p*p*2] patch predictions
  ad::Var era5;  // [N x p*p*14]
};

class MaskedAutoencoder {
 public:
  // Fresh weights: normal(0, init_std) matrices, zero biases, unit LN gains.
  MaskedAutoencoder(MaeConfig config, std::uint64_t seed);
  // Wraps previously saved weights; names and shapes are checked.
  MaskedAutoencoder(MaeConfig config, ad::ParamStore params);

  MaskedAutoencoder(const MaskedAutoencoder&) = delete;
  MaskedAutoencoder& operator=(const MaskedAutoencoder&) = delete;
  MaskedAutoencoder(MaskedAutoencoder&&) = delete;

  static std::unique_ptr<MaskedAutoencoder> load(const std::filesystem::path& manifest);
  void save(const std::filesystem::path& manifest, nlohmann::json meta = nlohmann::json::object()) const;

  const MaeConfig& config() const noexcept { return config_; }
  ad::ParamStore& params() noexcept { return params_; }
  const ad::ParamStore& params() const noexcept { return params_; }

  // Encoders see only the patches listed in `visible`, in that order.
  ad::Var encode_sat(ad::Graph& g, ad::Var patches, std::span<const std::size_t> visible) const;
  ad::Var encode_era5(ad::Graph& g, ad::Var patches, std::span<const std::size_t> visible) const;
  // W_f [sat | era5] + b_f, per token.
  ad::Var fuse(ad::Graph& g, ad::Var sat_tokens, ad::Var era5_tokens) const;
  // att [1 x 4] -> [1 x decoder dim].
  ad::Var condition(ad::Graph& g, ad::Var att) const;
  // Re-arranges fused visible tokens and mask tokens into patch order, adds
  // positional embeddings, prepends the conditioning token and decodes.
  // Returns [N x decoder dim] patch tokens (conditioning token dropped).
  ad::Var decode(ad::Graph& g, ad::Var fused, ad::Var cond,
                 const mask::MaskPartition& partition) const;

  // Full forward pass from channel-last fields and a [1 x 4] att row.
  Reconstruction reconstruct(ad::Graph& g, ad::Var sat_field, ad::Var era5_field, ad::Var att,
                             const mask::MaskPartition& partition) const;

  // Pooled unmasked encoder tokens concatenated with the conditioning
  // features: [1 x (sat dim + era5 dim + decoder dim)].
  ad::Var features(ad::Graph& g, ad::Var sat_field, ad::Var era5_field, ad::Var att) const;
  std::size_t feature_width() const noexcept;

 private:
  struct Encoder {
    nn::Linear embed;
    std::vector<nn::TransformerBlock> blocks;
    nn::LayerNorm norm;
    ad::Tensor pos;  // [N x d]
  };

  void build(std::uint64_t seed);
  void bind();
  ad::Var encode(ad::Graph& g, const Encoder& enc, ad::Var patches,
                 std::span<const std::size_t> visible) const;

  MaeConfig config_;
  ad::ParamStore params_;
  Encoder sat_, era5_;
  nn::Linear fusion_;
  nn::Linear cond1_, cond2_;
  ad::Parameter* mask_token_ = nullptr;
  std::vector<nn::TransformerBlock> decoder_;
  nn::LayerNorm decoder_norm_;
  nn::Linear sat_head_, era5_head_;
  ad::Tensor dec_pos_;  // [(N + 1) x d_dec], row 0 is the conditioning slot
};

// Sum over masked patches of squared reconstruction error of both
// modalities, divided by |M|. Targets are patchified normalised fields.
ad::Var recon_loss(const Reconstruction& pred, const ad::Tensor& sat_target,
                   const ad::Tensor& era5_target, std::span<const std::size_t> masked);

}  // namespace cyclone::mae
