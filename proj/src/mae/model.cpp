#include "cyclone/mae/model.hpp"

#include "cyclone/autodiff/checkpoint.hpp"
#include "cyclone/autodiff/ops.hpp"
#include "cyclone/data/sample.hpp"
#include "cyclone/error.hpp"

namespace cyclone::mae {

using ad::Tensor;
using ad::Var;
using nlohmann::json;

namespace {

void check_encoder(const EncoderConfig& e, const std::string& what) {
  require(e.depth >= 1 && e.heads >= 1 && e.mlp_dim >= 1, Errc::config,
          [&] { return what + ": depth, heads and mlp_dim must be positive"; });
  require(e.model_dim % e.heads == 0, Errc::config,
          [&] { return what + ": model_dim " + std::to_string(e.model_dim) + " is not divisible by " +
              std::to_string(e.heads) + " heads"; });
  require(e.model_dim % 4 == 0, Errc::config, [&] { return what + ": model_dim must be divisible by 4"; });
}

json encoder_json(const EncoderConfig& e) {
  return {{"depth", e.depth}, {"heads", e.heads}, {"model_dim", e.model_dim}, {"mlp_dim", e.mlp_dim}};
}

EncoderConfig encoder_from(const json& j) {
  return {j.at("depth").get<std::size_t>(), j.at("heads").get<std::size_t>(),
          j.at("model_dim").get<std::size_t>(), j.at("mlp_dim").get<std::size_t>()};
}

}  // namespace

void MaeConfig::validate() const {
  const auto s = sat_grid();  // throws on non-divisor patch sizes
  const auto e = era5_grid();
  require(s.same_lattice(e), Errc::config,
          [&] { return "satellite and environmental patch lattices differ (" + std::to_string(s.rows()) + "x" +
              std::to_string(s.cols()) + " vs " + std::to_string(e.rows()) + "x" +
              std::to_string(e.cols()) + "); one mask is shared by both"; });
  check_encoder(sat_encoder, "sat encoder");
  check_encoder(era5_encoder, "era5 encoder");
  check_encoder(decoder, "decoder");
  require(cond_hidden > 0 && init_std >= 0.0, Errc::config, "invalid conditioning width or init std");
}

json MaeConfig::to_json() const {
  return {{"sat_hw", sat_hw},
          {"era5_hw", era5_hw},
          {"sat_patch", sat_patch},
          {"era5_patch", era5_patch},
          {"sat_encoder", encoder_json(sat_encoder)},
          {"era5_encoder", encoder_json(era5_encoder)},
          {"decoder", encoder_json(decoder)},
          {"cond_hidden", cond_hidden},
          {"init_std", init_std}};
}

MaeConfig MaeConfig::from_json(const json& j) {
  MaeConfig c;
  c.sat_hw = j.at("sat_hw");
  c.era5_hw = j.at("era5_hw");
  c.sat_patch = j.at("sat_patch");
  c.era5_patch = j.at("era5_patch");
  c.sat_encoder = encoder_from(j.at("sat_encoder"));
  c.era5_encoder = encoder_from(j.at("era5_encoder"));
  c.decoder = encoder_from(j.at("decoder"));
  c.cond_hidden = j.at("cond_hidden");
  c.init_std = j.at("init_std");
  return c;
}

MaskedAutoencoder::MaskedAutoencoder(MaeConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  build(seed);
}

MaskedAutoencoder::MaskedAutoencoder(MaeConfig config, ad::ParamStore params) : config_(config) {
  config_.validate();
  build(0);
  require(params.size() == params_.size(), Errc::config,
          [&] { return "checkpoint holds " + std::to_string(params.size()) + " tensors, model expects " +
              std::to_string(params_.size()); });
  for (auto& p : params_) {
    const ad::Parameter* src = params.find(p.name);
    require(src != nullptr, Errc::config, [&] { return "checkpoint lacks parameter " + p.name; });
    require(src->value.shape() == p.value.shape(), Errc::config,
            [&] { return "parameter " + p.name + " has shape " + ad::to_string(src->value.shape()) +
                ", expected " + ad::to_string(p.value.shape()); });
    p.value = src->value;
    p.trainable = src->trainable;
  }
}

std::unique_ptr<MaskedAutoencoder> MaskedAutoencoder::load(const std::filesystem::path& manifest) {
  json meta;
  ad::ParamStore store = ad::load_checkpoint(manifest, &meta);
  require(meta.contains("mae_config"), Errc::config,
          [&] { return manifest.string() + " is not a pre-trained model checkpoint"; });
  return std::make_unique<MaskedAutoencoder>(MaeConfig::from_json(meta.at("mae_config")),
                                             std::move(store));
}

void MaskedAutoencoder::save(const std::filesystem::path& manifest, json meta) const {
  meta["mae_config"] = config_.to_json();
  ad::save_checkpoint(params_, manifest, meta);
}

void MaskedAutoencoder::build(std::uint64_t seed) {
  Rng rng(seed);
  const double sd = config_.init_std;
  const auto grid = config_.sat_grid();
  const std::size_t ds = config_.sat_encoder.model_dim;
  const std::size_t de = config_.era5_encoder.model_dim;
  const std::size_t dd = config_.decoder.model_dim;

  auto make_encoder = [&](Encoder& enc, const char* group, const EncoderConfig& ec,
                          std::size_t patch, std::size_t channels) {
    const std::string g = group;
    enc.embed = nn::Linear::create(params_, g + ".embed", g, patch * patch * channels,
                                   ec.model_dim, sd, rng);
    for (std::size_t b = 0; b < ec.depth; ++b) {
      enc.blocks.push_back(nn::TransformerBlock::create(params_, g + ".block" + std::to_string(b),
                                                        g, ec.model_dim, ec.heads, ec.mlp_dim, sd,
                                                        rng));
    }
    enc.norm = nn::LayerNorm::create(params_, g + ".norm", g, ec.model_dim);
    enc.pos = nn::sincos_2d(grid.rows(), grid.cols(), ec.model_dim);
  };
  make_encoder(sat_, kSatEncoder, config_.sat_encoder, config_.sat_patch, data::kSatChannelCount);
  make_encoder(era5_, kEra5Encoder, config_.era5_encoder, config_.era5_patch,
               data::kEra5ChannelCount);

  fusion_ = nn::Linear::create(params_, "fusion", kFusion, ds + de, dd, sd, rng);
  cond1_ = nn::Linear::create(params_, "cond.fc1", kCondEncoder, data::kAttCount,
                              config_.cond_hidden, sd, rng);
  cond2_ = nn::Linear::create(params_, "cond.fc2", kCondEncoder, config_.cond_hidden, dd, sd, rng);
  mask_token_ = &params_.add("mask_token", kMaskToken, ad::normal_tensor({1, dd}, sd, rng));
  for (std::size_t b = 0; b < config_.decoder.depth; ++b) {
    decoder_.push_back(nn::TransformerBlock::create(params_, "decoder.block" + std::to_string(b),
                                                    kDecoder, dd, config_.decoder.heads,
                                                    config_.decoder.mlp_dim, sd, rng));
  }
  decoder_norm_ = nn::LayerNorm::create(params_, "decoder.norm", kDecoder, dd);
  sat_head_ = nn::Linear::create(params_, "sat_head", kSatHead, dd,
                                 config_.sat_patch * config_.sat_patch * data::kSatChannelCount,
                                 sd, rng);
  era5_head_ = nn::Linear::create(params_, "era5_head", kEra5Head, dd,
                                  config_.era5_patch * config_.era5_patch * data::kEra5ChannelCount,
                                  sd, rng);

  const std::size_t n = grid.count();
  dec_pos_ = Tensor({n + 1, dd});
  const Tensor table = nn::sincos_2d(grid.rows(), grid.cols(), dd);
  std::copy(table.values().begin(), table.values().end(), dec_pos_.values().begin() + dd);
}

Var MaskedAutoencoder::encode(ad::Graph& g, const Encoder& enc, Var patches,
                              std::span<const std::size_t> visible) const {
  const std::size_t n = config_.patch_count();
  require(patches.shape().size() == 2 && patches.shape()[0] == n, Errc::contract,
          [&] { return "expected " + std::to_string(n) + " patches, got " + ad::to_string(patches.shape()); });
  require(!visible.empty(), Errc::contract, "encoder needs at least one visible patch");
  for (std::size_t v : visible) {
    require(v < n, Errc::contract, [&] { return "visible index " + std::to_string(v) + " outside the lattice"; });
  }
  Var x = enc.embed(g, ad::gather_rows(patches, visible));
  x = ad::add(x, ad::gather_rows(g.constant(enc.pos), visible));
  for (const auto& block : enc.blocks) x = block(g, x);
  return enc.norm(g, x);
}

Var MaskedAutoencoder::encode_sat(ad::Graph& g, Var patches, std::span<const std::size_t> visible) const {
  return encode(g, sat_, patches, visible);
}

Var MaskedAutoencoder::encode_era5(ad::Graph& g, Var patches, std::span<const std::size_t> visible) const {
  return encode(g, era5_, patches, visible);
}

Var MaskedAutoencoder::fuse(ad::Graph& g, Var sat_tokens, Var era5_tokens) const {
  require(sat_tokens.shape()[0] == era5_tokens.shape()[0], Errc::contract,
          [&] { return "fusion needs equal token counts, got " + ad::to_string(sat_tokens.shape()) + " and " +
              ad::to_string(era5_tokens.shape()); });
  return fusion_(g, ad::concat({sat_tokens, era5_tokens}, 1));
}

Var MaskedAutoencoder::condition(ad::Graph& g, Var att) const {
  require(att.shape() == ad::Shape{1, data::kAttCount}, Errc::contract,
          [&] { return "conditioning input must be [1x4], got " + ad::to_string(att.shape()); });
  return cond2_(g, ad::gelu(cond1_(g, att)));
}

Var MaskedAutoencoder::decode(ad::Graph& g, Var fused, Var cond,
                              const mask::MaskPartition& partition) const {
  const std::size_t n = config_.patch_count();
  require(partition.size() == n, Errc::contract,
          [&] { return "partition covers " + std::to_string(partition.size()) + " patches, lattice has " +
              std::to_string(n); });
  require(fused.shape()[0] == partition.visible.size(), Errc::contract,
          "fused token count differs from the visible set");
  // Row k < |V| of the stacked table is the k-th visible token; row |V| is the
  // mask token.
  const std::size_t mask_row = partition.visible.size();
  std::vector<std::size_t> arrange(n, mask_row);
  for (std::size_t k = 0; k < partition.visible.size(); ++k) arrange[partition.visible[k]] = k;

  Var table = partition.masked.empty() ? fused : ad::concat({fused, g.param(*mask_token_)}, 0);
  Var arranged = ad::gather_rows(table, arrange);
  Var x = ad::add(ad::concat({cond, arranged}, 0), g.constant(dec_pos_));
  for (const auto& block : decoder_) x = block(g, x);
  x = decoder_norm_(g, x);
  return ad::slice(x, 0, 1, n);
}

Reconstruction MaskedAutoencoder::reconstruct(ad::Graph& g, Var sat_field, Var era5_field, Var att,
                                              const mask::MaskPartition& partition) const {
  Var sat_patches = mask::patchify(sat_field, config_.sat_grid());
  Var era5_patches = mask::patchify(era5_field, config_.era5_grid());
  Var fs = encode_sat(g, sat_patches, partition.visible);
  Var fe = encode_era5(g, era5_patches, partition.visible);
  Var tokens = decode(g, fuse(g, fs, fe), condition(g, att), partition);
  return {sat_head_(g, tokens), era5_head_(g, tokens)};
}

Var MaskedAutoencoder::features(ad::Graph& g, Var sat_field, Var era5_field, Var att) const {
  const auto all = mask::MaskPartition::all_visible(config_.patch_count());
  Var fs = encode_sat(g, mask::patchify(sat_field, config_.sat_grid()), all.visible);
  Var fe = encode_era5(g, mask::patchify(era5_field, config_.era5_grid()), all.visible);
  return ad::concat({ad::mean_axis(fs, 0), ad::mean_axis(fe, 0), condition(g, att)}, 1);
}

std::size_t MaskedAutoencoder::feature_width() const noexcept {
  return config_.sat_encoder.model_dim + config_.era5_encoder.model_dim + config_.decoder.model_dim;
}

Var recon_loss(const Reconstruction& pred, const Tensor& sat_target, const Tensor& era5_target,
               std::span<const std::size_t> masked) {
  require(!masked.empty(), Errc::contract, "reconstruction loss needs at least one masked patch");
  require(pred.sat.shape() == sat_target.shape() && pred.era5.shape() == era5_target.shape(),
          Errc::contract, "reconstruction and target shapes differ");
  ad::Graph& g = *pred.sat.graph;
  auto masked_rows = [&](const Tensor& t) {
    const std::size_t d = t.dim(1);
    Tensor out({masked.size(), d});
    for (std::size_t r = 0; r < masked.size(); ++r) {
      std::copy_n(t.values().data() + masked[r] * d, d, out.values().data() + r * d);
    }
    return out;
  };
  Var ds = ad::sub(ad::gather_rows(pred.sat, masked), g.constant(masked_rows(sat_target)));
  Var de = ad::sub(ad::gather_rows(pred.era5, masked), g.constant(masked_rows(era5_target)));
  Var total = ad::add(ad::sum(ad::mul(ds, ds)), ad::sum(ad::mul(de, de)));
  return ad::scale(total, 1.0 / double(masked.size()));
}

}  // namespace cyclone::mae
