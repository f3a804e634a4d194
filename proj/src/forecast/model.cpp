#include "cyclone/forecast/model.hpp"

#include <cmath>

#include "cyclone/autodiff/checkpoint.hpp"
#include "cyclone/autodiff/ops.hpp"
#include "cyclone/error.hpp"

namespace cyclone::forecast {

using ad::Tensor;
using ad::Var;
using nlohmann::json;

namespace {

constexpr const char* kSequenceGroup = "sequence";

std::string head_group(int lead) { return "head_" + std::to_string(lead) + "h"; }

json heads_to_json(const std::vector<HeadSpec>& heads, Variable v) {
  json out = json::array();
  for (const auto& h : heads) {
    json j = {{"lead", h.lead}};
    if (v == Variable::track) {
      j["track"] = h.track.to_json();
    } else {
      j["bins"] = h.scalar.to_json();
    }
    out.push_back(j);
  }
  return out;
}

std::vector<HeadSpec> heads_from_json(const json& j, Variable v) {
  std::vector<HeadSpec> out;
  for (const auto& h : j) {
    HeadSpec s;
    s.lead = h.at("lead");
    if (v == Variable::track) {
      s.track = grid::TrackBinSpec::from_json(h.at("track"));
    } else {
      s.scalar = grid::BinSpec::from_json(h.at("bins"));
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace

json arch_to_json(const ForecastArch& a) {
  return {{"variable", variable_name(a.variable)},
          {"feature_width", a.feature_width},
          {"hidden", a.hidden},
          {"layers", a.layers},
          {"head_hidden", a.head_hidden},
          {"sigma_bins", a.sigma_bins}};
}

ForecastArch arch_from_json(const json& j) {
  ForecastArch a;
  a.variable = parse_variable(j.at("variable").get<std::string>());
  a.feature_width = j.at("feature_width");
  a.hidden = j.at("hidden");
  a.layers = j.at("layers");
  a.head_hidden = j.at("head_hidden");
  a.sigma_bins = j.at("sigma_bins");
  return a;
}

ForecastModel::ForecastModel(ForecastArch arch, std::vector<HeadSpec> heads, FeatureNorm norm,
                             std::uint64_t seed)
    : arch_(arch), heads_(std::move(heads)), norm_(std::move(norm)) {
  build(seed);
}

ForecastModel::ForecastModel(ForecastArch arch, std::vector<HeadSpec> heads, FeatureNorm norm,
                             ad::ParamStore params)
    : arch_(arch), heads_(std::move(heads)), norm_(std::move(norm)) {
  build(0);
  for (auto& p : params_) {
    const ad::Parameter* src = params.find(p.name);
    require(src != nullptr && src->value.shape() == p.value.shape(), Errc::config,
            [&] { return "forecast checkpoint is missing or mis-shapes parameter " + p.name; });
    p.value = src->value;
  }
}

void ForecastModel::build(std::uint64_t seed) {
  require(!heads_.empty(), Errc::config, "a forecast model needs at least one lead");
  require(arch_.feature_width > 0 && arch_.hidden > 0 && arch_.layers > 0 && arch_.head_hidden > 0,
          Errc::config, "forecast widths and depth must be positive");
  require(arch_.sigma_bins > 0.0, Errc::config, "label smoothing sigma must be positive");
  require(norm_.mean.size() == arch_.feature_width && norm_.stddev.size() == arch_.feature_width,
          Errc::config, "feature normalisation has the wrong width");
  for (std::size_t i = 0; i < heads_.size(); ++i) {
    grid::regime_for_lead(heads_[i].lead);  // validates the lead
    for (std::size_t j = 0; j < i; ++j) {
      require(heads_[j].lead != heads_[i].lead, Errc::config, "duplicate forecast lead");
    }
  }

  Rng rng(seed);
  const std::size_t h = arch_.hidden;
  std::size_t in = arch_.feature_width;
  for (std::size_t l = 0; l < arch_.layers; ++l) {
    const std::string name = "lstm" + std::to_string(l);
    LstmLayer layer;
    layer.input = nn::Linear::create(params_, name + ".x", kSequenceGroup, in, 4 * h,
                                     1.0 / std::sqrt(double(in)), rng);
    layer.hidden = nn::Linear::create(params_, name + ".h", kSequenceGroup, h, 4 * h,
                                      1.0 / std::sqrt(double(h)), rng);
    // Forget-gate bias starts at one so early gradients pass through time.
    for (std::size_t k = h; k < 2 * h; ++k) layer.input.bias->value[k] = 1.0;
    lstm_.push_back(layer);
    in = h;
  }
  for (const auto& spec : heads_) {
    const std::string g = head_group(spec.lead);
    Head head;
    head.fc1 = nn::Linear::create(params_, g + ".fc1", g, h, arch_.head_hidden,
                                  1.0 / std::sqrt(double(h)), rng);
    head.fc2 = nn::Linear::create(params_, g + ".fc2", g, arch_.head_hidden,
                                  spec.width(arch_.variable),
                                  1.0 / std::sqrt(double(arch_.head_hidden)), rng);
    head_layers_.push_back(head);
  }

  const std::size_t f = arch_.feature_width;
  norm_scale_ = Tensor({f});
  norm_shift_ = Tensor({f});
  for (std::size_t i = 0; i < f; ++i) {
    const double sd = norm_.stddev[i] > 0.0 ? norm_.stddev[i] : 1.0;
    norm_scale_[i] = 1.0 / sd;
    norm_shift_[i] = -norm_.mean[i] / sd;
  }
}

std::unique_ptr<ForecastModel> ForecastModel::load(const std::filesystem::path& manifest,
                                                   json* meta_out) {
  json meta;
  ad::ParamStore store = ad::load_checkpoint(manifest, &meta);
  require(meta.contains("forecast_arch"), Errc::config,
          manifest.string() + " is not a fine-tuned forecast checkpoint");
  const ForecastArch arch = arch_from_json(meta.at("forecast_arch"));
  FeatureNorm norm{meta.at("feature_norm").at("mean").get<std::vector<double>>(),
                   meta.at("feature_norm").at("std").get<std::vector<double>>()};
  auto model = std::make_unique<ForecastModel>(arch, heads_from_json(meta.at("heads"), arch.variable),
                                               std::move(norm), std::move(store));
  if (meta_out != nullptr) *meta_out = std::move(meta);
  return model;
}

void ForecastModel::save(const std::filesystem::path& manifest, json meta) const {
  meta["forecast_arch"] = arch_to_json(arch_);
  meta["heads"] = heads_to_json(heads_, arch_.variable);
  meta["feature_norm"] = {{"mean", norm_.mean}, {"std", norm_.stddev}};
  ad::save_checkpoint(params_, manifest, meta);
}

Var ForecastModel::normalize(ad::Graph& g, Var features) const {
  const std::size_t b = features.shape()[0];
  Tensor scale({b, arch_.feature_width});
  for (std::size_t r = 0; r < b; ++r) {
    std::copy(norm_scale_.values().begin(), norm_scale_.values().end(),
              scale.values().begin() + r * arch_.feature_width);
  }
  return ad::add_bias(ad::mul(features, g.constant(std::move(scale))), g.constant(norm_shift_));
}

std::vector<Var> ForecastModel::forward(ad::Graph& g, std::span<const Var> steps) const {
  require(steps.size() == kWindow, Errc::contract,
          [&] { return "forecast window must hold 5 steps, got " + std::to_string(steps.size()); });
  const std::size_t b = steps[0].shape()[0];
  for (const Var& s : steps) {
    require(s.shape() == ad::Shape{b, arch_.feature_width}, Errc::contract,
            [&] { return "window step has shape " + ad::to_string(s.shape()) + ", expected [" +
                         std::to_string(b) + "x" + std::to_string(arch_.feature_width) + "]"; });
  }
  forward_count_.fetch_add(1);

  const std::size_t h = arch_.hidden;
  std::vector<Var> seq;
  for (const Var& s : steps) seq.push_back(normalize(g, s));
  for (const auto& layer : lstm_) {
    Var hs = g.constant(Tensor({b, h}));
    Var cs = g.constant(Tensor({b, h}));
    std::vector<Var> out;
    for (const Var& x : seq) {
      Var gates = ad::add(layer.input(g, x), ad::matmul(hs, g.param(*layer.hidden.weight)));
      Var i = ad::sigmoid(ad::slice(gates, 1, 0, h));
      Var f = ad::sigmoid(ad::slice(gates, 1, h, h));
      Var c = ad::tanh(ad::slice(gates, 1, 2 * h, h));
      Var o = ad::sigmoid(ad::slice(gates, 1, 3 * h, h));
      cs = ad::add(ad::mul(f, cs), ad::mul(i, c));
      hs = ad::mul(o, ad::tanh(cs));
      out.push_back(hs);
    }
    seq = std::move(out);
  }
  const Var last = seq.back();
  std::vector<Var> logits;
  for (const auto& head : head_layers_) logits.push_back(head.fc2(g, ad::gelu(head.fc1(g, last))));
  return logits;
}

std::vector<std::vector<double>> ForecastModel::probabilities(std::span<const Tensor> window) const {
  ad::Graph g(false);
  std::vector<Var> steps;
  for (const auto& t : window) steps.push_back(g.constant(t));
  const auto logits = forward(g, steps);
  std::vector<std::vector<double>> out;
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    if (arch_.variable == Variable::track) {
      const std::size_t m = heads_[k].track.lat.k;
      const Tensor lat = ad::softmax(ad::slice(logits[k], 1, 0, m)).value();
      const Tensor lon = ad::softmax(ad::slice(logits[k], 1, m, heads_[k].track.lon.k)).value();
      std::vector<double> p(lat.values().begin(), lat.values().end());
      p.insert(p.end(), lon.values().begin(), lon.values().end());
      out.push_back(std::move(p));
    } else {
      const Tensor p = ad::softmax(logits[k]).value();
      out.emplace_back(p.values().begin(), p.values().end());
    }
  }
  return out;
}

LeadForecast decode_head(const HeadSpec& head, Variable v, std::span<const double> probs,
                         double lat0, double lon0,
                         std::span<const std::pair<double, double>> quantiles) {
  LeadForecast f;
  f.lead = head.lead;
  if (v == Variable::track) {
    const std::size_t m = head.track.lat.k;
    f.probs.assign(probs.begin(), probs.begin() + std::ptrdiff_t(m));
    f.probs_lon.assign(probs.begin() + std::ptrdiff_t(m), probs.end());
    const double dlat = grid::expect_decode(f.probs, head.track.lat);
    const double dlon = grid::expect_decode(f.probs_lon, head.track.lon);
    const grid::Position p = grid::apply_displacement(lat0, lon0, dlat, dlon);
    f.lat = p.lat;
    f.lon = p.lon;
    f.clamped = p.clamped;
    // Interval bounds are offsets from the origin and stay unwrapped so that
    // lo <= hi holds across the dateline.
    for (const auto& [lo, hi] : quantiles) {
      const auto a = grid::interval(f.probs, head.track.lat, lo, hi);
      const auto b = grid::interval(f.probs_lon, head.track.lon, lo, hi);
      f.intervals.push_back({lo, hi, lat0 + a.first, lat0 + a.second});
      f.intervals_lon.push_back({lo, hi, lon0 + b.first, lon0 + b.second});
    }
  } else {
    f.probs.assign(probs.begin(), probs.end());
    f.value = grid::expect_decode(f.probs, head.scalar);
    for (const auto& [lo, hi] : quantiles) {
      const auto a = grid::interval(f.probs, head.scalar, lo, hi);
      f.intervals.push_back({lo, hi, a.first, a.second});
    }
  }
  return f;
}

std::vector<LeadForecast> ForecastModel::predict(std::span<const Tensor> window, double lat0,
                                                 double lon0,
                                                 std::span<const std::pair<double, double>> quantiles) const {
  const auto probs = probabilities(window);
  std::vector<LeadForecast> out;
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    out.push_back(decode_head(heads_[k], arch_.variable, probs[k], lat0, lon0, quantiles));
  }
  return out;
}

}  // namespace cyclone::forecast
