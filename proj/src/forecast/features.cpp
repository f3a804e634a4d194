#include "cyclone/forecast/features.hpp"

#include <algorithm>
#include <cctype>

#include "cyclone/error.hpp"

namespace cyclone::forecast {

std::string_view variable_name(Variable v) noexcept {
  switch (v) {
    case Variable::msw: return "MSW";
    case Variable::mslp: return "MSLP";
    case Variable::track: return "Track";
  }
  return "?";
}

Variable parse_variable(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  if (lower == "msw") return Variable::msw;
  if (lower == "mslp") return Variable::mslp;
  if (lower == "track") return Variable::track;
  fail(Errc::config, "unknown forecast variable '" + std::string(name) + "' (expected MSW, MSLP or Track)");
}

ad::Tensor conditioning_row(const data::Attributes& att, Variable v) {
  ad::Tensor row({1, data::kAttCount});
  switch (v) {
    case Variable::msw: row[data::kMsw] = att[data::kMsw]; break;
    case Variable::mslp: row[data::kMslp] = att[data::kMslp]; break;
    case Variable::track:
      row[data::kLat] = att[data::kLat];
      row[data::kLon] = att[data::kLon];
      break;
  }
  return row;
}

ad::Var featurize_step(ad::Graph& g, const mae::MaskedAutoencoder& encoder, ad::Var sat,
                       ad::Var era5, const ad::Tensor& cond_row) {
  return encoder.features(g, sat, era5, g.constant(cond_row));
}

ad::Tensor featurize_step(const mae::MaskedAutoencoder& encoder, const data::TCSample& sample,
                          const data::NormStats& stats, Variable v) {
  const data::TCSample z = data::zscore(sample, stats);
  ad::Graph g(false);
  return featurize_step(g, encoder, g.constant(z.sat), g.constant(z.era5),
                        conditioning_row(z.att, v))
      .value();
}

FeatureTable featurize(const mae::MaskedAutoencoder& encoder,
                       std::span<const data::CycloneRecord> records, const data::NormStats& stats,
                       Variable v) {
  FeatureTable table;
  table.width = encoder.feature_width();
  for (const auto& rec : records) {
    auto& rows = table.rows.emplace_back();
    rows.reserve(rec.samples.size());
    for (const auto& s : rec.samples) rows.push_back(featurize_step(encoder, s, stats, v));
  }
  return table;
}

}  // namespace cyclone::forecast
