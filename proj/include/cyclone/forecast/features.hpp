#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "cyclone/data/preprocess.hpp"
#include "cyclone/mae/model.hpp"

namespace cyclone::forecast {

enum class Variable { msw, mslp, track };

std::string_view variable_name(Variable v) noexcept;  // "MSW", "MSLP", "Track"
Variable parse_variable(std::string_view name);       // case-insensitive

// Conditioning input for fine-tuning: the z-scored att row with every
// component except the forecast variable's own history zeroed.
ad::Tensor conditioning_row(const data::Attributes& normalized_att, Variable v);

// Per-step fused features of every sample of every cyclone, computed once with
// the frozen encoders: table[c][k] is [1 x feature_width].
struct FeatureTable {
  std::vector<std::vector<ad::Tensor>> rows;
  std::size_t width = 0;
};

ad::Tensor featurize_step(const mae::MaskedAutoencoder& encoder, const data::TCSample& sample,
                          const data::NormStats& stats, Variable v);

FeatureTable featurize(const mae::MaskedAutoencoder& encoder,
                       std::span<const data::CycloneRecord> records, const data::NormStats& stats,
                       Variable v);

// Differentiable version on in-graph normalised fields (used by attribution).
ad::Var featurize_step(ad::Graph& g, const mae::MaskedAutoencoder& encoder, ad::Var sat,
                       ad::Var era5, const ad::Tensor& cond_row);

}  // namespace cyclone::forecast
