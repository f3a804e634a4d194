#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cyclone/autodiff/graph.hpp"
#include "cyclone/forecast/model.hpp"
#include "cyclone/mae/model.hpp"

namespace cyclone::attribution {

// Scalar-valued differentiable function of one or more input tensors.
using Functional = std::function<ad::Var(ad::Graph&, std::span<const ad::Var>)>;

struct IgResult {
  std::vector<ad::Tensor> attributions;  // same shapes as the inputs
  double f_input = 0.0;
  double f_baseline = 0.0;
  double residual = 0.0;  // |sum(attributions) - (f_input - f_baseline)|
};

// Integrated gradients with the midpoint Riemann rule over `steps` points
// alpha_k = (k + 0.5) / steps. Path points are evaluated by up to
// worker_threads() threads; partial sums are reduced in fixed blocks so the
// result does not depend on the thread count. A non-finite gradient aborts
// with a non-finite error naming alpha.
IgResult integrated_gradients(const Functional& f, std::span<const ad::Tensor> input,
                              std::span<const ad::Tensor> baseline, std::size_t steps);

inline constexpr std::size_t kPredictors = 16;

// IR, WV, then the environmental channels in file order.
std::string_view predictor_name(std::size_t index);
// "satellite", "surface", "850 hPa" or "200 hPa".
std::string_view predictor_group(std::size_t index);

struct ChannelMass {
  std::string channel;  // lower-case channel name, e.g. "ir", "z850"
  double mass = 0.0;    // sum of |attribution| over pixels and steps
};

struct PredictorWeight {
  std::string predictor;
  std::string group;
  double weight = 0.0;
};

// Absolute attribution mass per channel of a window's sat [.. x 2] and
// era5 [.. x 14] attribution tensors.
std::vector<ChannelMass> channel_masses(std::span<const ad::Tensor> sat,
                                        std::span<const ad::Tensor> era5);

// Relative weights of the 16 predictors, summing to one. An unknown channel is
// a contract error; zero total mass is degenerate.
std::vector<PredictorWeight> group_and_normalize(std::span<const ChannelMass> masses);

struct AttributionConfig {
  std::size_t steps = 64;  // at least 2

  void validate() const;
};

// Normalised inputs of one forecast window.
struct WindowInput {
  std::vector<ad::Tensor> sat;   // 5 x [H x W x 2]
  std::vector<ad::Tensor> era5;  // 5 x [H x W x 14]
  std::vector<ad::Tensor> cond;  // 5 x [1 x 4], held fixed along the path
};

WindowInput window_input(const data::CycloneRecord& record, std::size_t t0,
                         const data::NormStats& stats, forecast::Variable v);

struct HeadAttribution {
  int lead = 0;
  std::vector<ChannelMass> masses;  // raw, for pooling over several windows
  std::vector<PredictorWeight> weights;
  double residual = 0.0;  // worst completeness residual of the head's functionals
  double delta = 0.0;     // |F(x) - F(x')| of that functional
};

// Attributes the decoded expectation of every head to the input fields over
// the full window, against the channel-mean baseline (zero in normalised
// space). Track heads attribute the latitude and longitude displacement
// expectations separately and add their absolute attributions.
std::vector<HeadAttribution> attribute(const mae::MaskedAutoencoder& encoder,
                                       const forecast::ForecastModel& model,
                                       const WindowInput& window, const AttributionConfig& config);

// variable,lead,predictor,group,relative_weight with a leading comment block
// naming the target functional, baseline and step count.
std::string attribution_csv(std::string_view variable, std::span<const HeadAttribution> heads,
                            std::size_t steps);

}  // namespace cyclone::attribution
