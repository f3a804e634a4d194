#include "cyclone/attribution/ig.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "cyclone/autodiff/ops.hpp"
#include "cyclone/error.hpp"
#include "cyclone/forecast/features.hpp"
#include "cyclone/threads.hpp"

namespace cyclone::attribution {

using ad::Tensor;
using ad::Var;

namespace {

// Path points per reduction block. Fixed so that the summation order is the
// same for every thread count.
constexpr std::size_t kBlock = 8;

double evaluate(const Functional& f, std::span<const Tensor> xs) {
  ad::Graph g(false);
  std::vector<Var> vars;
  for (const auto& x : xs) vars.push_back(g.constant(x));
  return f(g, vars).value().item();
}

// Sum of gradients over path points [begin, end).
std::vector<Tensor> block_gradient(const Functional& f, std::span<const Tensor> input,
                                   std::span<const Tensor> baseline, std::size_t steps,
                                   std::size_t begin, std::size_t end) {
  std::vector<Tensor> sum;
  for (const auto& x : input) sum.emplace_back(x.shape());
  for (std::size_t k = begin; k < end; ++k) {
    const double alpha = (double(k) + 0.5) / double(steps);
    ad::Graph g(false);
    std::vector<Var> vars;
    for (std::size_t t = 0; t < input.size(); ++t) {
      Tensor point(input[t].shape());
      for (std::size_t i = 0; i < point.size(); ++i)
        point[i] = baseline[t][i] + alpha * (input[t][i] - baseline[t][i]);
      vars.push_back(g.input(std::move(point)));
    }
    Var out = f(g, vars);
    require(out.value().size() == 1, Errc::contract, "attribution target must be a scalar");
    g.backward(out);
    for (std::size_t t = 0; t < input.size(); ++t) {
      const Tensor* grad = g.grad(vars[t]);
      if (grad == nullptr) continue;
      require(grad->all_finite(), Errc::non_finite, [&] {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g", alpha);
        return std::string("non-finite gradient on the integration path at alpha=") + buf;
      });
      for (std::size_t i = 0; i < grad->size(); ++i) sum[t][i] += (*grad)[i];
    }
  }
  return sum;
}

}  // namespace

IgResult integrated_gradients(const Functional& f, std::span<const Tensor> input,
                              std::span<const Tensor> baseline, std::size_t steps) {
  require(steps >= 1, Errc::config, "integrated gradients needs at least one step");
  require(input.size() == baseline.size(), Errc::contract, "baseline and input counts differ");
  for (std::size_t t = 0; t < input.size(); ++t) {
    require(input[t].shape() == baseline[t].shape(), Errc::contract, [&] {
      return "baseline shape " + ad::to_string(baseline[t].shape()) + " differs from input " +
             ad::to_string(input[t].shape());
    });
  }

  const std::size_t blocks = (steps + kBlock - 1) / kBlock;
  std::vector<std::vector<Tensor>> partial(blocks);
  const std::size_t workers = std::min(worker_threads(), blocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b)
      partial[b] = block_gradient(f, input, baseline, steps, b * kBlock, std::min(steps, (b + 1) * kBlock));
  } else {
    std::exception_ptr failure;
    std::mutex lock;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < blocks; b += workers) {
          try {
            partial[b] = block_gradient(f, input, baseline, steps, b * kBlock,
                                        std::min(steps, (b + 1) * kBlock));
          } catch (...) {
            std::lock_guard<std::mutex> g(lock);
            if (!failure) failure = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  IgResult result;
  double total = 0.0;
  for (std::size_t t = 0; t < input.size(); ++t) {
    Tensor attr(input[t].shape());
    for (std::size_t i = 0; i < attr.size(); ++i) {
      double g = 0.0;
      for (std::size_t b = 0; b < blocks; ++b) g += partial[b][t][i];
      attr[i] = (input[t][i] - baseline[t][i]) * g / double(steps);
      total += attr[i];
    }
    result.attributions.push_back(std::move(attr));
  }
  result.f_input = evaluate(f, input);
  result.f_baseline = evaluate(f, baseline);
  result.residual = std::abs(total - (result.f_input - result.f_baseline));
  return result;
}

std::string_view predictor_name(std::size_t index) {
  constexpr std::string_view names[kPredictors] = {"IR",   "WV",   "Z850", "Z200", "T850", "T200",
                                                   "Q850", "Q200", "U850", "U200", "V850", "V200",
                                                   "U10",  "V10",  "T2M",  "MSL"};
  require(index < kPredictors, Errc::contract, "predictor index out of range");
  return names[index];
}

std::string_view predictor_group(std::size_t index) {
  if (index < 2) return "satellite";
  require(index < kPredictors, Errc::contract, "predictor index out of range");
  if (index >= 12) return "surface";
  return index % 2 == 0 ? "850 hPa" : "200 hPa";
}

std::vector<ChannelMass> channel_masses(std::span<const Tensor> sat, std::span<const Tensor> era5) {
  std::vector<ChannelMass> out;
  for (auto name : data::kSatChannels) out.push_back({std::string(name), 0.0});
  for (auto name : data::kEra5Channels) out.push_back({std::string(name), 0.0});
  auto add = [&](std::span<const Tensor> fields, std::size_t channels, std::size_t offset) {
    for (const auto& t : fields) {
      require(t.rank() == 3 && t.dim(2) == channels, Errc::contract, [&] {
        return "attribution field has shape " + ad::to_string(t.shape()) + ", expected " +
               std::to_string(channels) + " channels";
      });
      for (std::size_t i = 0; i < t.size(); ++i) out[offset + i % channels].mass += std::abs(t[i]);
    }
  };
  add(sat, data::kSatChannelCount, 0);
  add(era5, data::kEra5ChannelCount, data::kSatChannelCount);
  return out;
}

std::vector<PredictorWeight> group_and_normalize(std::span<const ChannelMass> masses) {
  std::array<double, kPredictors> mass{};
  for (const auto& m : masses) {
    std::size_t index = kPredictors;
    for (std::size_t i = 0; i < kPredictors; ++i) {
      const std::string_view name =
          i < data::kSatChannelCount ? data::kSatChannels[i] : data::kEra5Channels[i - data::kSatChannelCount];
      if (name == m.channel) index = i;
    }
    require(index < kPredictors, Errc::contract,
            [&] { return "channel '" + m.channel + "' does not map to a predictor"; });
    require(m.mass >= 0.0 && std::isfinite(m.mass), Errc::contract,
            [&] { return "attribution mass of '" + m.channel + "' must be finite and non-negative"; });
    mass[index] += m.mass;
  }
  double total = 0.0;
  for (double m : mass) total += m;
  require(total > 0.0, Errc::degenerate, "all attributions are zero; relative weights are undefined");
  std::vector<PredictorWeight> out;
  for (std::size_t i = 0; i < kPredictors; ++i) {
    out.push_back({std::string(predictor_name(i)), std::string(predictor_group(i)), mass[i] / total});
  }
  return out;
}

void AttributionConfig::validate() const {
  require(steps >= 2, Errc::config, "attribution.steps must be at least 2");
}

WindowInput window_input(const data::CycloneRecord& record, std::size_t t0,
                         const data::NormStats& stats, forecast::Variable v) {
  require(t0 + 1 >= forecast::kWindow && t0 < record.samples.size(), Errc::contract,
          [&] { return "origin index " + std::to_string(t0) + " has no full 5-step window"; });
  WindowInput w;
  for (std::size_t k = t0 + 1 - forecast::kWindow; k <= t0; ++k) {
    const data::TCSample z = data::zscore(record.samples[k], stats);
    w.sat.push_back(z.sat);
    w.era5.push_back(z.era5);
    w.cond.push_back(forecast::conditioning_row(z.att, v));
  }
  return w;
}

std::vector<HeadAttribution> attribute(const mae::MaskedAutoencoder& encoder,
                                       const forecast::ForecastModel& model,
                                       const WindowInput& window, const AttributionConfig& config) {
  config.validate();
  require(window.sat.size() == forecast::kWindow && window.era5.size() == forecast::kWindow &&
              window.cond.size() == forecast::kWindow,
          Errc::contract, "attribution window must hold 5 steps");
  std::vector<Tensor> input(window.sat);
  input.insert(input.end(), window.era5.begin(), window.era5.end());
  std::vector<Tensor> baseline;
  for (const auto& x : input) baseline.emplace_back(x.shape());

  const forecast::Variable v = model.arch().variable;
  // Expectation of one softmax block of head h over the given centres.
  auto functional = [&](std::size_t h, std::size_t offset, std::size_t width,
                        std::vector<double> centers) -> Functional {
    return [&, h, offset, width, centers = std::move(centers)](ad::Graph& g, std::span<const Var> xs) {
      std::vector<Var> steps;
      for (std::size_t k = 0; k < forecast::kWindow; ++k) {
        steps.push_back(forecast::featurize_step(g, encoder, xs[k], xs[forecast::kWindow + k], window.cond[k]));
      }
      Var logits = model.forward(g, steps)[h];
      Var p = ad::softmax(ad::slice(logits, 1, offset, width));
      return ad::matmul(p, g.constant(Tensor({width, 1}, centers)));
    };
  };

  std::vector<HeadAttribution> out;
  const auto& heads = model.heads();
  for (std::size_t h = 0; h < heads.size(); ++h) {
    std::vector<Functional> targets;
    if (v == forecast::Variable::track) {
      const auto& spec = heads[h].track;
      targets.push_back(functional(h, 0, spec.lat.k, spec.lat.centers()));
      targets.push_back(functional(h, spec.lat.k, spec.lon.k, spec.lon.centers()));
    } else {
      targets.push_back(functional(h, 0, heads[h].scalar.k, heads[h].scalar.centers()));
    }
    std::vector<Tensor> combined;
    HeadAttribution ha;
    ha.lead = heads[h].lead;
    double worst = -1.0;
    for (const auto& f : targets) {
      IgResult r = integrated_gradients(f, input, baseline, config.steps);
      const double delta = std::abs(r.f_input - r.f_baseline);
      const double rel = delta > 0.0 ? r.residual / delta : r.residual;
      if (rel > worst) {
        worst = rel;
        ha.residual = r.residual;
        ha.delta = delta;
      }
      if (combined.empty()) {
        combined = std::move(r.attributions);
        for (auto& t : combined)
          for (auto& x : t.values()) x = std::abs(x);
      } else {
        for (std::size_t t = 0; t < combined.size(); ++t)
          for (std::size_t i = 0; i < combined[t].size(); ++i) combined[t][i] += std::abs(r.attributions[t][i]);
      }
    }
    const std::span<const Tensor> all(combined);
    ha.masses = channel_masses(all.subspan(0, forecast::kWindow), all.subspan(forecast::kWindow));
    ha.weights = group_and_normalize(ha.masses);
    out.push_back(std::move(ha));
  }
  return out;
}

std::string attribution_csv(std::string_view variable, std::span<const HeadAttribution> heads,
                            std::size_t steps) {
  std::string out =
      "# target: decoded expectation of each lead's head (Track: latitude and longitude displacement, "
      "absolute attributions added)\n"
      "# baseline: channel-mean fields (zero after normalisation); midpoint rule, steps=" +
      std::to_string(steps) + "\n# weights: |attribution| summed over pixels and the 5 window steps, normalised per lead\n"
      "variable,lead,predictor,group,relative_weight\n";
  for (const auto& h : heads) {
    for (const auto& w : h.weights) {
      char buf[32];
      const auto res = std::to_chars(buf, buf + sizeof buf, w.weight);
      out += std::string(variable) + "," + std::to_string(h.lead) + "," + w.predictor + "," + w.group + "," +
             std::string(buf, res.ptr) + "\n";
    }
  }
  return out;
}

}  // namespace cyclone::attribution
