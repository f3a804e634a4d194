#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "cyclone/attribution/ig.hpp"
#include "cyclone/autodiff/ops.hpp"
#include "cyclone/error.hpp"
#include "cyclone/forecast/train.hpp"
#include "support/gradcheck.hpp"
#include "support/toy.hpp"

using namespace cyclone;
using namespace cyclone::attribution;
using ad::Tensor;
using ad::Var;
using testing::random_tensor;

namespace {

template <typename Fn>
Errc error_code(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::contract;
}

// Smooth nonlinear functional of two inputs.
ad::Var smooth(ad::Graph&, std::span<const Var> xs) {
  Var a = ad::tanh(ad::scale(xs[0], 0.8));
  Var b = ad::sigmoid(xs[1]);
  return ad::add(ad::sum(ad::mul(a, a)), ad::sum(ad::scale(ad::mul(b, xs[1]), 0.5)));
}

std::vector<ChannelMass> uniform_masses(double m) {
  std::vector<ChannelMass> out;
  for (auto n : data::kSatChannels) out.push_back({std::string(n), m});
  for (auto n : data::kEra5Channels) out.push_back({std::string(n), m});
  return out;
}

struct ToyForecast {
  std::vector<data::CycloneRecord> records = data::synth_dataset(testing::tiny_dataset_config(3), 5);
  data::NormStats stats = data::fit_stats(std::span<const data::CycloneRecord>(records));
  mae::MaskedAutoencoder encoder{testing::tiny_mae_config(), 5};
  std::unique_ptr<forecast::ForecastModel> model;

  explicit ToyForecast(forecast::Variable v, std::vector<int> leads = {6}) {
    forecast::FinetuneConfig cfg;
    cfg.arch.variable = v;
    cfg.arch.hidden = 8;
    cfg.arch.head_hidden = 8;
    cfg.epochs = 2;
    cfg.bins = 32;
    cfg.track_bins = 16;
    cfg.leads = std::move(leads);
    model = forecast::finetune(encoder, records, stats, cfg, 9);
  }

  WindowInput window() const { return window_input(records[0], 8, stats, model->arch().variable); }
};

}  // namespace

TEST_CASE("linear functional: attribution equals w * x for any step count") {
  Rng rng(1);
  const Tensor w = random_tensor({3, 4}, rng);
  const Tensor x = random_tensor({3, 4}, rng);
  const Functional f = [&](ad::Graph& g, std::span<const Var> xs) {
    return ad::sum(ad::mul(xs[0], g.constant(w)));
  };
  for (std::size_t steps : {1, 2, 7, 64}) {
    const IgResult r = integrated_gradients(f, std::vector<Tensor>{x}, std::vector<Tensor>{Tensor({3, 4})}, steps);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(r.attributions[0][i] - w[i] * x[i]) < 1e-10);
    CHECK(r.residual < 1e-10);
  }
}

TEST_CASE("input equal to the baseline gets zero attribution") {
  Rng rng(2);
  const std::vector<Tensor> x{random_tensor({5}, rng), random_tensor({2, 3}, rng)};
  const IgResult r = integrated_gradients(smooth, x, x, 16);
  for (const auto& t : r.attributions)
    for (double a : t.values()) CHECK(a == 0.0);
}

TEST_CASE("completeness residual shrinks as the step count doubles") {
  Rng rng(3);
  const std::vector<Tensor> x{random_tensor({6}, rng, -2, 2), random_tensor({4}, rng, -2, 2)};
  const std::vector<Tensor> base{Tensor({6}), Tensor({4})};
  double previous = INFINITY;
  for (std::size_t steps : {4, 8, 16, 32}) {
    const IgResult r = integrated_gradients(smooth, x, base, steps);
    CHECK(r.residual < previous);
    previous = r.residual;
  }
  CHECK(previous < 1e-3 * std::abs(integrated_gradients(smooth, x, base, 2).f_input));
}

TEST_CASE("baseline shape mismatch is a contract error") {
  const Functional f = [](ad::Graph&, std::span<const Var> xs) { return ad::sum(xs[0]); };
  CHECK(error_code([&] {
          integrated_gradients(f, std::vector<Tensor>{Tensor({2})}, std::vector<Tensor>{Tensor({3})}, 4);
        }) == Errc::contract);
}

TEST_CASE("a non-finite gradient names its alpha") {
  // d/dx sqrt-like blow-up: 1/x at the midpoint alpha of x = 0.
  const Functional f = [](ad::Graph& g, std::span<const Var> xs) {
    return ad::sum(ad::mul(xs[0], g.constant(Tensor({1}, {std::nan("")}))));
  };
  try {
    integrated_gradients(f, std::vector<Tensor>{Tensor({1}, {1.0})}, std::vector<Tensor>{Tensor({1})}, 4);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::non_finite);
    CHECK(std::string(e.what()).find("alpha=0.125") != std::string::npos);
  }
}

TEST_CASE("thread count does not change the attributions") {
  Rng rng(4);
  const std::vector<Tensor> x{random_tensor({6}, rng), random_tensor({4}, rng)};
  const std::vector<Tensor> base{Tensor({6}), Tensor({4})};
  setenv("CYCLONEKIT_THREADS", "1", 1);
  const IgResult a = integrated_gradients(smooth, x, base, 50);
  setenv("CYCLONEKIT_THREADS", "3", 1);
  const IgResult b = integrated_gradients(smooth, x, base, 50);
  unsetenv("CYCLONEKIT_THREADS");
  CHECK(a.attributions == b.attributions);
}

TEST_CASE("IR-only attribution gives IR weight one") {
  auto masses = uniform_masses(0.0);
  masses[0].mass = 3.5;
  const auto w = group_and_normalize(masses);
  REQUIRE(w.size() == 16);
  CHECK(w[0].predictor == "IR");
  CHECK(w[0].weight == 1.0);
  for (std::size_t i = 1; i < 16; ++i) CHECK(w[i].weight == 0.0);
}

TEST_CASE("equal mass gives each predictor 1/16; scaling changes nothing") {
  const auto w = group_and_normalize(uniform_masses(2.0));
  auto scaled = uniform_masses(2.0);
  scaled[5].mass = 7.0;
  auto doubled = scaled;
  for (auto& m : doubled) m.mass *= 2.0;
  const auto a = group_and_normalize(scaled);
  const auto b = group_and_normalize(doubled);
  double sum = 0.0;
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(w[i].weight == doctest::Approx(1.0 / 16.0).epsilon(1e-15));
    CHECK(a[i].weight == doctest::Approx(b[i].weight).epsilon(1e-15));
    sum += a[i].weight;
  }
  CHECK(std::abs(sum - 1.0) < 1e-9);
}

TEST_CASE("predictor groups") {
  const auto w = group_and_normalize(uniform_masses(1.0));
  CHECK(w[1].group == "satellite");
  CHECK((w[2].predictor == "Z850" && w[2].group == "850 hPa"));
  CHECK((w[3].predictor == "Z200" && w[3].group == "200 hPa"));
  CHECK((w[11].predictor == "V200" && w[11].group == "200 hPa"));
  CHECK((w[15].predictor == "MSL" && w[15].group == "surface"));
}

TEST_CASE("an unmapped channel is a contract error; zero mass is degenerate") {
  std::vector<ChannelMass> bad{{"sst", 1.0}};
  CHECK(error_code([&] { group_and_normalize(bad); }) == Errc::contract);
  CHECK(error_code([&] { group_and_normalize(uniform_masses(0.0)); }) == Errc::degenerate);
}

TEST_CASE("toy forecast: completeness within 1% at 256 steps") {
  ToyForecast toy(forecast::Variable::msw);
  AttributionConfig cfg;
  cfg.steps = 256;
  const auto heads = attribute(toy.encoder, *toy.model, toy.window(), cfg);
  REQUIRE(heads.size() == 1);
  MESSAGE("residual " << heads[0].residual << " of delta " << heads[0].delta);
  CHECK(heads[0].delta > 0.0);
  CHECK(heads[0].residual < 0.01 * heads[0].delta);
  double sum = 0.0;
  for (const auto& w : heads[0].weights) sum += w.weight;
  CHECK(std::abs(sum - 1.0) < 1e-9);
}

TEST_CASE("a channel the encoder ignores receives exactly zero attribution") {
  ToyForecast toy(forecast::Variable::track, {6, 24});
  // Rows of the satellite patch embedding that read the IR channel.
  const auto cfg = testing::tiny_mae_config();
  Tensor marker({16, 16, 2});
  for (std::size_t i = 0; i < marker.size(); ++i) marker[i] = double(i % 2);
  const Tensor rows = mask::patchify(marker, cfg.sat_grid());
  auto& w = toy.encoder.params().at(std::string(mae::kSatEncoder) + ".embed.w").value;
  for (std::size_t r = 0; r < rows.dim(1); ++r)
    if (rows[r] == 0.0)
      for (std::size_t c = 0; c < w.dim(1); ++c) w.at(r, c) = 0.0;
  AttributionConfig ac;
  ac.steps = 8;
  const auto heads = attribute(toy.encoder, *toy.model, toy.window(), ac);
  REQUIRE(heads.size() == 2);
  for (const auto& h : heads) {
    CHECK(h.masses[0].channel == "ir");
    CHECK(h.masses[0].mass == 0.0);
    CHECK(h.masses[1].mass > 0.0);
    CHECK(h.weights[0].weight == 0.0);
  }
}

TEST_CASE("attribution CSV layout") {
  HeadAttribution h;
  h.lead = 24;
  h.weights = group_and_normalize(uniform_masses(1.0));
  const std::string csv = attribution_csv("MSW", std::vector<HeadAttribution>{h}, 64);
  CHECK(csv.rfind("# target: decoded expectation", 0) == 0);
  CHECK(csv.find("steps=64") != std::string::npos);
  CHECK(csv.find("variable,lead,predictor,group,relative_weight\nMSW,24,IR,satellite,0.0625\n") !=
        std::string::npos);
}
