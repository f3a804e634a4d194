#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cyclone/autodiff/ops.hpp"
#include "cyclone/error.hpp"
#include "cyclone/grid/bins.hpp"
#include "cyclone/rng.hpp"

using namespace cyclone;
using namespace cyclone::grid;

namespace {

double total(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("global-scan bins") {
  std::vector<double> targets{950.0, 880.0, 1001.5, 1020.0, 990.0};
  const BinSpec s = fit_binspec_global_scan(targets, 256);
  CHECK(s.v_min == 880.0);
  CHECK(s.v_max == 1020.0);
  CHECK(s.width() == 0.546875);
  CHECK(s.center(0) == 880.2734375);

  const std::vector<double> unit{0.0, 1.0};
  const BinSpec two = fit_binspec_global_scan(unit, 2);
  CHECK(two.centers() == std::vector<double>{0.25, 0.75});

  const std::vector<double> flat{5.0, 5.0, 5.0};
  try {
    fit_binspec_global_scan(flat);
    FAIL("expected a degenerate error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate);
  }
  CHECK(BinSpec::from_json(s.to_json()) == s);
}

TEST_CASE("track regimes by lead") {
  const TrackBinSpec t24 = track_binspec(24);
  CHECK(t24.lat.v_min == -15.0);
  CHECK(t24.lat.v_max == 15.0);
  CHECK(t24.lon.v_min == -20.0);
  CHECK(t24.lon.v_max == 20.0);
  CHECK(t24.lat.k == 64);
  const TrackBinSpec t72 = track_binspec(72);
  CHECK(t72.lat.v_max == 20.0);
  CHECK(t72.lon.v_max == 25.0);
  CHECK(track_binspec(48).regime == TrackRegime::narrow);
  CHECK(track_binspec(54).regime == TrackRegime::wide);
  CHECK_THROWS_AS(track_binspec(7), Error);
}

TEST_CASE("Gaussian smoothing examples") {
  const std::vector<double> c{0.0, 1.0, 2.0};
  const auto q = smooth_labels(1.0, c, 1.0);
  // Direct evaluation: weights exp(-1/2), 1, exp(-1/2) over their sum.
  const double e = std::exp(-0.5), z = 1.0 + 2.0 * e;
  CHECK(q[0] == doctest::Approx(e / z).epsilon(1e-14));
  CHECK(q[1] == doctest::Approx(1.0 / z).epsilon(1e-14));
  CHECK(std::abs(q[0] - 0.27406) < 1e-5);  // quoted to five decimals
  CHECK(std::abs(q[1] - 0.45186) < 1e-5);

  const BinSpec s = BinSpec::make(0.0, 10.0, 10);
  const auto mid = smooth_labels(5.0, s, 1.0);  // between centres 4.5 and 5.5
  CHECK(mid[4] == doctest::Approx(mid[5]).epsilon(1e-15));
  const auto sharp = smooth_labels(s.center(3), s, 0.01 * s.width());
  CHECK(sharp[3] > 0.999);
}

TEST_CASE("smoothing always normalises and is unimodal inside the range") {
  Rng rng(3);
  const BinSpec s = BinSpec::make(880.0, 1020.0, 256);
  for (int trial = 0; trial < 200; ++trial) {
    const double y = rng.uniform(860.0, 1040.0);
    const double sigma = rng.uniform(0.05, 5.0) * s.width();
    const auto q = smooth_labels(y, s, sigma);
    CHECK(std::abs(total(q) - 1.0) < 1e-12);
    if (y > s.v_min && y < s.v_max) {
      const auto peak = std::size_t(std::max_element(q.begin(), q.end()) - q.begin());
      for (std::size_t i = 1; i <= peak; ++i) CHECK(q[i] >= q[i - 1]);
      for (std::size_t i = peak + 1; i < q.size(); ++i) CHECK(q[i] <= q[i - 1]);
    }
  }
  const auto far = smooth_labels(5000.0, s, s.width());
  CHECK(std::abs(total(far) - 1.0) < 1e-12);
  CHECK(far.back() > 0.99);
}

TEST_CASE("cross-entropy values") {
  const std::vector<double> one_hot{0.0, 1.0, 0.0};
  CHECK(ce_loss(one_hot, one_hot) == 0.0);
  const std::size_t k = 256;
  const std::vector<double> uniform(k, 1.0 / double(k));
  const auto q = smooth_labels(950.0, BinSpec::make(880.0, 1020.0, k), 0.5);
  CHECK(ce_loss(uniform, q) == doctest::Approx(std::log(double(k))).epsilon(1e-12));
  const std::vector<double> zero_p{0.0, 1.0};
  const std::vector<double> half{0.5, 0.5};
  CHECK(ce_loss(zero_p, half) == doctest::Approx(-0.5 * std::log(1e-12)));
}

TEST_CASE("softmax cross-entropy gradient is p - q") {
  Rng rng(8);
  ad::Tensor logits({1, 16});
  for (auto& v : logits.values()) v = rng.normal();
  const auto q = smooth_labels(0.3, BinSpec::make(-1.0, 1.0, 16), 0.125);
  const ad::Tensor qt({1, 16}, q);

  ad::Graph g;
  ad::Var x = g.input(logits);
  ad::Var loss = ad::cross_entropy(ad::softmax(x), qt);
  g.backward(loss);
  const ad::Tensor p = ad::softmax(g.constant(logits)).value();
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(std::abs((*g.grad(x))[i] - (p[i] - q[i])) < 1e-6);
    // Independent central difference on the plain numeric loss.
    auto eval = [&](double delta) {
      ad::Tensor l = logits;
      l[i] += delta;
      ad::Graph h;
      const ad::Tensor pp = ad::softmax(h.constant(l)).value();
      return ce_loss(pp.values(), q);
    };
    const double fd = (eval(1e-6) - eval(-1e-6)) / 2e-6;
    CHECK(std::abs(fd - (p[i] - q[i])) < 1e-6);
  }
}

TEST_CASE("expectation decoding") {
  const std::vector<double> c{0.0, 1.0, 2.0};
  const std::vector<double> uniform{1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(expect_decode(uniform, c) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> hot{0.0, 0.0, 1.0};
  CHECK(expect_decode(hot, c) == 2.0);
  const std::vector<double> p{0.25, 0.25, 0.5};
  CHECK(expect_decode(p, c) == 1.25);

  std::vector<double> shifted = c;
  for (double& v : shifted) v += 7.5;
  CHECK(expect_decode(p, shifted) == doctest::Approx(1.25 + 7.5).epsilon(1e-15));
}

TEST_CASE("decode of a smoothed target recovers it within half a bin") {
  const BinSpec s = BinSpec::make(880.0, 1020.0, 256);
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    // Interior: keep three bandwidths away from the edges.
    const double y = rng.uniform(s.v_min + 3 * s.width(), s.v_max - 3 * s.width());
    const auto q = smooth_labels(y, s, s.width());
    CHECK(std::abs(expect_decode(q, s) - y) <= s.width() / 2);
  }
}

TEST_CASE("displacement and longitude wrap") {
  auto p = apply_displacement(20.0, 130.0, 1.5, -2.0);
  CHECK(p.lat == 21.5);
  CHECK(p.lon == 128.0);
  CHECK_FALSE(p.clamped);
  p = apply_displacement(10.0, 179.5, 0.0, 1.0);
  CHECK(p.lon == -179.5);
  p = apply_displacement(-12.25, -60.0, 0.0, 0.0);
  CHECK(p.lat == -12.25);
  CHECK(p.lon == -60.0);
  p = apply_displacement(85.0, 0.0, 10.0, 0.0);
  CHECK(p.lat == 90.0);
  CHECK(p.clamped);
}

TEST_CASE("quantile intervals") {
  const BinSpec s = BinSpec::make(0.0, 1.0, 256);
  std::vector<double> hot(256, 0.0);
  hot[40] = 1.0;
  const auto [a, b] = interval(hot, s, 0.1, 0.9);
  CHECK(a == s.center(40));
  CHECK(b == s.center(40));

  const std::vector<double> uniform(256, 1.0 / 256);
  const auto [lo, hi] = interval(uniform, s, 0.25, 0.75);
  CHECK(std::abs(lo - 0.25) <= s.width());
  CHECK(std::abs(hi - 0.75) <= s.width());

  Rng rng(6);
  std::vector<double> p(256);
  for (double& v : p) v = rng.uniform();
  const double z = total(p);
  for (double& v : p) v /= z;
  double prev_lo = 1e9, prev_hi = -1e9;
  for (double w = 0.05; w < 0.5; w += 0.05) {
    const auto [l, h] = interval(p, s, 0.5 - w, 0.5 + w);
    CHECK(l <= prev_lo);
    CHECK(h >= prev_hi);
    prev_lo = l;
    prev_hi = h;
  }
  CHECK_THROWS_AS(interval(p, s, 0.6, 0.4), Error);
}
