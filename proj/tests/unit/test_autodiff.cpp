#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cyclone/autodiff/checkpoint.hpp"
#include "cyclone/autodiff/ops.hpp"
#include "cyclone/autodiff/optim.hpp"
#include "cyclone/error.hpp"
#include "../support/gradcheck.hpp"

using namespace cyclone;
using namespace cyclone::ad;
using cyclone::testing::check_input_gradients;
using cyclone::testing::random_tensor;

namespace {

// Weighted sum with fixed pseudo-random weights turns any tensor into a
// scalar whose gradient exercises every output element differently.
Var probe(Var x) {
  Tensor w(x.shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(1.7 * double(i) + 0.3);
  return sum(mul(x, x.graph->constant(w)));
}

constexpr double kOpTolerance = 1e-4;

}  // namespace

TEST_CASE("tensor construction enforces shape/data agreement") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), Error);
  CHECK_THROWS_AS(Tensor({0, 2}), Error);
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
  CHECK_THROWS_AS(t.reshaped({4, 2}), Error);
}

TEST_CASE("matmul worked examples") {
  Graph g;
  Var eye = g.constant(Tensor({2, 2}, {1, 0, 0, 1}));
  Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(matmul(eye, g.constant(x)).value() == x);

  Var a = g.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  Var b = g.constant(Tensor({2, 1}, {1, 1}));
  CHECK(matmul(a, b).value() == Tensor({2, 1}, {3, 7}));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Graph g;
  Var a = g.constant(Tensor({2, 3}));
  Var b = g.constant(Tensor({2, 3}));
  try {
    matmul(a, b);
    FAIL("expected a dimension error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::dimension);
    CHECK(std::string(e.what()).find("[2x3] and [2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches finite differences") {
  Rng rng(11);
  auto r = check_input_gradients([](Graph&, std::span<const Var> in) { return probe(matmul(in[0], in[1])); },
                                 {random_tensor({3, 3}, rng), random_tensor({3, 3}, rng)});
  CHECK(r.checked == 18);
  CHECK(r.max_rel_error < kOpTolerance);
}

TEST_CASE("softmax values and stability") {
  Graph g;
  auto sm = [&](std::initializer_list<double> v) {
    return softmax(g.constant(Tensor({1, v.size()}, v))).value();
  };
  Tensor flat = sm({0, 0, 0});
  for (double p : flat.values()) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  Tensor peaked = sm({1000, 0, 0});
  CHECK(std::abs(peaked[0] - 1.0) < 1e-12);
  CHECK(peaked[1] < 1e-12);
  CHECK(peaked.all_finite());

  Tensor ramp = sm({1, 2, 3});
  CHECK(ramp[0] == doctest::Approx(0.09003).epsilon(1e-4));
  CHECK(ramp[1] == doctest::Approx(0.24473).epsilon(1e-4));
  CHECK(ramp[2] == doctest::Approx(0.66524).epsilon(1e-4));
}

TEST_CASE("softmax rows sum to one along any axis") {
  Rng rng(3);
  Graph g;
  Tensor x = random_tensor({3, 4, 5}, rng, -30.0, 30.0);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    Tensor p = softmax(g.constant(x), axis).value();
    const Shape& s = p.shape();
    const std::size_t inner = axis == 2 ? 1 : (axis == 1 ? 5 : 20);
    const std::size_t outer = p.size() / (s[axis] * inner);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < s[axis]; ++j) total += p[(o * s[axis] + j) * inner + i];
        CHECK(std::abs(total - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("backward closed forms") {
  SUBCASE("sum gives ones") {
    Graph g;
    Var x = g.input(Tensor({2, 3, 2}, 0.5));
    g.backward(sum(x));
    for (double v : g.grad(x)->values()) CHECK(v == 1.0);
  }
  SUBCASE("mean squared error gives 2(x-y)/n") {
    Rng rng(5);
    Tensor xv = random_tensor({4, 3}, rng);
    Tensor yv = random_tensor({4, 3}, rng);
    Graph g;
    Var x = g.input(xv);
    Var d = sub(x, g.constant(yv));
    g.backward(mean(mul(d, d)));
    for (std::size_t i = 0; i < xv.size(); ++i) {
      CHECK((*g.grad(x))[i] == doctest::Approx(2.0 * (xv[i] - yv[i]) / 12.0).epsilon(1e-14));
    }
  }
  SUBCASE("non-scalar loss is a contract error") {
    Graph g;
    Var x = g.input(Tensor({2}, 1.0));
    try {
      g.backward(x);
      FAIL("expected contract error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::contract);
    }
  }
}

TEST_CASE("every node is visited at most once in reverse order") {
  Graph g;
  Var x = g.input(Tensor({2, 2}, 1.0));
  Var y = mul(x, x);
  Var z = add(y, x);
  Var loss = sum(add(z, y));
  g.backward(loss);
  // mul, add, add, sum each have a closure and receive a gradient.
  CHECK(g.backward_visits() == 4);
  for (double v : g.grad(x)->values()) CHECK(v == doctest::Approx(5.0));
}

TEST_CASE("elementwise and structural ops pass the finite-difference check") {
  Rng rng(2024);
  struct Case {
    const char* name;
    testing::InputLoss build;
    std::vector<Tensor> inputs;
  };
  std::vector<Case> cases = {
      {"add", [](Graph&, std::span<const Var> in) { return probe(add(in[0], in[1])); },
       {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}},
      {"sub", [](Graph&, std::span<const Var> in) { return probe(sub(in[0], in[1])); },
       {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}},
      {"mul", [](Graph&, std::span<const Var> in) { return probe(mul(in[0], in[1])); },
       {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}},
      {"scale", [](Graph&, std::span<const Var> in) { return probe(scale(add_scalar(in[0], 0.5), -2.5)); },
       {random_tensor({5}, rng)}},
      {"add_bias", [](Graph&, std::span<const Var> in) { return probe(add_bias(in[0], in[1])); },
       {random_tensor({2, 3, 4}, rng), random_tensor({4}, rng)}},
      {"layer_norm",
       [](Graph&, std::span<const Var> in) { return probe(layer_norm(in[0], in[1], in[2])); },
       {random_tensor({3, 6}, rng), random_tensor({6}, rng, 0.5, 1.5), random_tensor({6}, rng)}},
      {"gelu", [](Graph&, std::span<const Var> in) { return probe(gelu(in[0])); },
       {random_tensor({4, 4}, rng, -3.0, 3.0)}},
      {"sigmoid", [](Graph&, std::span<const Var> in) { return probe(sigmoid(in[0])); },
       {random_tensor({4, 4}, rng, -4.0, 4.0)}},
      {"tanh", [](Graph&, std::span<const Var> in) { return probe(tanh(in[0])); },
       {random_tensor({4, 4}, rng, -2.0, 2.0)}},
      {"reshape+transpose",
       [](Graph&, std::span<const Var> in) { return probe(transpose(reshape(in[0], {4, 3}))); },
       {random_tensor({2, 6}, rng)}},
      {"concat axis 0",
       [](Graph&, std::span<const Var> in) { return probe(concat({in[0], in[1]}, 0)); },
       {random_tensor({2, 3}, rng), random_tensor({4, 3}, rng)}},
      {"concat axis 1",
       [](Graph&, std::span<const Var> in) { return probe(concat({in[0], in[1], in[0]}, 1)); },
       {random_tensor({3, 2}, rng), random_tensor({3, 5}, rng)}},
      {"slice", [](Graph&, std::span<const Var> in) { return probe(slice(in[0], 1, 2, 3)); },
       {random_tensor({3, 6, 2}, rng)}},
      {"mean_axis", [](Graph&, std::span<const Var> in) { return probe(mean_axis(in[0], 1)); },
       {random_tensor({3, 5, 2}, rng)}},
      {"gather_rows",
       [](Graph&, std::span<const Var> in) {
         const std::vector<std::size_t> rows{2, 0, 2, 3};
         return probe(gather_rows(in[0], rows));
       },
       {random_tensor({4, 3}, rng)}},
      {"gather",
       [](Graph&, std::span<const Var> in) { return probe(gather(in[0], {5, 1, 1, 0, 3, 2}, {2, 3})); },
       {random_tensor({6}, rng)}},
      {"softmax axis 0", [](Graph&, std::span<const Var> in) { return probe(softmax(in[0], 0)); },
       {random_tensor({4, 3}, rng, -2.0, 2.0)}},
      {"softmax trailing", [](Graph&, std::span<const Var> in) { return probe(softmax(in[0])); },
       {random_tensor({3, 5}, rng, -2.0, 2.0)}},
      {"mean", [](Graph&, std::span<const Var> in) { return mean(mul(in[0], in[0])); },
       {random_tensor({3, 5}, rng)}},
  };
  for (auto& c : cases) {
    CAPTURE(c.name);
    auto r = check_input_gradients(c.build, c.inputs);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error < kOpTolerance);
  }
}

TEST_CASE("cross entropy over softmax has gradient p - q") {
  Rng rng(9);
  Tensor logits = random_tensor({1, 6}, rng, -2.0, 2.0);
  Tensor q({1, 6}, {0.05, 0.1, 0.4, 0.3, 0.1, 0.05});

  Graph g;
  Var z = g.input(logits);
  Var p = softmax(z);
  g.backward(cross_entropy(p, q));
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(std::abs((*g.grad(z))[i] - (p.value()[i] - q[i])) < 1e-12);
  }

  Graph fused;
  Var zf = fused.input(logits);
  Var loss = softmax_cross_entropy(zf, q);
  fused.backward(loss);
  CHECK(loss.value().item() == doctest::Approx(cross_entropy(p, q).value().item()).epsilon(1e-13));
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(std::abs((*fused.grad(zf))[i] - (p.value()[i] - q[i])) < 1e-12);
  }

  auto r = check_input_gradients(
      [&](Graph&, std::span<const Var> in) { return cross_entropy(softmax(in[0]), q); }, {logits});
  CHECK(r.max_rel_error < kOpTolerance);
}

TEST_CASE("parameters are shared leaves and frozen ones get no gradient") {
  ParamStore store;
  Parameter& w = store.add("w", "trainable", Tensor({2, 2}, {1, 2, 3, 4}));
  Parameter& f = store.add("f", "frozen", Tensor({2, 2}, {1, 1, 1, 1}));
  store.set_trainable("frozen", false);
  Graph g;
  Var a = g.param(w);
  Var b = g.param(w);
  CHECK(a.id == b.id);
  Var loss = sum(matmul(g.param(w), g.param(f)));
  g.backward(loss);
  CHECK(g.grad(w) != nullptr);
  CHECK(g.grad(f) == nullptr);

  Gradients grads(store);
  grads.accumulate(g, store);
  CHECK(grads[0][0] == doctest::Approx(2.0));
  for (double v : grads[1].values()) CHECK(v == 0.0);
}

TEST_CASE("adam step matches the closed form of the first update") {
  ParamStore store;
  store.add("w", "g", Tensor({3}, {1.0, -2.0, 0.5}));
  Gradients grads(store);
  grads[0] = Tensor({3}, {0.3, -0.1, 0.0});
  Adam adam(store, {.learning_rate = 0.01});
  adam.step(store, grads);
  // m_hat = g, v_hat = g^2 on step one, so the update is lr * g / (|g| + eps).
  CHECK(store[0].value[0] == doctest::Approx(1.0 - 0.01 * 0.3 / (0.3 + 1e-8)).epsilon(1e-14));
  CHECK(store[0].value[1] == doctest::Approx(-2.0 + 0.01 * 0.1 / (0.1 + 1e-8)).epsilon(1e-14));
  CHECK(store[0].value[2] == 0.5);

  store.set_trainable("g", false);
  const Tensor before = store[0].value;
  adam.step(store, grads);
  CHECK(store[0].value == before);
}

TEST_CASE("plateau schedule decays after more than `patience` stagnant epochs") {
  PlateauSchedule schedule(0.2, 10);
  double lr = 5e-4;
  lr = schedule.update(1.0, lr);
  for (int epoch = 0; epoch < 10; ++epoch) lr = schedule.update(1.0, lr);
  CHECK(lr == 5e-4);
  lr = schedule.update(1.0, lr);
  CHECK(lr == doctest::Approx(1e-4).epsilon(1e-15));
  lr = schedule.update(0.5, lr);
  CHECK(lr == doctest::Approx(1e-4).epsilon(1e-15));
}

TEST_CASE("checkpoint round trip is exact") {
  Rng rng(1);
  ParamStore store;
  store.add("enc.w", "encoder", normal_tensor({3, 4}, 1.0, rng));
  store.add("enc.b", "encoder", normal_tensor({4}, 1.0, rng));
  store.add("head.w", "head", normal_tensor({4, 2}, 1.0, rng));
  const auto dir = std::filesystem::temp_directory_path() / "cyclonekit_ckpt_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(store, dir / "model.json", {{"note", "x"}});
  CHECK(std::filesystem::file_size(dir / "model.bin") == 8 * (12 + 4 + 8));

  nlohmann::json meta;
  ParamStore loaded = load_checkpoint(dir / "model.json", &meta);
  CHECK(meta["note"] == "x");
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < store.size(); ++i) {
    CHECK(loaded[i].name == store[i].name);
    CHECK(loaded[i].group == store[i].group);
    CHECK(loaded[i].value == store[i].value);
  }
  CHECK(loaded.checksum("encoder") == store.checksum("encoder"));

  ParamStore wrong;
  wrong.add("enc.w", "encoder", Tensor({4, 3}));
  wrong.add("enc.b", "encoder", Tensor({4}));
  wrong.add("head.w", "head", Tensor({4, 2}));
  CHECK_THROWS_AS(load_into(wrong, dir / "model.json"), Error);
  std::filesystem::remove_all(dir);
}
