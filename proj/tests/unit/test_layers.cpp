// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "error_code.hpp"
#include "grad_suite.hpp"
#include "viptt/layers.hpp"
#include "viptt/loss.hpp"
#include "viptt/lstm.hpp"

using viptt::ErrorCode;
using viptt::Tensor;
using viptt::testing::code_of;

TEST_CASE("layer forward worked examples") {
  viptt::Dense dense(3, 3);
  for (std::size_t i = 0; i < 3; ++i) dense.weight().value.at({i, i}) = 1.0;
  const Tensor x({2, 3}, std::vector<double>{1, -2, 3, 0.5, 0, -7});
  CHECK(dense.forward(x, false) == x);

  const Tensor sm = viptt::softmax(Tensor({1, 5}, 0.0));
  for (double p : sm.data()) CHECK(p == doctest::Approx(0.2).epsilon(1e-15));

  viptt::Conv2d conv(1, 1, 3, viptt::Padding::Same);
  conv.weight().value.fill(1.0);
  const Tensor y = conv.forward(Tensor({1, 1, 5, 5}, 1.0), false);
  CHECK(y.at({0, 0, 2, 2}) == 9.0);
  CHECK(y.at({0, 0, 0, 0}) == 4.0);
  CHECK(y.at({0, 0, 0, 2}) == 6.0);

  viptt::Conv2d valid(1, 1, 3, viptt::Padding::Valid);
  valid.weight().value.fill(1.0);
  CHECK(valid.forward(Tensor({1, 1, 5, 5}, 1.0), false).shape() == viptt::Shape{1, 1, 3, 3});

  viptt::MaxPool2d pool;
  const Tensor p = pool.forward(Tensor({1, 1, 3, 4}, std::vector<double>{1, 5, 2, 0, 3, 4, 8, 1, 9, 9, 9, 9}), false);
  CHECK(p.shape() == viptt::Shape{1, 1, 1, 2});
  CHECK(p[0] == 5.0);
  CHECK(p[1] == 8.0);

  viptt::GlobalAvgPool gap;
  const Tensor g = gap.forward(Tensor({1, 2, 1, 2}, std::vector<double>{1, 3, -1, 5}), false);
  CHECK(g.shape() == viptt::Shape{1, 2});
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 2.0);

  viptt::Relu relu;
  CHECK(relu.forward(Tensor({3}, std::vector<double>{-1, 0, 2}), false) == Tensor({3}, std::vector<double>{0, 0, 2}));
}

TEST_CASE("convolution is cross-correlation") {
  viptt::Conv2d conv(1, 1, 3, viptt::Padding::Valid);
  for (std::size_t i = 0; i < 9; ++i) conv.weight().value[i] = static_cast<double>(i + 1);
  Tensor x({1, 1, 3, 3});
  x[0] = 1.0;  // top-left pixel meets the top-left tap
  CHECK(conv.forward(x, false)[0] == 1.0);
}

TEST_CASE("softmax rows are positive and sum to one") {
  viptt::SplitMix64 rng(5);
  const Tensor logits = viptt::testing::random_tensor({20, 7}, rng, -50.0, 50.0);
  const Tensor p = viptt::softmax(logits);
  for (std::size_t r = 0; r < 20; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) {
      CHECK(p.at({r, c}) > 0.0);
      s += p.at({r, c});
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  const Tensor big = viptt::softmax(Tensor({1, 2}, std::vector<double>{1000.0, 1000.0}));
  CHECK(big[0] == doctest::Approx(0.5));
}

TEST_CASE("shape and ordering errors") {
  viptt::Dense dense(3, 2);
  CHECK(code_of([&] { dense.forward(Tensor({2, 4}), false); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { dense.backward(Tensor({2, 2})); }) == ErrorCode::BackwardBeforeForward);
  viptt::Conv2d conv(2, 1, 3);
  CHECK(code_of([&] { conv.forward(Tensor({1, 3, 4, 4}), false); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { conv.backward(Tensor({1, 1, 4, 4})); }) == ErrorCode::BackwardBeforeForward);
  viptt::Relu relu;
  CHECK(code_of([&] { relu.backward(Tensor({1})); }) == ErrorCode::BackwardBeforeForward);
  viptt::MaxPool2d pool;
  CHECK(code_of([&] { pool.backward(Tensor({1, 1, 1, 1})); }) == ErrorCode::BackwardBeforeForward);
  viptt::Lstm lstm(2, 3);
  CHECK(code_of([&] { lstm.backward(Tensor({1, 3})); }) == ErrorCode::BackwardBeforeForward);
  CHECK(code_of([&] { lstm.forward(Tensor({1, 2, 3}), false); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { lstm.forward(Tensor({1, 0, 2}), false); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("relu passes no gradient at negative inputs") {
  viptt::Relu relu;
  relu.forward(Tensor({4}, std::vector<double>{-3, -0.5, -1e-9, 2}), true);
  const Tensor dx = relu.backward(Tensor({4}, 1.0));
  CHECK(dx == Tensor({4}, std::vector<double>{0, 0, 0, 1}));
}

TEST_CASE("every layer type passes the finite-difference check") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    for (const auto& check : viptt::testing::check_all_layers(seed)) {
      CAPTURE(check.layer);
      CAPTURE(check.report.worst_tensor);
      CHECK(check.report.max_rel_error < 1e-4);
      CHECK(check.report.probes > 0);
    }
  }
}

TEST_CASE("grad_check on dense and conv layers") {
  viptt::SplitMix64 rng(19);
  viptt::Dense dense(4, 3);
  dense.init_glorot(rng);
  CHECK(viptt::grad_check(dense, viptt::testing::random_tensor({2, 4}, rng), 1e-5) < 1e-6);
  viptt::Conv2d conv(2, 2, 3);
  conv.init_glorot(rng);
  CHECK(viptt::grad_check(conv, viptt::testing::random_tensor({1, 2, 4, 4}, rng), 1e-5) < 1e-4);
}

TEST_CASE("grad_check reports a wrong gradient") {
  // A layer whose backward claims twice the true gradient.
  struct Doubling final : viptt::Layer {
    std::string kind() const override { return "doubling"; }
    Tensor forward(const Tensor& x, bool) override { return x; }
    Tensor backward(const Tensor& g) override {
      Tensor out = g;
      for (double& v : out.data()) v *= 2.0;
      return out;
    }
    std::unique_ptr<viptt::Layer> clone() const override { return std::make_unique<Doubling>(*this); }
  } layer;
  viptt::SplitMix64 rng(1);
  CHECK(viptt::grad_check(layer, viptt::testing::random_tensor({3}, rng), 1e-5) == doctest::Approx(0.5));
}

TEST_CASE("lstm with all-zero parameters outputs zeros") {
  viptt::Lstm lstm(3, 4);
  viptt::SplitMix64 rng(2);
  const Tensor out = lstm.forward(viptt::testing::random_tensor({2, 5, 3}, rng), false);
  CHECK(out.shape() == viptt::Shape{2, 4});
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("lstm single step matches the gate equations evaluated by hand") {
  // Two units, two features, one step; recurrent weights stay zero.
  viptt::Lstm lstm(2, 2);
  using G = viptt::Lstm::Gate;
  const double wi[4] = {0.5, -0.2, 0.1, 0.3};
  const double wf[4] = {-0.4, 0.6, 0.2, 0.0};
  const double wg[4] = {0.7, 0.1, -0.5, 0.9};
  const double wo[4] = {0.3, 0.3, -0.1, -0.6};
  const double bi[2] = {0.1, -0.1}, bf[2] = {1.0, 1.0}, bg[2] = {0.0, 0.2}, bo[2] = {-0.3, 0.05};
  auto set = [](viptt::Parameter& p, const double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p.value[i] = v[i];
  };
  set(lstm.input_weight(G::kInput), wi, 4);
  set(lstm.input_weight(G::kForget), wf, 4);
  set(lstm.input_weight(G::kCandidate), wg, 4);
  set(lstm.input_weight(G::kOutput), wo, 4);
  set(lstm.bias(G::kInput), bi, 2);
  set(lstm.bias(G::kForget), bf, 2);
  set(lstm.bias(G::kCandidate), bg, 2);
  set(lstm.bias(G::kOutput), bo, 2);
  const double x[2] = {0.8, -1.5};
  const Tensor h = lstm.forward(Tensor({1, 1, 2}, std::vector<double>{x[0], x[1]}), false);

  auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  for (std::size_t u = 0; u < 2; ++u) {
    const double zi = wi[2 * u] * x[0] + wi[2 * u + 1] * x[1] + bi[u];
    const double zg = wg[2 * u] * x[0] + wg[2 * u + 1] * x[1] + bg[u];
    const double zo = wo[2 * u] * x[0] + wo[2 * u + 1] * x[1] + bo[u];
    // The forget gate multiplies c_0 = 0 and so drops out.
    const double c = sigmoid(zi) * std::tanh(zg);
    const double expected = sigmoid(zo) * std::tanh(c);
    CHECK(h[u] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(lstm.last_state().cell[u] == doctest::Approx(c).epsilon(1e-14));
  }
  // Hand-evaluated for unit 0: z_i = 0.8*0.5 + -1.5*-0.2 + 0.1 = 0.8,
  // z_g = 0.56 - 0.15 = 0.41, z_o = 0.24 - 0.45 - 0.3 = -0.51.
  const double c0 = (1.0 / (1.0 + std::exp(-0.8))) * std::tanh(0.41);
  CHECK(h[0] == doctest::Approx((1.0 / (1.0 + std::exp(0.51))) * std::tanh(c0)).epsilon(1e-14));
}

TEST_CASE("lstm hidden state is tanh-bounded and zero upstream gives zero gradients") {
  viptt::SplitMix64 rng(31);
  viptt::Lstm lstm(4, 6);
  lstm.init(rng);
  for (auto& b : lstm.bias(viptt::Lstm::kForget).value.data()) CHECK(b == 1.0);
  const Tensor out = lstm.forward(viptt::testing::random_tensor({3, 9, 4}, rng, -20.0, 20.0), true);
  for (double v : out.data()) CHECK(std::abs(v) < 1.0);
  lstm.zero_grad();
  const Tensor dx = lstm.backward(Tensor({3, 6}));
  for (double v : dx.data()) CHECK(v == 0.0);
  for (const auto* p : lstm.parameters())
    for (double g : p->grad.data()) CHECK(g == 0.0);
}

TEST_CASE("cross-entropy worked examples") {
  const std::vector<int> label0{0};
  const auto uniform = viptt::weighted_cross_entropy(Tensor({1, 5}, 0.2), label0, {});
  CHECK(uniform.loss == doctest::Approx(std::log(5.0)).epsilon(1e-14));
  CHECK(uniform.loss == doctest::Approx(1.6094).epsilon(1e-4));

  const auto perfect = viptt::weighted_cross_entropy(Tensor({1, 2}, std::vector<double>{1.0, 0.0}), label0, {});
  CHECK(perfect.loss == 0.0);

  const std::vector<double> weights{2.5, 1.0};
  const auto half = viptt::weighted_cross_entropy(Tensor({1, 2}, 0.5), label0, weights);
  CHECK(half.loss == doctest::Approx(2.5 * std::log(2.0)).epsilon(1e-14));
  CHECK(half.loss == doctest::Approx(1.7329).epsilon(1e-4));

  CHECK(code_of([&] { viptt::weighted_cross_entropy(Tensor({1, 2}, 0.6), label0, {}); }) == ErrorCode::ProbNotNormalized);
}

TEST_CASE("fused softmax cross-entropy agrees with the two-step form and its gradient") {
  viptt::SplitMix64 rng(6);
  const Tensor logits = viptt::testing::random_tensor({4, 3}, rng, -3.0, 3.0);
  const std::vector<int> labels{0, 2, 1, 2};
  const std::vector<double> weights{0.5, 2.0, 1.25};
  const auto fused = viptt::softmax_cross_entropy(logits, labels, weights);
  const auto split = viptt::weighted_cross_entropy(viptt::softmax(logits), labels, weights);
  CHECK(fused.loss == doctest::Approx(split.loss).epsilon(1e-13));

  // Central differences of the loss in each logit.
  Tensor probe = logits;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + 1e-6;
    const double up = viptt::softmax_cross_entropy(probe, labels, weights).loss;
    probe[i] = saved - 1e-6;
    const double down = viptt::softmax_cross_entropy(probe, labels, weights).loss;
    probe[i] = saved;
    CHECK(fused.grad_logits[i] == doctest::Approx((up - down) / 2e-6).epsilon(1e-6));
  }
  CHECK(code_of([&] { viptt::softmax_cross_entropy(logits, std::vector<int>{0, 3, 1, 2}, weights); }) ==
        ErrorCode::LabelOutOfRange);
}

TEST_CASE("sgd_step arithmetic and trainability") {
  viptt::Dense a(1, 1), b(1, 1);
  a.weight().value[0] = 1.0;
  a.weight().grad[0] = 2.0;
  b.weight().value[0] = 1.0;
  b.weight().grad[0] = 2.0;
  b.trainable = false;
  std::vector<viptt::Layer*> layers{&a, &b};
  viptt::sgd_step(layers, 0.1);
  CHECK(a.weight().value[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(b.weight().value[0] == 1.0);
  CHECK(a.weight().grad[0] == 0.0);
  CHECK(b.weight().grad[0] == 0.0);

  viptt::sgd_step(layers, 0.1);
  viptt::sgd_step(layers, 0.1);
  CHECK(a.weight().value[0] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("frozen layers still compute gradients") {
  viptt::SplitMix64 rng(3);
  viptt::Dense dense(3, 2);
  dense.init_glorot(rng);
  dense.trainable = false;
  dense.forward(viptt::testing::random_tensor({2, 3}, rng), true);
  const Tensor dx = dense.backward(Tensor({2, 2}, 1.0));
  double norm = 0.0;
  for (double g : dense.weight().grad.data()) norm += g * g;
  CHECK(norm > 0.0);
  CHECK(dx.shape() == viptt::Shape{2, 3});
}

TEST_CASE("sequential copies are deep") {
  viptt::Sequential seq;
  seq.add<viptt::Dense>(2, 2).weight().value.fill(1.0);
  viptt::Sequential copy = seq;
  static_cast<viptt::Dense&>(copy.at(0)).weight().value.fill(5.0);
  CHECK(static_cast<viptt::Dense&>(seq.at(0)).weight().value[0] == 1.0);
}
