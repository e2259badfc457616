// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "error_code.hpp"
#include "metrics_oracle.hpp"
#include "viptt/metrics.hpp"
#include "viptt/random.hpp"

using viptt::ConfusionMatrix;
using viptt::ErrorCode;
using viptt::testing::code_of;

namespace {

// Expands a row-major count matrix into per-sample (truth, prediction) lists.
void expand(const ConfusionMatrix& cm, std::vector<int>& truth, std::vector<int>& pred) {
  for (std::size_t i = 0; i < cm.num_classes(); ++i)
    for (std::size_t j = 0; j < cm.num_classes(); ++j)
      for (std::uint64_t n = 0; n < cm.at(i, j); ++n) {
        truth.push_back(static_cast<int>(i));
        pred.push_back(static_cast<int>(j));
      }
}

}  // namespace

TEST_CASE("confusion_matrix definition and errors") {
  const std::vector<int> t{0, 1}, p{0, 1};
  CHECK(viptt::confusion_matrix(t, p, 2) == ConfusionMatrix(2, {1, 0, 0, 1}));
  const std::vector<int> t2{0, 0}, p2{1, 1};
  CHECK(viptt::confusion_matrix(t2, p2, 2) == ConfusionMatrix(2, {0, 2, 0, 0}));
  CHECK(code_of([&] { viptt::confusion_matrix(t, std::vector<int>{0}, 2); }) == ErrorCode::LengthMismatch);
  CHECK(code_of([&] { viptt::confusion_matrix(t, std::vector<int>{0, 2}, 2); }) == ErrorCode::LabelOutOfRange);
}

TEST_CASE("kappa, accuracy and F1 worked matrices") {
  const ConfusionMatrix perfect(2, {5, 0, 0, 5});
  CHECK(viptt::cohen_kappa(perfect).kappa == 1.0);
  CHECK(viptt::accuracy(perfect) == 1.0);
  CHECK(viptt::per_class_f1(perfect) == std::vector<double>{1.0, 1.0});

  const auto flat = viptt::cohen_kappa(ConfusionMatrix(2, {2, 2, 2, 2}));
  CHECK(flat.p0 == 0.5);
  CHECK(flat.pe == 0.5);
  CHECK(std::abs(flat.kappa) < 1e-12);

  const ConfusionMatrix mixed(2, {4, 1, 2, 3});
  const auto k = viptt::cohen_kappa(mixed);
  CHECK(std::abs(k.p0 - 0.7) < 1e-12);
  CHECK(std::abs(k.pe - 0.5) < 1e-12);
  CHECK(std::abs(k.kappa - 0.4) < 1e-9);
  CHECK(std::abs(viptt::accuracy(mixed) - 0.7) < 1e-9);
  const double p = 4.0 / 6.0, r = 4.0 / 5.0;
  CHECK(std::abs(viptt::per_class_f1(mixed)[0] - 2 * p * r / (p + r)) < 1e-9);
  CHECK(std::abs(viptt::per_class_f1(mixed)[0] - 0.7273) < 1e-4);

  CHECK(viptt::accuracy(ConfusionMatrix(2, {0, 5, 5, 0})) == 0.0);
}

TEST_CASE("degenerate marginals and empty classes") {
  CHECK(viptt::cohen_kappa(ConfusionMatrix(3, {4, 0, 0, 0, 0, 0, 0, 0, 0})).kappa == 1.0);
  // Both raters always say class 0 in the marginals but disagree per item is
  // impossible; a zero matrix has no samples at all.
  CHECK_THROWS_AS(viptt::cohen_kappa(ConfusionMatrix(2)), viptt::Error);
  const auto f1 = viptt::per_class_f1(ConfusionMatrix(3, {3, 1, 0, 1, 2, 0, 0, 0, 0}));
  CHECK(f1[2] == 0.0);
}

TEST_CASE("metrics match the pairwise oracle on random matrices") {
  viptt::SplitMix64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.below(5);
    std::vector<std::uint64_t> counts(k * k);
    for (auto& c : counts) c = rng.below(9);
    counts[0] += 1;  // at least one sample
    const ConfusionMatrix cm(k, counts);
    std::vector<int> truth, pred;
    expand(cm, truth, pred);
    const auto oracle = viptt::testing::oracle_metrics(truth, pred, k);
    CHECK(viptt::confusion_matrix(truth, pred, k) == cm);
    CHECK(std::abs(viptt::accuracy(cm) - oracle.accuracy) < 1e-9);
    if (viptt::cohen_kappa(cm).pe < 1.0) CHECK(std::abs(viptt::cohen_kappa(cm).kappa - oracle.kappa) < 1e-9);
    const auto f1 = viptt::per_class_f1(cm);
    for (std::size_t c = 0; c < k; ++c) CHECK(std::abs(f1[c] - oracle.f1[c]) < 1e-9);
    CHECK(viptt::cohen_kappa(cm).kappa <= 1.0);
  }
}

TEST_CASE("consistent label permutation leaves kappa and accuracy unchanged") {
  viptt::SplitMix64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 3 + rng.below(3);
    std::vector<int> truth(40), pred(40);
    for (auto& t : truth) t = static_cast<int>(rng.below(k));
    for (auto& p : pred) p = static_cast<int>(rng.below(k));
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    viptt::shuffle(std::span<int>(perm), rng);
    std::vector<int> pt, pp;
    for (int t : truth) pt.push_back(perm[static_cast<std::size_t>(t)]);
    for (int p : pred) pp.push_back(perm[static_cast<std::size_t>(p)]);
    const auto a = viptt::confusion_matrix(truth, pred, k);
    const auto b = viptt::confusion_matrix(pt, pp, k);
    CHECK(viptt::cohen_kappa(a).kappa == doctest::Approx(viptt::cohen_kappa(b).kappa).epsilon(1e-12));
    CHECK(viptt::accuracy(a) == viptt::accuracy(b));
    const auto fa = viptt::per_class_f1(a), fb = viptt::per_class_f1(b);
    for (std::size_t c = 0; c < k; ++c) CHECK(fa[c] == doctest::Approx(fb[static_cast<std::size_t>(perm[c])]).epsilon(1e-12));
  }
}

TEST_CASE("shuffled predictions give kappa near zero") {
  viptt::SplitMix64 rng(10000);
  std::vector<int> truth(10000);
  for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = static_cast<int>(i % 4);
  std::vector<int> pred = truth;
  viptt::shuffle(std::span<int>(pred), rng);
  CHECK(std::abs(viptt::cohen_kappa(viptt::confusion_matrix(truth, pred, 4)).kappa) < 0.1);
}

TEST_CASE("class names and reports") {
  CHECK(viptt::class_name(0, 5) == "Infiltrative");
  CHECK(viptt::class_name(4, 5) == "Fibro-cavernous");
  CHECK(viptt::class_name(3, 10) == "class_3");
  const ConfusionMatrix cm(5, {2, 0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 2});
  const std::string csv = viptt::format_report_csv(cm);
  CHECK(csv.rfind("metric,class,value\n", 0) == 0);
  CHECK(csv.find("kappa,,1.000000\n") != std::string::npos);
  std::size_t f1_rows = 0;
  for (std::size_t pos = 0; (pos = csv.find("\nf1,", pos)) != std::string::npos; ++pos) ++f1_rows;
  CHECK(f1_rows == 5);
  CHECK(viptt::format_report_text(cm).find("Tuberculoma") != std::string::npos);
}
