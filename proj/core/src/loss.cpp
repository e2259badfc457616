// SPDX-License-Identifier: Apache-2.0
#include "viptt/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "viptt/error.hpp"

namespace viptt {

namespace {

void check_inputs(const Tensor& t, std::span<const int> labels, std::span<const double> weights) {
  if (t.rank() != 2 || t.dim(0) != labels.size() || t.dim(0) == 0) {
    throw Error(ErrorCode::ShapeMismatch, "loss expects (batch, K) with one label per row, got " +
                                              shape_to_string(t.shape()) + " and " + std::to_string(labels.size()) +
                                              " labels");
  }
  const std::size_t k = t.dim(1);
  if (!weights.empty() && weights.size() != k) {
    throw Error(ErrorCode::ShapeMismatch, "class weight count " + std::to_string(weights.size()) + " != K " + std::to_string(k));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(y));
  }
}

double weight_of(std::span<const double> weights, int y) { return weights.empty() ? 1.0 : weights[static_cast<std::size_t>(y)]; }

}  // namespace

LossResult weighted_cross_entropy(const Tensor& probs, std::span<const int> labels, std::span<const double> weights) {
  check_inputs(probs, labels, weights);
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  for (std::size_t b = 0; b < n; ++b) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double p = probs[b * k + j];
      if (!(p >= 0.0)) throw Error(ErrorCode::ProbNotNormalized, "negative or NaN probability in row " + std::to_string(b));
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw Error(ErrorCode::ProbNotNormalized, "row " + std::to_string(b) + " sums to " + std::to_string(s));
  }
  LossResult r;
  r.probs = probs;
  r.grad_logits = Tensor(probs.shape());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t b = 0; b < n; ++b) {
    const auto y = static_cast<std::size_t>(labels[b]);
    const double w = weight_of(weights, labels[b]);
    const double p = probs[b * k + y];
    r.loss += w * (p > 0.0 ? -std::log(p) : std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < k; ++j) {
      r.grad_logits[b * k + j] = w * inv_n * (probs[b * k + j] - (j == y ? 1.0 : 0.0));
    }
  }
  r.loss *= inv_n;
  return r;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels, std::span<const double> weights) {
  check_inputs(logits, labels, weights);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  LossResult r;
  r.probs = Tensor(logits.shape());
  r.grad_logits = Tensor(logits.shape());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t b = 0; b < n; ++b) {
    const double* z = logits.data().data() + b * k;
    const double m = *std::max_element(z, z + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(z[j] - m);
    const double log_norm = m + std::log(s);
    const auto y = static_cast<std::size_t>(labels[b]);
    const double w = weight_of(weights, labels[b]);
    r.loss += w * (log_norm - z[y]);
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(z[j] - log_norm);
      r.probs[b * k + j] = p;
      r.grad_logits[b * k + j] = w * inv_n * (p - (j == y ? 1.0 : 0.0));
    }
  }
  r.loss *= inv_n;
  return r;
}

}  // namespace viptt
