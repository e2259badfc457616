// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "viptt/tensor.hpp"

namespace viptt {

struct LossResult {
  double loss = 0.0;
  Tensor grad_logits;  // (batch, K), gradient of the mean loss w.r.t. logits
  Tensor probs;        // (batch, K)
};

/// Class-weighted categorical cross-entropy on probabilities:
///   loss = (1/B) sum_b w[y_b] * -ln p_b[y_b].
/// The returned gradient is w.r.t. the logits that produced `probs` through a
/// softmax, i.e. (w[y_b] / B) * (p_b - onehot(y_b)). Empty `weights` means 1.
/// Throws PROB_NOT_NORMALIZED if a row does not sum to 1 within 1e-9.
LossResult weighted_cross_entropy(const Tensor& probs, std::span<const int> labels, std::span<const double> weights);

/// Fused softmax + weighted cross-entropy from raw logits using
/// log-sum-exp; `probs` comes from the same stabilized computation.
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels, std::span<const double> weights);

}  // namespace viptt
