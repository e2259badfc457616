// SPDX-License-Identifier: Apache-2.0
#pragma once

// Definition-level metric oracles: agreement and chance agreement are
// computed by enumerating individual (truth, prediction) pairs rather than
// from confusion-matrix marginals.

#include <cstddef>
#include <vector>

namespace viptt::testing {

struct OracleMetrics {
  double kappa;
  double accuracy;
  std::vector<double> f1;
};

inline OracleMetrics oracle_metrics(const std::vector<int>& truth, const std::vector<int>& pred, std::size_t k) {
  const std::size_t n = truth.size();
  double agree = 0.0;
  for (std::size_t t = 0; t < n; ++t) agree += truth[t] == pred[t] ? 1.0 : 0.0;
  const double p0 = agree / static_cast<double>(n);
  // Chance agreement: probability that an independently drawn truth label
  // and an independently drawn prediction coincide, over all n*n pairs.
  double chance = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) chance += truth[a] == pred[b] ? 1.0 : 0.0;
  }
  const double pe = chance / (static_cast<double>(n) * static_cast<double>(n));
  OracleMetrics m;
  m.kappa = pe == 1.0 ? 1.0 : (p0 - pe) / (1.0 - pe);
  m.accuracy = p0;
  for (std::size_t c = 0; c < k; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const bool is_true = truth[t] == static_cast<int>(c);
      const bool is_pred = pred[t] == static_cast<int>(c);
      tp += is_true && is_pred;
      fp += !is_true && is_pred;
      fn += is_true && !is_pred;
    }
    // F1 = 2TP / (2TP + FP + FN); zero when the class never appears at all.
    const double denom = 2 * tp + fp + fn;
    m.f1.push_back(denom == 0 ? 0.0 : 2 * tp / denom);
  }
  return m;
}

}  // namespace viptt::testing
