// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace viptt {

/// K x K counts; at(i, j) is the number of samples of true class i predicted
/// as class j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);
  /// Row-major K x K counts.
  ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> counts);

  std::size_t num_classes() const noexcept { return k_; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_.at(truth * k_ + pred); }
  void add(std::size_t truth, std::size_t pred, std::uint64_t n = 1);

  std::uint64_t total() const noexcept;
  std::uint64_t trace() const noexcept;
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t col_sum(std::size_t pred) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

struct KappaResult {
  double kappa = 0.0;
  double p0 = 0.0;  // observed agreement
  double pe = 0.0;  // chance agreement from the two marginals
};

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, std::size_t num_classes);

/// Cohen's kappa (p0 - pe) / (1 - pe), truth and prediction as the two raters.
KappaResult cohen_kappa(const ConfusionMatrix& cm);

double accuracy(const ConfusionMatrix& cm);

/// F1 per class; any 0/0 along the way yields 0 for that class.
std::vector<double> per_class_f1(const ConfusionMatrix& cm);

/// Display name for class `c` of a K-way problem. K = 5 uses the TB type
/// names; anything else uses `class_<c>`.
std::string class_name(std::size_t c, std::size_t num_classes);

/// Human-readable and CSV renderings of kappa, accuracy and per-class F1.
std::string format_report_text(const ConfusionMatrix& cm);
std::string format_report_csv(const ConfusionMatrix& cm);

}  // namespace viptt
