// SPDX-License-Identifier: Apache-2.0
#include "viptt/metrics.hpp"

#include <array>
#include <cstdio>

#include "viptt/error.hpp"

namespace viptt {

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void require_nonempty(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorCode::InvalidArgument, "confusion matrix is empty");
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : k_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw Error(ErrorCode::InvalidArgument, "confusion matrix needs K >= 1");
}

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> counts)
    : k_(num_classes), counts_(std::move(counts)) {
  if (num_classes == 0 || counts_.size() != k_ * k_) throw Error(ErrorCode::LengthMismatch, "confusion matrix needs K*K counts");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t pred, std::uint64_t n) { counts_.at(truth * k_ + pred) += n; }

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

std::uint64_t ConfusionMatrix::trace() const noexcept {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < k_; ++i) s += counts_[i * k_ + i];
  return s;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < k_; ++j) s += at(truth, j);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t pred) const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < k_; ++i) s += at(i, pred);
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, std::size_t num_classes) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(y_true.size()) + " labels vs " + std::to_string(y_pred.size()) +
                                               " predictions");
  }
  if (y_true.empty()) throw Error(ErrorCode::LengthMismatch, "no samples");
  ConfusionMatrix cm(num_classes);
  for (std::size_t t = 0; t < y_true.size(); ++t) {
    const int a = y_true[t];
    const int b = y_pred[t];
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= num_classes || static_cast<std::size_t>(b) >= num_classes) {
      throw Error(ErrorCode::LabelOutOfRange, "sample " + std::to_string(t) + " has class outside [0, " +
                                                  std::to_string(num_classes) + ")");
    }
    cm.add(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
  }
  return cm;
}

KappaResult cohen_kappa(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  const auto n = static_cast<double>(cm.total());
  KappaResult r;
  r.p0 = static_cast<double>(cm.trace()) / n;
  for (std::size_t i = 0; i < cm.num_classes(); ++i) {
    r.pe += (static_cast<double>(cm.row_sum(i)) / n) * (static_cast<double>(cm.col_sum(i)) / n);
  }
  if (r.pe >= 1.0) {
    if (r.p0 == 1.0) {
      r.kappa = 1.0;
      return r;
    }
    throw Error(ErrorCode::DegenerateMarginals, "chance agreement is 1 but observed agreement is not");
  }
  r.kappa = (r.p0 - r.pe) / (1.0 - r.pe);
  return r;
}

double accuracy(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  return static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
}

std::vector<double> per_class_f1(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  std::vector<double> f1(cm.num_classes(), 0.0);
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    const auto tp = static_cast<double>(cm.at(c, c));
    const auto col = static_cast<double>(cm.col_sum(c));
    const auto row = static_cast<double>(cm.row_sum(c));
    if (col == 0.0 || row == 0.0) continue;
    const double precision = tp / col;
    const double recall = tp / row;
    if (precision + recall == 0.0) continue;
    f1[c] = 2.0 * precision * recall / (precision + recall);
  }
  return f1;
}

std::string class_name(std::size_t c, std::size_t num_classes) {
  static constexpr std::array<const char*, 5> kTbTypes = {"Infiltrative", "Focal", "Tuberculoma", "Miliary",
                                                          "Fibro-cavernous"};
  if (num_classes == kTbTypes.size() && c < kTbTypes.size()) return kTbTypes[c];
  return "class_" + std::to_string(c);
}

std::string format_report_text(const ConfusionMatrix& cm) {
  const KappaResult k = cohen_kappa(cm);
  const auto f1 = per_class_f1(cm);
  std::string out;
  out += "samples  " + std::to_string(cm.total()) + "\n";
  out += "kappa    " + fixed(k.kappa) + "  (p0 " + fixed(k.p0) + ", pe " + fixed(k.pe) + ")\n";
  out += "accuracy " + fixed(accuracy(cm)) + "\n";
  out += "per-class F1:\n";
  for (std::size_t c = 0; c < f1.size(); ++c) {
    out += "  " + class_name(c, f1.size()) + "  " + fixed(f1[c]) + "  (support " + std::to_string(cm.row_sum(c)) + ")\n";
  }
  out += "confusion (rows = truth, cols = prediction):\n";
  for (std::size_t i = 0; i < cm.num_classes(); ++i) {
    out += " ";
    for (std::size_t j = 0; j < cm.num_classes(); ++j) out += " " + std::to_string(cm.at(i, j));
    out += "\n";
  }
  return out;
}

std::string format_report_csv(const ConfusionMatrix& cm) {
  const KappaResult k = cohen_kappa(cm);
  const auto f1 = per_class_f1(cm);
  std::string out = "metric,class,value\n";
  out += "kappa,,";
  out += fixed(k.kappa, 6) + "\n";
  out += "accuracy,,";
  out += fixed(accuracy(cm), 6) + "\n";
  for (std::size_t c = 0; c < f1.size(); ++c) out += "f1," + class_name(c, f1.size()) + "," + fixed(f1[c], 6) + "\n";
  return out;
}

}  // namespace viptt
