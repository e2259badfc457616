// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "viptt/layers.hpp"

namespace viptt {

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// Entries probed per tensor; 0 probes every entry. Probed entries are
  /// picked by a seeded draw when the tensor is larger than this.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
  /// When set, read after every objective evaluation. A probe whose +eps or
  /// -eps evaluation reports a different value than the unperturbed one
  /// straddles a kink (ReLU at 0, a pooling tie) and is excluded.
  std::function<std::uint64_t()> kink_signature;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t probes = 0;
  std::size_t skipped_at_kinks = 0;
};

/// One tensor to probe: the live values the objective reads and the
/// analytic gradient to compare against.
struct GradProbe {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

/// Central differences (f(v+eps) - f(v-eps)) / 2eps against the analytic
/// gradient, relative error |a - n| / max(|a|, |n|, 1e-12), maximized.
/// Each probed value is restored bit-exactly afterwards.
GradCheckReport compare_with_finite_differences(const std::function<double()>& objective, std::span<const GradProbe> probes,
                                                const GradCheckOptions& options);

/// Checks a single layer under the objective f = sum(r * layer(x)) with a
/// fixed random r: every parameter and the input gradient are probed.
/// Kink tracking uses the layer's own signature unless options supply one.
GradCheckReport grad_check_layer(Layer& layer, const Tensor& input, const GradCheckOptions& options = {});

/// Convenience form returning only the maximum relative error.
double grad_check(Layer& layer, const Tensor& input, double epsilon);

}  // namespace viptt
