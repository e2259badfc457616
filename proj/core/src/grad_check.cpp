// SPDX-License-Identifier: Apache-2.0
#include "viptt/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "viptt/random.hpp"

namespace viptt {

GradCheckReport compare_with_finite_differences(const std::function<double()>& objective, std::span<const GradProbe> probes,
                                                const GradCheckOptions& options) {
  GradCheckReport report;
  SplitMix64 rng(options.seed);
  const double eps = options.epsilon;
  const auto& signature = options.kink_signature;
  std::uint64_t base_signature = 0;
  if (signature) {
    objective();
    base_signature = signature();
  }
  for (const GradProbe& probe : probes) {
    std::vector<std::size_t> idx(probe.values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (options.max_entries_per_tensor != 0 && idx.size() > options.max_entries_per_tensor) {
      shuffle(std::span<std::size_t>(idx), rng);
      idx.resize(options.max_entries_per_tensor);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) {
      const double saved = probe.values[i];
      probe.values[i] = saved + eps;
      const double up = objective();
      bool kinked = signature && signature() != base_signature;
      probe.values[i] = saved - eps;
      const double down = objective();
      kinked = kinked || (signature && signature() != base_signature);
      probe.values[i] = saved;
      if (kinked) {
        ++report.skipped_at_kinks;
        continue;
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = probe.analytic[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.probes;
      if (rel > report.max_rel_error || !std::isfinite(rel)) {
        report.max_rel_error = std::isfinite(rel) ? rel : HUGE_VAL;
        report.worst_tensor = probe.name;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

GradCheckReport grad_check_layer(Layer& layer, const Tensor& input, const GradCheckOptions& options) {
  Tensor x = input;
  Tensor out = layer.forward(x, true);
  SplitMix64 rng(derive_seed(options.seed, 0x6c61796572ULL));
  Tensor r(out.shape());
  for (double& v : r.data()) v = rng.uniform(-1.0, 1.0);

  layer.zero_grad();
  const Tensor dx = layer.backward(r);

  // Snapshot analytic gradients before the objective re-runs forward.
  std::vector<Tensor> analytic;
  std::vector<GradProbe> probes;
  auto params = layer.parameters();
  analytic.reserve(params.size() + 1);
  for (Parameter* p : params) analytic.push_back(p->grad);
  analytic.push_back(dx);
  for (std::size_t i = 0; i < params.size(); ++i) {
    probes.push_back({layer.kind() + "." + params[i]->name, params[i]->value.data(), analytic[i].data()});
  }
  probes.push_back({layer.kind() + ".input", x.data(), analytic.back().data()});

  const auto objective = [&] {
    const Tensor y = layer.forward(x, true);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  GradCheckOptions opt = options;
  if (!opt.kink_signature) opt.kink_signature = [&layer] { return layer.kink_signature(); };
  GradCheckReport report = compare_with_finite_differences(objective, probes, opt);
  layer.zero_grad();
  return report;
}

double grad_check(Layer& layer, const Tensor& input, double epsilon) {
  GradCheckOptions opts;
  opts.epsilon = epsilon;
  return grad_check_layer(layer, input, opts).max_rel_error;
}

}  // namespace viptt
