// SPDX-License-Identifier: Apache-2.0
#include "viptt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "viptt/error.hpp"
#include "viptt/random.hpp"

namespace viptt {

namespace {

enum class RadiusMode { Grow, Shrink, Pulse, Steady };
enum class BrightMode { Steady, Brighten, Dim };

struct Trajectory {
  RadiusMode radius;
  BrightMode bright;
  double direction;  // radians; NaN-free, only used when moving
  bool moving;
};

Trajectory trajectory_for(const SyntheticSpec& spec, int label) {
  const auto k = static_cast<double>(spec.num_classes());
  if (spec.family == SignalFamily::MovingBlob) {
    return {static_cast<RadiusMode>(label % 4), static_cast<BrightMode>((label / 4) % 3),
            2.0 * std::numbers::pi * static_cast<double>(label) / k, true};
  }
  static constexpr Trajectory kLesion[] = {
      {RadiusMode::Grow, BrightMode::Steady, 0.0, false},   {RadiusMode::Shrink, BrightMode::Steady, 0.0, false},
      {RadiusMode::Pulse, BrightMode::Steady, 0.0, false},  {RadiusMode::Steady, BrightMode::Brighten, 0.0, false},
      {RadiusMode::Steady, BrightMode::Dim, 0.0, false},
  };
  return kLesion[static_cast<std::size_t>(label) % 5];
}

double radius_factor(RadiusMode mode, double u) {
  switch (mode) {
    case RadiusMode::Grow: return 0.45 + 1.1 * u;
    case RadiusMode::Shrink: return 1.55 - 1.1 * u;
    case RadiusMode::Pulse: return 0.45 + 1.1 * std::sin(std::numbers::pi * u);
    case RadiusMode::Steady: return 1.0;
  }
  return 1.0;
}

double bright_factor(BrightMode mode, double u) {
  switch (mode) {
    case BrightMode::Steady: return 1.0;
    case BrightMode::Brighten: return 0.35 + 0.65 * u;
    case BrightMode::Dim: return 1.0 - 0.65 * u;
  }
  return 1.0;
}

}  // namespace

Volume synthesize_sample(const SyntheticSpec& spec, int label, std::uint64_t seed) {
  if (label < 0 || static_cast<std::size_t>(label) >= spec.num_classes()) {
    throw Error(ErrorCode::LabelOutOfRange, "synthetic label " + std::to_string(label));
  }
  if (spec.depth == 0 || spec.height < 4 || spec.width < 4) throw Error(ErrorCode::InvalidArgument, "synthetic dims too small");

  SplitMix64 rng(seed);
  const Trajectory traj = trajectory_for(spec, label);
  const double scale = static_cast<double>(std::min(spec.height, spec.width));
  const double base_radius = scale * rng.uniform(0.20, 0.26);
  const double base_bright = rng.uniform(0.65, 0.9);
  const double cy0 = (static_cast<double>(spec.height) - 1.0) / 2.0;
  const double cx0 = (static_cast<double>(spec.width) - 1.0) / 2.0;

  // Path midpoint jitters around the frame center; the path is symmetric
  // about it so the blob stays inside the frame.
  const double jitter = scale * 0.06;
  const double my = cy0 + rng.uniform(-jitter, jitter);
  const double mx = cx0 + rng.uniform(-jitter, jitter);
  double travel = 0.0;
  double dir = traj.direction;
  if (traj.moving) {
    travel = scale * 0.35;
  } else {
    travel = scale * 0.08;
    dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  const double body_ry = static_cast<double>(spec.height) * rng.uniform(0.38, 0.46);
  const double body_rx = static_cast<double>(spec.width) * rng.uniform(0.40, 0.48);

  Volume vol(spec.depth, spec.height, spec.width, ValueDomain::UnitNormalized);
  for (std::size_t d = 0; d < spec.depth; ++d) {
    const double u = spec.depth > 1 ? static_cast<double>(d) / static_cast<double>(spec.depth - 1) : 0.5;
    const double by = my + (u - 0.5) * travel * std::sin(dir);
    const double bx = mx + (u - 0.5) * travel * std::cos(dir);
    const double r = base_radius * radius_factor(traj.radius, u);
    const double a = base_bright * bright_factor(traj.bright, u);
    for (std::size_t h = 0; h < spec.height; ++h) {
      for (std::size_t w = 0; w < spec.width; ++w) {
        const double dy = static_cast<double>(h) - by;
        const double dx = static_cast<double>(w) - bx;
        const double dist = std::sqrt(dy * dy + dx * dx);
        double v = spec.background;
        if (spec.family == SignalFamily::Lesion) {
          const double ey = (static_cast<double>(h) - cy0) / body_ry;
          const double ex = (static_cast<double>(w) - cx0) / body_rx;
          if (ey * ey + ex * ex <= 1.0) v += 0.15;
        }
        v += a / (1.0 + std::exp((dist - r) / 0.7));
        if (spec.noise_std > 0.0) v += spec.noise_std * rng.normal();
        vol.at(d, h, w) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return vol;
}

namespace {

template <typename Sink>
Dataset generate(const SyntheticSpec& spec, std::uint64_t seed, Sink&& sink) {
  if (spec.num_classes() < 2) throw Error(ErrorCode::InvalidArgument, "synthetic spec needs at least 2 classes");
  Dataset ds;
  ds.num_classes = spec.num_classes();
  for (std::size_t c = 0; c < spec.num_classes(); ++c) {
    for (std::size_t i = 0; i < spec.samples_per_class[c]; ++i) {
      const std::uint64_t sample_seed = derive_seed(derive_seed(seed, c + 1), i + 1);
      Volume v = synthesize_sample(spec, static_cast<int>(c), sample_seed);
      ds.records.push_back(sink(c, i, std::move(v)));
    }
  }
  return ds;
}

}  // namespace

Dataset gen_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
  Dataset ds = generate(spec, seed, [&](std::size_t c, std::size_t i, Volume v) {
    char name[64];
    std::snprintf(name, sizeof name, "c%02zu_%04zu.vpt", c, i);
    const std::filesystem::path p = out_dir / name;
    write_tensor(p, v.to_tensor());
    return SampleRecord{p, static_cast<int>(c), nullptr};
  });
  write_manifest(out_dir / "manifest.csv", ds);
  return ds;
}

Dataset gen_synthetic_in_memory(const SyntheticSpec& spec, std::uint64_t seed) {
  return generate(spec, seed, [](std::size_t c, std::size_t i, Volume v) {
    // Round-trip through f32 so in-memory samples equal what disk would hold.
    for (double& x : v.data) x = static_cast<double>(static_cast<float>(x));
    char name[64];
    std::snprintf(name, sizeof name, "mem://c%02zu_%04zu", c, i);
    return SampleRecord{name, static_cast<int>(c), std::make_shared<const Volume>(std::move(v))};
  });
}

}  // namespace viptt
