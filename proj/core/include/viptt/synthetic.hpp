// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "viptt/dataset.hpp"
#include "viptt/volume_io.hpp"

namespace viptt {

/// Which kind of frame stack to synthesize.
///  - MovingBlob: "action clips". Class c moves a soft disk along direction
///    2*pi*c/K while its radius and brightness follow a class-specific
///    trajectory (grow / shrink / pulse / steady x steady / brighten / dim).
///  - Lesion: "scans". A mostly static disk over an elliptical body whose
///    radius or brightness evolves across depth; five classes.
/// In both families any single frame is ambiguous between classes; only the
/// evolution across depth identifies the label.
enum class SignalFamily { MovingBlob, Lesion };

struct SyntheticSpec {
  std::vector<std::size_t> samples_per_class{10, 10, 10};
  std::size_t depth = 8;
  std::size_t height = 32;
  std::size_t width = 32;
  SignalFamily family = SignalFamily::MovingBlob;
  double noise_std = 0.05;
  double background = 0.1;

  std::size_t num_classes() const noexcept { return samples_per_class.size(); }
};

/// Renders one sample of class `label`; deterministic in (spec, label, seed).
Volume synthesize_sample(const SyntheticSpec& spec, int label, std::uint64_t seed);

/// Writes one VPT1 tensor per sample plus `manifest.csv` into out_dir and
/// returns the dataset (records point at the written files).
Dataset gen_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed, const std::filesystem::path& out_dir);

/// Same samples as gen_synthetic_dataset but kept in memory only.
Dataset gen_synthetic_in_memory(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace viptt
