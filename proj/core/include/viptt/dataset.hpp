// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "viptt/tensor.hpp"
#include "viptt/volume_io.hpp"

namespace viptt {

struct SampleRecord {
  std::filesystem::path data_path;
  int label = 0;
  /// Optional in-memory copy of the sample; when present, loading skips disk.
  std::shared_ptr<const Volume> cached;
};

struct Dataset {
  std::vector<SampleRecord> records;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  std::vector<int> labels() const;
  std::vector<std::size_t> class_counts() const;
};

/// Reads a `path,label` CSV. Relative paths resolve against the manifest's
/// directory. K is max label + 1 unless `num_classes` is given.
Dataset load_manifest(const std::filesystem::path& path, std::optional<std::size_t> num_classes = std::nullopt);

/// Writes a manifest; paths inside `base_dir` are written relative to it.
void write_manifest(const std::filesystem::path& path, const Dataset& ds);

/// Loads every sample into memory so later epochs skip disk reads.
Dataset preload(Dataset ds);

/// Loads one sample (from cache or disk) as a volume.
Volume load_sample(const SampleRecord& record);

/// Per class c with n_c members, round(train_fraction * n_c) go to train.
/// Members are chosen by a seeded shuffle; output keeps manifest order.
std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double train_fraction, std::uint64_t seed);

/// Balanced inverse-frequency weights w_c = N / (K * n_c).
std::vector<double> class_weights(std::span<const int> labels, std::size_t num_classes);

struct AugmentSpec {
  std::vector<double> angles_deg{-20.0, -10.0, -5.0, 0.0, 5.0, 10.0, 20.0};
};

/// One batch slot: which record and which rotation angle it gets.
struct BatchPlan {
  std::vector<std::size_t> indices;
  std::vector<double> angles;
};

/// Fixes record order and augmentation draws for one epoch. Callers derive
/// the per-epoch seed as seed + epoch.
std::vector<BatchPlan> plan_epoch(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                                  const std::optional<AugmentSpec>& augment);

struct Batch {
  Tensor inputs;  // (B, D, H, W)
  std::vector<int> labels;
  std::vector<std::size_t> indices;
  std::vector<double> angles;
};

Batch load_batch(const Dataset& ds, const BatchPlan& plan);

/// plan_epoch followed by load_batch on every slot.
std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                                const std::optional<AugmentSpec>& augment);

}  // namespace viptt
