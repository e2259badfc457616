// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "viptt/dataset.hpp"
#include "viptt/metrics.hpp"
#include "viptt/model.hpp"

namespace viptt {

struct TrainConfig {
  double lr_init = 0.001;
  std::size_t batch_size = 2;
  double plateau_factor = 0.1;
  std::size_t plateau_patience = 5;
  std::size_t early_stop_patience = 10;
  std::size_t max_epochs = 100;
  /// Minimum decrease in validation loss that counts as an improvement.
  double min_delta = 1e-6;
  /// Per-class loss weights; empty means uniform.
  std::vector<double> class_weights;
  std::optional<AugmentSpec> augment;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Reduce-on-plateau plus early stopping, both driven by validation loss.
/// The learning rate is cut after every `plateau_patience` consecutive
/// epochs without improvement; training stops once the streak reaches
/// `early_stop_patience`.
class PlateauSchedule {
 public:
  struct Decision {
    bool improved = false;
    bool reduce_lr = false;
    bool stop = false;
  };

  PlateauSchedule(std::size_t plateau_patience, std::size_t early_stop_patience, double min_delta);

  Decision observe(double val_loss);
  double best() const noexcept { return best_; }
  std::size_t stale_epochs() const noexcept { return stale_; }

 private:
  std::size_t plateau_patience_;
  std::size_t early_stop_patience_;
  double min_delta_;
  double best_;
  std::size_t stale_ = 0;
  std::size_t since_reduce_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // rate used during this epoch
  double val_kappa = 0.0;
};

struct History {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

struct TrainResult {
  Model model;  // weights from the best validation-loss epoch
  History history;
};

struct TrainHooks {
  /// Replaces the measured validation loss (used to drive the schedule with
  /// a scripted trace).
  std::function<double(std::size_t epoch, double measured)> val_loss_override;
  std::function<void(const EpochRecord&)> on_epoch;
  /// Checked after each epoch's bookkeeping; true ends training there.
  std::function<bool(const EpochRecord&)> stop_requested;
};

struct Evaluation {
  Tensor probs;  // (N, K) in dataset order
  std::vector<int> labels;
  std::vector<int> predictions;  // argmax, ties to the lowest index
  double loss = 0.0;             // unweighted mean cross-entropy
  ConfusionMatrix confusion{2};
};

/// Runs the model over every record (in dataset order) without augmentation.
Evaluation evaluate(Model& model, const Dataset& ds, std::size_t batch_size = 8);

/// Mini-batch SGD with weighted cross-entropy, per-epoch validation, LR
/// plateau decay, early stopping and best-weight retention.
TrainResult train(Model model, const Dataset& train_ds, const Dataset& val_ds, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

int argmax_row(const Tensor& probs, std::size_t row);

/// `epoch,train_loss,val_loss,lr,val_kappa` with full round-trip precision.
void write_history_csv(const std::filesystem::path& path, const History& history);

}  // namespace viptt
