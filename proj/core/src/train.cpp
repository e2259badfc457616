// SPDX-License-Identifier: Apache-2.0
#include "viptt/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "viptt/error.hpp"
#include "viptt/loss.hpp"

namespace viptt {

void TrainConfig::validate() const {
  if (!(lr_init > 0.0)) throw Error(ErrorCode::BadConfig, "lr must be positive");
  if (batch_size == 0) throw Error(ErrorCode::BadConfig, "batch_size must be >= 1");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw Error(ErrorCode::BadConfig, "plateau_factor must lie in (0, 1)");
  if (plateau_patience == 0 || early_stop_patience == 0) throw Error(ErrorCode::BadConfig, "patiences must be >= 1");
  if (max_epochs == 0) throw Error(ErrorCode::BadConfig, "max_epochs must be >= 1");
  for (double w : class_weights) {
    if (!(w > 0.0)) throw Error(ErrorCode::BadConfig, "class weights must be positive");
  }
}

PlateauSchedule::PlateauSchedule(std::size_t plateau_patience, std::size_t early_stop_patience, double min_delta)
    : plateau_patience_(plateau_patience),
      early_stop_patience_(early_stop_patience),
      min_delta_(min_delta),
      best_(std::numeric_limits<double>::infinity()) {}

PlateauSchedule::Decision PlateauSchedule::observe(double val_loss) {
  Decision d;
  if (val_loss < best_ - min_delta_) {
    best_ = val_loss;
    stale_ = 0;
    since_reduce_ = 0;
    d.improved = true;
    return d;
  }
  ++stale_;
  ++since_reduce_;
  if (stale_ >= early_stop_patience_) {
    d.stop = true;
    return d;
  }
  if (since_reduce_ >= plateau_patience_) {
    d.reduce_lr = true;
    since_reduce_ = 0;
  }
  return d;
}

int argmax_row(const Tensor& probs, std::size_t row) {
  const std::size_t k = probs.dim(1);
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j) {
    if (probs[row * k + j] > probs[row * k + best]) best = j;
  }
  return static_cast<int>(best);
}

namespace {

void check_compatible(const Model& model, const Dataset& ds, const char* which) {
  if (ds.empty()) throw Error(ErrorCode::EmptyDataset, std::string(which) + " dataset is empty");
  if (ds.num_classes != model.config().num_classes) {
    throw Error(ErrorCode::ShapeMismatch, std::string(which) + " dataset has " + std::to_string(ds.num_classes) +
                                              " classes, model has " + std::to_string(model.config().num_classes));
  }
}

}  // namespace

Evaluation evaluate(Model& model, const Dataset& ds, std::size_t batch_size) {
  check_compatible(model, ds, "evaluation");
  const std::size_t k = model.config().num_classes;
  Evaluation ev;
  ev.probs = Tensor({ds.size(), k});
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    BatchPlan plan;
    for (std::size_t i = start; i < std::min(ds.size(), start + batch_size); ++i) {
      plan.indices.push_back(i);
      plan.angles.push_back(0.0);
    }
    Batch batch = load_batch(ds, plan);
    const LossResult r = softmax_cross_entropy(model.logits(batch.inputs, false), batch.labels, {});
    loss_sum += r.loss * static_cast<double>(batch.labels.size());
    for (std::size_t b = 0; b < batch.labels.size(); ++b) {
      for (std::size_t j = 0; j < k; ++j) ev.probs[(start + b) * k + j] = r.probs[b * k + j];
      ev.labels.push_back(batch.labels[b]);
      ev.predictions.push_back(argmax_row(r.probs, b));
    }
  }
  ev.loss = loss_sum / static_cast<double>(ds.size());
  ev.confusion = confusion_matrix(ev.labels, ev.predictions, k);
  return ev;
}

TrainResult train(Model model, const Dataset& train_ds, const Dataset& val_ds, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  check_compatible(model, train_ds, "training");
  check_compatible(model, val_ds, "validation");
  if (!cfg.class_weights.empty() && cfg.class_weights.size() != model.config().num_classes) {
    throw Error(ErrorCode::BadConfig, "class weight count does not match K");
  }

  PlateauSchedule schedule(cfg.plateau_patience, cfg.early_stop_patience, cfg.min_delta);
  History history;
  Model best = model;
  double lr = cfg.lr_init;
  const std::vector<Layer*> layers = model.layers();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const BatchPlan& plan : plan_epoch(train_ds, cfg.batch_size, cfg.seed + epoch, cfg.augment)) {
      Batch batch = load_batch(train_ds, plan);
      const LossResult r = softmax_cross_entropy(model.logits(batch.inputs, true), batch.labels, cfg.class_weights);
      model.backward(r.grad_logits);
      sgd_step(layers, lr);
      loss_sum += r.loss * static_cast<double>(batch.labels.size());
    }

    const Evaluation ev = evaluate(model, val_ds, std::max<std::size_t>(cfg.batch_size, 8));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_ds.size());
    rec.val_loss = hooks.val_loss_override ? hooks.val_loss_override(epoch, ev.loss) : ev.loss;
    rec.lr = lr;
    rec.val_kappa = cohen_kappa(ev.confusion).kappa;
    history.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);

    const auto decision = schedule.observe(rec.val_loss);
    if (decision.improved) {
      best = model;
      history.best_epoch = epoch;
      history.best_val_loss = rec.val_loss;
    }
    if (decision.stop) {
      history.stopped_early = true;
      break;
    }
    if (hooks.stop_requested && hooks.stop_requested(rec)) break;
    if (decision.reduce_lr) lr *= cfg.plateau_factor;
  }
  return {std::move(best), std::move(history)};
}

void write_history_csv(const std::filesystem::path& path, const History& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << "epoch,train_loss,val_loss,lr,val_kappa\n";
  char line[256];
  for (const auto& e : history.epochs) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss, e.lr, e.val_kappa);
    out << line;
  }
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

}  // namespace viptt
