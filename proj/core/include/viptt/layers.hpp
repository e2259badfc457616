// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "viptt/random.hpp"
#include "viptt/tensor.hpp"

namespace viptt {

/// A learnable tensor and its accumulated gradient (same shape).
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
};

/// Base class for hand-differentiated layers. forward caches what backward
/// needs; backward returns d(loss)/d(input) and accumulates into each
/// parameter's grad. Gradients are computed whether or not the layer is
/// trainable; `trainable` only gates sgd_step.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Tensor forward(const Tensor& input, bool training) = 0;
  virtual Tensor backward(const Tensor& upstream) = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  virtual std::vector<Parameter*> parameters() { return {}; }
  std::vector<const Parameter*> parameters() const;

  void zero_grad();

  /// Hash of the piecewise branches taken by the last forward (ReLU masks,
  /// pooling winners). Smooth layers return 0.
  virtual std::uint64_t kink_signature() const { return 0; }

  bool trainable = true;
};

enum class Padding { Same, Valid };

/// 2D cross-correlation, stride 1. Input (N, C_in, H, W); weight
/// (C_out, C_in, k, k); bias (C_out). Same padding zero-pads by k/2.
class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Padding padding = Padding::Same);

  std::string kind() const override { return "conv2d"; }
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& upstream) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

  void init_glorot(SplitMix64& rng);
  Parameter& weight() noexcept { return weight_; }
  Parameter& bias() noexcept { return bias_; }
  std::size_t in_channels() const noexcept { return in_channels_; }
  std::size_t out_channels() const noexcept { return out_channels_; }

 private:
  std::size_t in_channels_;
  std::size_t out_channels_;
  std::size_t kernel_;
  Padding padding_;
  Parameter weight_;
  Parameter bias_;
  std::optional<Tensor> input_;
};

class Relu final : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& upstream) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
  std::uint64_t kink_signature() const override;

 private:
  std::optional<Tensor> input_;
};

/// 2x2 max pooling, stride 2, over (N, C, H, W); odd trailing rows/cols drop.
/// Ties route the gradient to the first maximum in row-major order.
class MaxPool2d final : public Layer {
 public:
  std::string kind() const override { return "maxpool2d"; }
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& upstream) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2d>(*this); }
  std::uint64_t kink_signature() const override;

 private:
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
  bool ready_ = false;
};

/// (N, C, H, W) -> (N, C) by averaging over H and W.
class GlobalAvgPool final : public Layer {
 public:
  std::string kind() const override { return "global_avg_pool"; }
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& upstream) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }

 private:
  Shape input_shape_;
  bool ready_ = false;
};

/// y = W x + b over (N, in) -> (N, out); weight (out, in).
class Dense final : public Layer {
 public:
  Dense(std::size_t in_features, std::size_t out_features);

  std::string kind() const override { return "dense"; }
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& upstream) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

  void init_glorot(SplitMix64& rng);
  Parameter& weight() noexcept { return weight_; }
  Parameter& bias() noexcept { return bias_; }
  std::size_t in_features() const noexcept { return in_features_; }
  std::size_t out_features() const noexcept { return out_features_; }

 private:
  std::size_t in_features_;
  std::size_t out_features_;
  Parameter weight_;
  Parameter bias_;
  std::optional<Tensor> input_;
};

/// Row-wise softmax over (N, K) as a standalone layer. The training path
/// uses the fused softmax_cross_entropy instead.
class Softmax final : public Layer {
 public:
  std::string kind() const override { return "softmax"; }
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& upstream) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Softmax>(*this); }

 private:
  std::optional<Tensor> output_;
};

/// Ordered chain of owned layers with value semantics (copies deep-clone).
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor forward(const Tensor& input, bool training);
  Tensor backward(const Tensor& upstream);

  std::size_t size() const noexcept { return layers_.size(); }
  Layer& at(std::size_t i) { return *layers_.at(i); }
  const Layer& at(std::size_t i) const { return *layers_.at(i); }

  void set_trainable(bool flag);
  std::uint64_t kink_signature() const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Order-sensitive 64-bit mix used to build kink signatures.
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept;

/// Numerically stable row-wise softmax of (N, K) logits.
Tensor softmax(const Tensor& logits);

/// p <- p - lr * grad for every parameter of a trainable layer; all grads
/// (trainable or not) are then zeroed.
void sgd_step(std::span<Layer* const> layers, double lr);

/// Glorot-uniform fill: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, SplitMix64& rng);

}  // namespace viptt
