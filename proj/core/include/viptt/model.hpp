// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "viptt/grad_check.hpp"
#include "viptt/layers.hpp"
#include "viptt/lstm.hpp"

namespace viptt {

enum class ExtractorKind {
  /// Two conv3x3-relu-maxpool blocks then global average pooling.
  Tiny,
  /// The 13-conv VGG-16 convolutional trunk, globally average-pooled to 512.
  /// Randomly initialized: shape-faithful, not weight-faithful.
  Vgg16Shape,
};

enum class Component { ChannelMapper, Extractor, Lstm, Head };

std::string to_string(ExtractorKind kind);
ExtractorKind parse_extractor_kind(const std::string& text);
std::string to_string(Component component);

struct ModelConfig {
  std::size_t depth = 70;
  std::size_t height = 224;
  std::size_t width = 224;
  ExtractorKind extractor = ExtractorKind::Tiny;
  std::size_t feature_dim = 64;
  std::size_t lstm_units = 256;
  std::size_t dense_units = 1024;
  std::size_t num_classes = 5;

  /// Throws BAD_CONFIG on an invalid combination.
  void validate() const;

  /// Stable `key=value` form used by checkpoints.
  std::map<std::string, std::string> to_key_values() const;
  static ModelConfig from_key_values(const std::map<std::string, std::string>& kv);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// A named view of one learnable tensor, for checkpoints and tests.
struct NamedParameter {
  std::string name;
  Component component;
  Parameter* param;
};

/// The hybrid per-frame CNN -> LSTM classifier:
///   (B, D, H, W) -> per frame: 1x1 conv 1->3 channels -> extractor ->
///   feature vector; frames stacked to (B, D, F) -> LSTM last hidden state ->
///   dense(dense_units, relu) -> dense(K) -> softmax.
/// The extractor weights are shared across every frame.
class Model {
 public:
  /// Deterministic initialization from seed.
  static Model build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }

  /// (B, K) logits; caches activations for backward.
  Tensor logits(const Tensor& input, bool training);
  /// (B, K) class probabilities (rows sum to 1).
  Tensor forward(const Tensor& input, bool training);
  /// Backpropagates d(loss)/d(logits) through every component, accumulating
  /// parameter gradients; returns d(loss)/d(input) shaped like the input.
  Tensor backward(const Tensor& grad_logits);

  /// Per-frame feature vectors (B, D, F) for the given input.
  Tensor frame_features(const Tensor& input);

  /// Replaces the final dense layer with a freshly initialized K-way layer.
  /// Everything else is untouched. The head stream is salted so that the
  /// same seed used for build() still yields a different head.
  void replace_head(std::size_t num_classes, std::uint64_t seed);

  void set_trainable(Component component, bool flag);
  bool trainable(Component component) const;

  /// All layers with parameters, in forward order (for sgd_step).
  std::vector<Layer*> layers();
  std::vector<NamedParameter> named_parameters();
  void zero_grad();
  /// Combined kink signature of every ReLU and pooling layer.
  std::uint64_t kink_signature() const;

 private:
  Model(ModelConfig config);
  void check_input(const Tensor& input) const;

  ModelConfig config_;
  Conv2d channel_mapper_;
  Sequential extractor_;
  Lstm lstm_;
  Dense hidden_;
  Relu hidden_act_;
  Dense out_;
  Shape input_shape_;
};

/// Copy of `model` with its head replaced (see Model::replace_head).
Model replace_head(const Model& model, std::size_t num_classes, std::uint64_t seed);

/// Finite-difference check of the whole network under the weighted
/// softmax cross-entropy objective; probes every parameter tensor and the
/// input. Probes that straddle a ReLU or pooling kink are excluded.
GradCheckReport grad_check_model(Model& model, const Tensor& input, std::span<const int> labels,
                                 std::span<const double> weights, const GradCheckOptions& options = {});

}  // namespace viptt
