// SPDX-License-Identifier: Apache-2.0
#include "viptt/model.hpp"

#include <algorithm>
#include <charconv>

#include "viptt/error.hpp"
#include "viptt/loss.hpp"

namespace viptt {

namespace {

constexpr std::uint64_t kSaltMapper = 1;
constexpr std::uint64_t kSaltExtractor = 2;
constexpr std::uint64_t kSaltLstm = 3;
constexpr std::uint64_t kSaltHidden = 4;
constexpr std::uint64_t kSaltOut = 5;
constexpr std::uint64_t kSaltReplacedHead = 0x7265706c61636564ULL;

constexpr std::size_t kVggBlocks[5][3] = {{64, 64, 0}, {128, 128, 0}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};

std::size_t tiny_hidden_channels(std::size_t feature_dim) { return std::max<std::size_t>(1, feature_dim / 2); }

Sequential build_extractor(const ModelConfig& cfg, SplitMix64& rng) {
  Sequential seq;
  if (cfg.extractor == ExtractorKind::Tiny) {
    const std::size_t c1 = tiny_hidden_channels(cfg.feature_dim);
    seq.add<Conv2d>(3, c1, 3).init_glorot(rng);
    seq.add<Relu>();
    seq.add<MaxPool2d>();
    seq.add<Conv2d>(c1, cfg.feature_dim, 3).init_glorot(rng);
    seq.add<Relu>();
    seq.add<MaxPool2d>();
  } else {
    std::size_t in = 3;
    for (const auto& block : kVggBlocks) {
      for (std::size_t out : block) {
        if (out == 0) continue;
        seq.add<Conv2d>(in, out, 3).init_glorot(rng);
        seq.add<Relu>();
        in = out;
      }
      seq.add<MaxPool2d>();
    }
  }
  seq.add<GlobalAvgPool>();
  return seq;
}

std::size_t parse_size(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw Error(ErrorCode::BadConfig, "missing config key " + key);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc() || ptr != it->second.data() + it->second.size()) {
    throw Error(ErrorCode::BadConfig, "config key " + key + " is not an unsigned integer: " + it->second);
  }
  return v;
}

}  // namespace

std::string to_string(ExtractorKind kind) { return kind == ExtractorKind::Tiny ? "tiny" : "vgg16"; }

ExtractorKind parse_extractor_kind(const std::string& text) {
  if (text == "tiny") return ExtractorKind::Tiny;
  if (text == "vgg16" || text == "vgg16_shape") return ExtractorKind::Vgg16Shape;
  throw Error(ErrorCode::BadConfig, "unknown extractor `" + text + "` (expected tiny or vgg16)");
}

std::string to_string(Component component) {
  switch (component) {
    case Component::ChannelMapper: return "channel_mapper";
    case Component::Extractor: return "extractor";
    case Component::Lstm: return "lstm";
    case Component::Head: return "head";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (depth < 1 || height < 1 || width < 1) throw Error(ErrorCode::BadConfig, "input dims must be positive");
  if (num_classes < 2) throw Error(ErrorCode::BadConfig, "num_classes must be >= 2");
  if (feature_dim == 0 || lstm_units == 0 || dense_units == 0) throw Error(ErrorCode::BadConfig, "layer widths must be positive");
  if (extractor == ExtractorKind::Tiny) {
    if (height < 4 || width < 4) throw Error(ErrorCode::BadConfig, "tiny extractor needs H, W >= 4");
  } else {
    if (feature_dim != 512) throw Error(ErrorCode::BadConfig, "vgg16 extractor produces 512 features");
    if (height < 32 || width < 32) throw Error(ErrorCode::BadConfig, "vgg16 extractor needs H, W >= 32");
  }
}

std::map<std::string, std::string> ModelConfig::to_key_values() const {
  return {
      {"depth", std::to_string(depth)},
      {"height", std::to_string(height)},
      {"width", std::to_string(width)},
      {"extractor", to_string(extractor)},
      {"feature_dim", std::to_string(feature_dim)},
      {"lstm_units", std::to_string(lstm_units)},
      {"dense_units", std::to_string(dense_units)},
      {"num_classes", std::to_string(num_classes)},
  };
}

ModelConfig ModelConfig::from_key_values(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  c.depth = parse_size(kv, "depth");
  c.height = parse_size(kv, "height");
  c.width = parse_size(kv, "width");
  const auto it = kv.find("extractor");
  if (it == kv.end()) throw Error(ErrorCode::BadConfig, "missing config key extractor");
  c.extractor = parse_extractor_kind(it->second);
  c.feature_dim = parse_size(kv, "feature_dim");
  c.lstm_units = parse_size(kv, "lstm_units");
  c.dense_units = parse_size(kv, "dense_units");
  c.num_classes = parse_size(kv, "num_classes");
  c.validate();
  return c;
}

Model::Model(ModelConfig config)
    : config_(config),
      channel_mapper_(1, 3, 1),
      lstm_(config.feature_dim, config.lstm_units),
      hidden_(config.lstm_units, config.dense_units),
      out_(config.dense_units, config.num_classes) {}

Model Model::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m(config);
  SplitMix64 mapper_rng(derive_seed(seed, kSaltMapper));
  m.channel_mapper_.init_glorot(mapper_rng);
  SplitMix64 extractor_rng(derive_seed(seed, kSaltExtractor));
  m.extractor_ = build_extractor(config, extractor_rng);
  SplitMix64 lstm_rng(derive_seed(seed, kSaltLstm));
  m.lstm_.init(lstm_rng);
  SplitMix64 hidden_rng(derive_seed(seed, kSaltHidden));
  m.hidden_.init_glorot(hidden_rng);
  SplitMix64 out_rng(derive_seed(seed, kSaltOut));
  m.out_.init_glorot(out_rng);
  return m;
}

void Model::check_input(const Tensor& input) const {
  const Shape expected{config_.depth, config_.height, config_.width};
  if (input.rank() != 4 || input.dim(0) == 0 || !std::equal(expected.begin(), expected.end(), input.shape().begin() + 1)) {
    throw Error(ErrorCode::ShapeMismatch, "model expects (B, " + std::to_string(config_.depth) + ", " +
                                              std::to_string(config_.height) + ", " + std::to_string(config_.width) +
                                              "), got " + shape_to_string(input.shape()));
  }
}

Tensor Model::frame_features(const Tensor& input) {
  check_input(input);
  const std::size_t b = input.dim(0), d = input.dim(1);
  Tensor frames = input.reshaped({b * d, 1, config_.height, config_.width});
  Tensor mapped = channel_mapper_.forward(frames, false);
  Tensor features = extractor_.forward(mapped, false);
  return std::move(features).reshaped({b, d, config_.feature_dim});
}

Tensor Model::logits(const Tensor& input, bool training) {
  check_input(input);
  input_shape_ = input.shape();
  const std::size_t b = input.dim(0), d = input.dim(1);
  Tensor frames = input.reshaped({b * d, 1, config_.height, config_.width});
  Tensor mapped = channel_mapper_.forward(frames, training);
  Tensor features = extractor_.forward(mapped, training);
  Tensor sequence = std::move(features).reshaped({b, d, config_.feature_dim});
  Tensor last = lstm_.forward(sequence, training);
  Tensor hidden = hidden_act_.forward(hidden_.forward(last, training), training);
  return out_.forward(hidden, training);
}

Tensor Model::forward(const Tensor& input, bool training) { return softmax(logits(input, training)); }

Tensor Model::backward(const Tensor& grad_logits) {
  if (input_shape_.empty()) throw Error(ErrorCode::BackwardBeforeForward, "model: backward called before forward");
  const std::size_t b = input_shape_[0], d = input_shape_[1];
  Tensor g = out_.backward(grad_logits);
  g = hidden_.backward(hidden_act_.backward(g));
  g = lstm_.backward(g);
  g = std::move(g).reshaped({b * d, config_.feature_dim});
  g = extractor_.backward(g);
  g = channel_mapper_.backward(g);
  return std::move(g).reshaped(input_shape_);
}

void Model::replace_head(std::size_t num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw Error(ErrorCode::BadConfig, "replace_head needs K >= 2");
  const bool flag = out_.trainable;
  out_ = Dense(config_.dense_units, num_classes);
  SplitMix64 rng(derive_seed(seed, kSaltReplacedHead));
  out_.init_glorot(rng);
  out_.trainable = flag;
  config_.num_classes = num_classes;
}

void Model::set_trainable(Component component, bool flag) {
  switch (component) {
    case Component::ChannelMapper: channel_mapper_.trainable = flag; break;
    case Component::Extractor: extractor_.set_trainable(flag); break;
    case Component::Lstm: lstm_.trainable = flag; break;
    case Component::Head:
      hidden_.trainable = flag;
      out_.trainable = flag;
      break;
  }
}

bool Model::trainable(Component component) const {
  switch (component) {
    case Component::ChannelMapper: return channel_mapper_.trainable;
    case Component::Extractor: {
      for (std::size_t i = 0; i < extractor_.size(); ++i) {
        if (!extractor_.at(i).trainable) return false;
      }
      return true;
    }
    case Component::Lstm: return lstm_.trainable;
    case Component::Head: return hidden_.trainable && out_.trainable;
  }
  return false;
}

std::vector<Layer*> Model::layers() {
  std::vector<Layer*> out{&channel_mapper_};
  for (std::size_t i = 0; i < extractor_.size(); ++i) out.push_back(&extractor_.at(i));
  out.push_back(&lstm_);
  out.push_back(&hidden_);
  out.push_back(&hidden_act_);
  out.push_back(&out_);
  return out;
}

std::vector<NamedParameter> Model::named_parameters() {
  std::vector<NamedParameter> out;
  for (Parameter* p : channel_mapper_.parameters()) out.push_back({"channel_mapper." + p->name, Component::ChannelMapper, p});
  std::size_t conv = 0;
  for (std::size_t i = 0; i < extractor_.size(); ++i) {
    auto params = extractor_.at(i).parameters();
    if (params.empty()) continue;
    const std::string prefix = "extractor.conv" + std::to_string(conv++) + ".";
    for (Parameter* p : params) out.push_back({prefix + p->name, Component::Extractor, p});
  }
  for (Parameter* p : lstm_.parameters()) out.push_back({"lstm." + p->name, Component::Lstm, p});
  for (Parameter* p : hidden_.parameters()) out.push_back({"head.hidden." + p->name, Component::Head, p});
  for (Parameter* p : out_.parameters()) out.push_back({"head.out." + p->name, Component::Head, p});
  return out;
}

void Model::zero_grad() {
  for (Layer* l : layers()) l->zero_grad();
}

Model replace_head(const Model& model, std::size_t num_classes, std::uint64_t seed) {
  Model copy = model;
  copy.replace_head(num_classes, seed);
  return copy;
}

std::uint64_t Model::kink_signature() const {
  return hash_combine(extractor_.kink_signature(), hidden_act_.kink_signature());
}

GradCheckReport grad_check_model(Model& model, const Tensor& input, std::span<const int> labels,
                                 std::span<const double> weights, const GradCheckOptions& options) {
  Tensor x = input;
  model.zero_grad();
  const LossResult base = softmax_cross_entropy(model.logits(x, true), labels, weights);
  const Tensor dx = model.backward(base.grad_logits);

  auto named = model.named_parameters();
  std::vector<Tensor> analytic;
  analytic.reserve(named.size() + 1);
  for (const auto& np : named) analytic.push_back(np.param->grad);
  analytic.push_back(dx);
  std::vector<GradProbe> probes;
  for (std::size_t i = 0; i < named.size(); ++i) {
    probes.push_back({named[i].name, named[i].param->value.data(), analytic[i].data()});
  }
  probes.push_back({"input", x.data(), analytic.back().data()});

  const auto objective = [&] { return softmax_cross_entropy(model.logits(x, true), labels, weights).loss; };
  GradCheckOptions opt = options;
  if (!opt.kink_signature) opt.kink_signature = [&model] { return model.kink_signature(); };
  GradCheckReport report = compare_with_finite_differences(objective, probes, opt);
  model.zero_grad();
  return report;
}

}  // namespace viptt
