// SPDX-License-Identifier: Apache-2.0
#include "viptt/layers.hpp"

#include <algorithm>
#include <cmath>

#include "viptt/error.hpp"

namespace viptt {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* who) {
  if (t.rank() != rank) {
    throw Error(ErrorCode::ShapeMismatch, std::string(who) + " expects rank " + std::to_string(rank) + " input, got " +
                                              shape_to_string(t.shape()));
  }
}

void require_shape(const Tensor& t, const Shape& expected, const char* who) {
  if (t.shape() != expected) {
    throw Error(ErrorCode::ShapeMismatch, std::string(who) + " expects " + shape_to_string(expected) + ", got " +
                                              shape_to_string(t.shape()));
  }
}

[[noreturn]] void backward_before_forward(const char* who) {
  throw Error(ErrorCode::BackwardBeforeForward, std::string(who) + ": backward called before forward");
}

}  // namespace

std::vector<const Parameter*> Layer::parameters() const {
  auto mutable_params = const_cast<Layer*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

void Layer::zero_grad() {
  for (Parameter* p : parameters()) p->grad.fill(0.0);
}

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, SplitMix64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data()) v = rng.uniform(-limit, limit);
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Padding padding)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      padding_(padding),
      weight_("weight", Tensor({out_channels, in_channels, kernel, kernel})),
      bias_("bias", Tensor({out_channels})) {
  if (in_channels == 0 || out_channels == 0 || kernel == 0) throw Error(ErrorCode::BadConfig, "conv2d with zero extent");
  if (padding == Padding::Same && kernel % 2 == 0) throw Error(ErrorCode::BadConfig, "same padding needs an odd kernel");
}

void Conv2d::init_glorot(SplitMix64& rng) {
  const std::size_t area = kernel_ * kernel_;
  glorot_uniform(weight_.value, in_channels_ * area, out_channels_ * area, rng);
  bias_.value.fill(0.0);
}

Tensor Conv2d::forward(const Tensor& input, bool) {
  require_rank(input, 4, "conv2d");
  if (input.dim(1) != in_channels_) {
    throw Error(ErrorCode::ShapeMismatch, "conv2d expects " + std::to_string(in_channels_) + " channels, got " +
                                              shape_to_string(input.shape()));
  }
  const std::size_t n = input.dim(0);
  const std::size_t h = input.dim(2);
  const std::size_t w = input.dim(3);
  const std::size_t k = kernel_;
  const std::ptrdiff_t pad = padding_ == Padding::Same ? static_cast<std::ptrdiff_t>(k / 2) : 0;
  if (padding_ == Padding::Valid && (h < k || w < k)) throw Error(ErrorCode::ShapeMismatch, "conv2d input smaller than kernel");
  const std::size_t oh = padding_ == Padding::Same ? h : h - k + 1;
  const std::size_t ow = padding_ == Padding::Same ? w : w - k + 1;

  Tensor out({n, out_channels_, oh, ow});
  const double* x = input.data().data();
  const double* wt = weight_.value.data().data();
  double* y = out.data().data();
  const auto ih = static_cast<std::ptrdiff_t>(h);
  const auto iw = static_cast<std::ptrdiff_t>(w);
  const auto sow = static_cast<std::ptrdiff_t>(ow);

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < out_channels_; ++co) {
      double* yplane = y + (b * out_channels_ + co) * oh * ow;
      std::fill(yplane, yplane + oh * ow, bias_.value[co]);
      for (std::size_t ci = 0; ci < in_channels_; ++ci) {
        const double* xplane = x + (b * in_channels_ + ci) * h * w;
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double wv = wt[((co * in_channels_ + ci) * k + ky) * k + kx];
            const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
            const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
            const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -dx);
            const std::ptrdiff_t x_hi = std::min<std::ptrdiff_t>(sow, iw - dx);
            for (std::size_t oy = 0; oy < oh; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) + dy;
              if (iy < 0 || iy >= ih) continue;
              double* yrow = yplane + oy * ow;
              const double* xrow = xplane + iy * iw;
              for (std::ptrdiff_t ox = x_lo; ox < x_hi; ++ox) yrow[ox] += wv * xrow[ox + dx];
            }
          }
        }
      }
    }
  }
  input_ = input;
  return out;
}

Tensor Conv2d::backward(const Tensor& upstream) {
  if (!input_) backward_before_forward("conv2d");
  const Tensor& input = *input_;
  const std::size_t n = input.dim(0);
  const std::size_t h = input.dim(2);
  const std::size_t w = input.dim(3);
  const std::size_t k = kernel_;
  const std::ptrdiff_t pad = padding_ == Padding::Same ? static_cast<std::ptrdiff_t>(k / 2) : 0;
  const std::size_t oh = padding_ == Padding::Same ? h : h - k + 1;
  const std::size_t ow = padding_ == Padding::Same ? w : w - k + 1;
  require_shape(upstream, {n, out_channels_, oh, ow}, "conv2d backward");

  Tensor dx_t(input.shape());
  const double* x = input.data().data();
  const double* g = upstream.data().data();
  const double* wt = weight_.value.data().data();
  double* dx = dx_t.data().data();
  double* dw = weight_.grad.data().data();
  const auto ih = static_cast<std::ptrdiff_t>(h);
  const auto iw = static_cast<std::ptrdiff_t>(w);
  const auto sow = static_cast<std::ptrdiff_t>(ow);

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < out_channels_; ++co) {
      const double* gplane = g + (b * out_channels_ + co) * oh * ow;
      double bsum = 0.0;
      for (std::size_t i = 0; i < oh * ow; ++i) bsum += gplane[i];
      bias_.grad[co] += bsum;
      for (std::size_t ci = 0; ci < in_channels_; ++ci) {
        const double* xplane = x + (b * in_channels_ + ci) * h * w;
        double* dxplane = dx + (b * in_channels_ + ci) * h * w;
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t widx = ((co * in_channels_ + ci) * k + ky) * k + kx;
            const double wv = wt[widx];
            const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
            const std::ptrdiff_t dxo = static_cast<std::ptrdiff_t>(kx) - pad;
            const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -dxo);
            const std::ptrdiff_t x_hi = std::min<std::ptrdiff_t>(sow, iw - dxo);
            double wsum = 0.0;
            for (std::size_t oy = 0; oy < oh; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) + dy;
              if (iy < 0 || iy >= ih) continue;
              const double* grow = gplane + oy * ow;
              const double* xrow = xplane + iy * iw;
              double* dxrow = dxplane + iy * iw;
              for (std::ptrdiff_t ox = x_lo; ox < x_hi; ++ox) {
                wsum += grow[ox] * xrow[ox + dxo];
                dxrow[ox + dxo] += wv * grow[ox];
              }
            }
            dw[widx] += wsum;
          }
        }
      }
    }
  }
  return dx_t;
}

// ---------------------------------------------------------------------------
// Relu

Tensor Relu::forward(const Tensor& input, bool) {
  Tensor out = input;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  input_ = input;
  return out;
}

Tensor Relu::backward(const Tensor& upstream) {
  if (!input_) backward_before_forward("relu");
  require_shape(upstream, input_->shape(), "relu backward");
  Tensor dx = upstream;
  // Derivative at exactly 0 is taken as 0.
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!((*input_)[i] > 0.0)) dx[i] = 0.0;
  }
  return dx;
}

std::uint64_t Relu::kink_signature() const {
  if (!input_) return 0;
  std::uint64_t h = 0x72656c75ULL;
  std::uint64_t word = 0;
  std::size_t bits = 0;
  for (double v : input_->data()) {
    word = (word << 1) | (v > 0.0 ? 1U : 0U);
    if (++bits == 64) {
      h = hash_combine(h, word);
      word = 0;
      bits = 0;
    }
  }
  return hash_combine(h, word);
}

// ---------------------------------------------------------------------------
// MaxPool2d

Tensor MaxPool2d::forward(const Tensor& input, bool) {
  require_rank(input, 4, "maxpool2d");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h < 2 || w < 2) throw Error(ErrorCode::ShapeMismatch, "maxpool2d needs H, W >= 2, got " + shape_to_string(input.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out({n, c, oh, ow});
  argmax_.assign(out.size(), 0);
  const double* x = input.data().data();
  for (std::size_t p = 0; p < n * c; ++p) {
    const double* plane = x + p * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (2 * oy) * w + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (2 * oy + dy) * w + 2 * ox + dx;
            if (plane[idx] > plane[best]) best = idx;
          }
        }
        const std::size_t o = (p * oh + oy) * ow + ox;
        out[o] = plane[best];
        argmax_[o] = p * h * w + best;
      }
    }
  }
  input_shape_ = input.shape();
  ready_ = true;
  return out;
}

std::uint64_t MaxPool2d::kink_signature() const {
  std::uint64_t h = 0x706f6f6cULL;
  for (std::size_t a : argmax_) h = hash_combine(h, a);
  return h;
}

Tensor MaxPool2d::backward(const Tensor& upstream) {
  if (!ready_) backward_before_forward("maxpool2d");
  if (upstream.size() != argmax_.size()) throw Error(ErrorCode::ShapeMismatch, "maxpool2d backward shape");
  Tensor dx(input_shape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) dx[argmax_[o]] += upstream[o];
  return dx;
}

// ---------------------------------------------------------------------------
// GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& input, bool) {
  require_rank(input, 4, "global_avg_pool");
  const std::size_t nc = input.dim(0) * input.dim(1);
  const std::size_t area = input.dim(2) * input.dim(3);
  Tensor out({input.dim(0), input.dim(1)});
  for (std::size_t p = 0; p < nc; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < area; ++i) s += input[p * area + i];
    out[p] = s / static_cast<double>(area);
  }
  input_shape_ = input.shape();
  ready_ = true;
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& upstream) {
  if (!ready_) backward_before_forward("global_avg_pool");
  require_shape(upstream, {input_shape_[0], input_shape_[1]}, "global_avg_pool backward");
  Tensor dx(input_shape_);
  const std::size_t area = input_shape_[2] * input_shape_[3];
  const double inv = 1.0 / static_cast<double>(area);
  for (std::size_t p = 0; p < upstream.size(); ++p) {
    for (std::size_t i = 0; i < area; ++i) dx[p * area + i] = upstream[p] * inv;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::size_t in_features, std::size_t out_features)
    : in_features_(in_features),
      out_features_(out_features),
      weight_("weight", Tensor({out_features, in_features})),
      bias_("bias", Tensor({out_features})) {
  if (in_features == 0 || out_features == 0) throw Error(ErrorCode::BadConfig, "dense layer with zero extent");
}

void Dense::init_glorot(SplitMix64& rng) {
  glorot_uniform(weight_.value, in_features_, out_features_, rng);
  bias_.value.fill(0.0);
}

Tensor Dense::forward(const Tensor& input, bool) {
  require_rank(input, 2, "dense");
  if (input.dim(1) != in_features_) {
    throw Error(ErrorCode::ShapeMismatch, "dense expects " + std::to_string(in_features_) + " features, got " +
                                              shape_to_string(input.shape()));
  }
  const std::size_t n = input.dim(0);
  Tensor out({n, out_features_});
  const double* w = weight_.value.data().data();
  for (std::size_t b = 0; b < n; ++b) {
    const double* x = input.data().data() + b * in_features_;
    for (std::size_t o = 0; o < out_features_; ++o) {
      const double* wrow = w + o * in_features_;
      double s = bias_.value[o];
      for (std::size_t i = 0; i < in_features_; ++i) s += wrow[i] * x[i];
      out[b * out_features_ + o] = s;
    }
  }
  input_ = input;
  return out;
}

Tensor Dense::backward(const Tensor& upstream) {
  if (!input_) backward_before_forward("dense");
  const std::size_t n = input_->dim(0);
  require_shape(upstream, {n, out_features_}, "dense backward");
  Tensor dx({n, in_features_});
  const double* w = weight_.value.data().data();
  double* dw = weight_.grad.data().data();
  for (std::size_t b = 0; b < n; ++b) {
    const double* x = input_->data().data() + b * in_features_;
    double* dxrow = dx.data().data() + b * in_features_;
    for (std::size_t o = 0; o < out_features_; ++o) {
      const double g = upstream[b * out_features_ + o];
      if (g == 0.0) continue;
      bias_.grad[o] += g;
      const double* wrow = w + o * in_features_;
      double* dwrow = dw + o * in_features_;
      for (std::size_t i = 0; i < in_features_; ++i) {
        dwrow[i] += g * x[i];
        dxrow[i] += g * wrow[i];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Softmax

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 2, "softmax");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor out(logits.shape());
  for (std::size_t b = 0; b < n; ++b) {
    const double* z = logits.data().data() + b * k;
    double* p = out.data().data() + b * k;
    const double m = *std::max_element(z, z + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = std::exp(z[j] - m);
      s += p[j];
    }
    for (std::size_t j = 0; j < k; ++j) p[j] /= s;
  }
  return out;
}

Tensor Softmax::forward(const Tensor& input, bool) {
  Tensor out = softmax(input);
  output_ = out;
  return out;
}

Tensor Softmax::backward(const Tensor& upstream) {
  if (!output_) backward_before_forward("softmax");
  require_shape(upstream, output_->shape(), "softmax backward");
  const std::size_t n = output_->dim(0), k = output_->dim(1);
  Tensor dx(output_->shape());
  for (std::size_t b = 0; b < n; ++b) {
    double dot = 0.0;
    for (std::size_t j = 0; j < k; ++j) dot += upstream[b * k + j] * (*output_)[b * k + j];
    for (std::size_t j = 0; j < k; ++j) dx[b * k + j] = (*output_)[b * k + j] * (upstream[b * k + j] - dot);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Sequential

Sequential::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    *this = std::move(copy);
  }
  return *this;
}

std::uint64_t Sequential::kink_signature() const {
  std::uint64_t h = 0;
  for (const auto& l : layers_) h = hash_combine(h, l->kink_signature());
  return h;
}

Tensor Sequential::forward(const Tensor& input, bool training) {
  Tensor x = input;
  for (auto& l : layers_) x = l->forward(x, training);
  return x;
}

Tensor Sequential::backward(const Tensor& upstream) {
  Tensor g = upstream;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Sequential::set_trainable(bool flag) {
  for (auto& l : layers_) l->trainable = flag;
}

// ---------------------------------------------------------------------------

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept {
  return SplitMix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2))).next();
}

void sgd_step(std::span<Layer* const> layers, double lr) {
  for (Layer* layer : layers) {
    for (Parameter* p : layer->parameters()) {
      if (layer->trainable) {
        auto v = p->value.data();
        auto g = p->grad.data();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
      }
      p->grad.fill(0.0);
    }
  }
}

}  // namespace viptt
