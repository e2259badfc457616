// SPDX-License-Identifier: Apache-2.0
#include "viptt/lstm.hpp"

#include <cmath>

#include "viptt/error.hpp"

namespace viptt {

namespace {

constexpr const char* kGateSuffix[4] = {"i", "f", "g", "o"};

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Lstm::Lstm(std::size_t features, std::size_t units) : features_(features), units_(units) {
  if (features == 0 || units == 0) throw Error(ErrorCode::BadConfig, "lstm with zero extent");
  for (std::size_t g = 0; g < 4; ++g) {
    w_[g] = Parameter(std::string("W_") + kGateSuffix[g], Tensor({units, features}));
    u_[g] = Parameter(std::string("U_") + kGateSuffix[g], Tensor({units, units}));
    b_[g] = Parameter(std::string("b_") + kGateSuffix[g], Tensor({units}));
  }
}

std::vector<Parameter*> Lstm::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : w_) out.push_back(&p);
  for (auto& p : u_) out.push_back(&p);
  for (auto& p : b_) out.push_back(&p);
  return out;
}

void Lstm::init(SplitMix64& rng) {
  for (std::size_t g = 0; g < 4; ++g) {
    glorot_uniform(w_[g].value, features_, units_, rng);
    glorot_uniform(u_[g].value, units_, units_, rng);
    b_[g].value.fill(g == kForget ? 1.0 : 0.0);
  }
}

Tensor Lstm::forward(const Tensor& input, bool) {
  if (input.rank() != 3 || input.dim(2) != features_ || input.dim(1) == 0) {
    throw Error(ErrorCode::ShapeMismatch, "lstm expects (batch, T>=1, " + std::to_string(features_) + "), got " +
                                              shape_to_string(input.shape()));
  }
  batch_ = input.dim(0);
  steps_ = input.dim(1);
  const std::size_t B = batch_, T = steps_, F = features_, U = units_;
  x_.assign(input.data().begin(), input.data().end());
  for (auto& g : gates_) g.assign(T * B * U, 0.0);
  cells_.assign(T * B * U, 0.0);
  hiddens_.assign(T * B * U, 0.0);

  std::vector<double> pre(U);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      const double* x = x_.data() + (b * T + t) * F;
      const double* h_prev = t ? hiddens_.data() + ((t - 1) * B + b) * U : nullptr;
      const double* c_prev = t ? cells_.data() + ((t - 1) * B + b) * U : nullptr;
      for (std::size_t g = 0; g < 4; ++g) {
        const double* w = w_[g].value.data().data();
        const double* u = u_[g].value.data().data();
        for (std::size_t j = 0; j < U; ++j) {
          double s = b_[g].value[j];
          const double* wrow = w + j * F;
          for (std::size_t k = 0; k < F; ++k) s += wrow[k] * x[k];
          if (h_prev) {
            const double* urow = u + j * U;
            for (std::size_t k = 0; k < U; ++k) s += urow[k] * h_prev[k];
          }
          gates_[g][(t * B + b) * U + j] = g == kCandidate ? std::tanh(s) : sigmoid(s);
        }
      }
      double* c = cells_.data() + (t * B + b) * U;
      double* h = hiddens_.data() + (t * B + b) * U;
      for (std::size_t j = 0; j < U; ++j) {
        const std::size_t idx = (t * B + b) * U + j;
        const double cp = c_prev ? c_prev[j] : 0.0;
        c[j] = gates_[kForget][idx] * cp + gates_[kInput][idx] * gates_[kCandidate][idx];
        h[j] = gates_[kOutput][idx] * std::tanh(c[j]);
      }
    }
  }
  const std::size_t last = (T - 1) * B * U;
  state_.hidden = Tensor({B, U}, std::vector<double>(hiddens_.begin() + last, hiddens_.end()));
  state_.cell = Tensor({B, U}, std::vector<double>(cells_.begin() + last, cells_.end()));
  ready_ = true;
  return state_.hidden;
}

Tensor Lstm::backward(const Tensor& upstream) {
  if (!ready_) throw Error(ErrorCode::BackwardBeforeForward, "lstm: backward called before forward");
  const std::size_t B = batch_, T = steps_, F = features_, U = units_;
  if (upstream.shape() != Shape{B, U}) {
    throw Error(ErrorCode::ShapeMismatch, "lstm backward expects " + shape_to_string({B, U}) + ", got " +
                                              shape_to_string(upstream.shape()));
  }
  Tensor dx({B, T, F});
  std::vector<double> dh(upstream.data().begin(), upstream.data().end());
  std::vector<double> dc(B * U, 0.0);
  std::vector<double> dh_prev(B * U);
  std::array<std::vector<double>, 4> dpre;
  for (auto& d : dpre) d.assign(B * U, 0.0);

  for (std::size_t t = T; t-- > 0;) {
    // Gate pre-activation gradients for step t.
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t j = 0; j < U; ++j) {
        const std::size_t bj = b * U + j;
        const std::size_t idx = (t * B + b) * U + j;
        const double i = gates_[kInput][idx];
        const double f = gates_[kForget][idx];
        const double g = gates_[kCandidate][idx];
        const double o = gates_[kOutput][idx];
        const double tc = std::tanh(cells_[idx]);
        const double c_prev = t ? cells_[((t - 1) * B + b) * U + j] : 0.0;
        const double d_o = dh[bj] * tc;
        const double d_c = dc[bj] + dh[bj] * o * (1.0 - tc * tc);
        dpre[kInput][bj] = d_c * g * i * (1.0 - i);
        dpre[kForget][bj] = d_c * c_prev * f * (1.0 - f);
        dpre[kCandidate][bj] = d_c * i * (1.0 - g * g);
        dpre[kOutput][bj] = d_o * o * (1.0 - o);
        dc[bj] = d_c * f;
      }
    }
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    for (std::size_t gate = 0; gate < 4; ++gate) {
      const double* w = w_[gate].value.data().data();
      const double* u = u_[gate].value.data().data();
      double* dw = w_[gate].grad.data().data();
      double* du = u_[gate].grad.data().data();
      for (std::size_t b = 0; b < B; ++b) {
        const double* x = x_.data() + (b * T + t) * F;
        const double* h_prev = t ? hiddens_.data() + ((t - 1) * B + b) * U : nullptr;
        double* dxrow = dx.data().data() + (b * T + t) * F;
        for (std::size_t j = 0; j < U; ++j) {
          const double a = dpre[gate][b * U + j];
          if (a == 0.0) continue;
          b_[gate].grad[j] += a;
          const double* wrow = w + j * F;
          double* dwrow = dw + j * F;
          for (std::size_t k = 0; k < F; ++k) {
            dwrow[k] += a * x[k];
            dxrow[k] += a * wrow[k];
          }
          if (h_prev) {
            const double* urow = u + j * U;
            double* durow = du + j * U;
            for (std::size_t k = 0; k < U; ++k) {
              durow[k] += a * h_prev[k];
              dh_prev[b * U + k] += a * urow[k];
            }
          }
        }
      }
    }
    dh.swap(dh_prev);
  }
  return dx;
}

}  // namespace viptt
