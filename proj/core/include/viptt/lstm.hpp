// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "viptt/layers.hpp"

namespace viptt {

/// Hidden and cell state, each (batch, units).
struct LstmState {
  Tensor hidden;
  Tensor cell;
};

/// Single-layer LSTM over (batch, T, features) returning only the last
/// hidden state (batch, units). Gates i, f, o use the logistic sigmoid; the
/// candidate g and the cell output use tanh:
///   c_t = f_t * c_{t-1} + i_t * g_t,   h_t = o_t * tanh(c_t).
/// Parameters: input weights W_{i,f,g,o} (units, features), recurrent
/// weights U_{i,f,g,o} (units, units), biases b_{i,f,g,o} (units).
class Lstm final : public Layer {
 public:
  enum Gate : std::size_t { kInput = 0, kForget = 1, kCandidate = 2, kOutput = 3 };

  Lstm(std::size_t features, std::size_t units);

  std::string kind() const override { return "lstm"; }
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& upstream) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Lstm>(*this); }
  std::vector<Parameter*> parameters() override;

  /// Glorot-uniform weights, zero biases, forget-gate bias 1.
  void init(SplitMix64& rng);

  Parameter& input_weight(Gate g) noexcept { return w_[g]; }
  Parameter& recurrent_weight(Gate g) noexcept { return u_[g]; }
  Parameter& bias(Gate g) noexcept { return b_[g]; }

  std::size_t features() const noexcept { return features_; }
  std::size_t units() const noexcept { return units_; }

  /// State after the last forward pass.
  const LstmState& last_state() const noexcept { return state_; }

 private:
  std::size_t features_;
  std::size_t units_;
  std::array<Parameter, 4> w_;
  std::array<Parameter, 4> u_;
  std::array<Parameter, 4> b_;

  // Forward cache, each laid out [t][b][unit] (x is [b][t][feature]).
  std::size_t batch_ = 0;
  std::size_t steps_ = 0;
  std::vector<double> x_;
  std::array<std::vector<double>, 4> gates_;
  std::vector<double> cells_;     // c_t for t = 0..T-1
  std::vector<double> hiddens_;   // h_t for t = 0..T-1
  LstmState state_;
  bool ready_ = false;
};

}  // namespace viptt
