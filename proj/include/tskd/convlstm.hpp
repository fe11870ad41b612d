#pragma once

#include <cstdint>
#include <span>

#include "tskd/tensor.hpp"

namespace tskd {

struct ConvLstmConfig {
  std::size_t input_channels = 1;
  std::size_t hidden_channels = 16;
  std::size_t kernel_size = 3;  // odd; same-padding keeps the extent
};

/// Peephole-free convolutional LSTM cell plus a 1x1-conv/relu output head
/// that maps the final hidden state to a single nonnegative channel.
template <typename S>
struct ConvLstmParams {
  ConvLstmConfig config;
  Tensor<S> w_xi, w_hi, w_xf, w_hf, w_xc, w_hc, w_xo, w_ho;
  Tensor<S> b_i, b_f, b_c, b_o;
  Tensor<S> head_w, head_b;

  static ConvLstmParams init(const ConvLstmConfig& config, std::uint64_t seed);

  ParamSet<S> parameters() const;
  ConvLstmParams clone() const;
};

template <typename S>
struct ConvLstmState {
  Tensor<S> h;  // [N,hidden,H,W]
  Tensor<S> c;
};

template <typename S>
ConvLstmState<S> zero_state(const ConvLstmParams<S>& params, std::size_t n, std::size_t h, std::size_t w);

/// i = s(Wxi*x + Whi*h + bi), f = s(Wxf*x + Whf*h + bf), g = tanh(Wxc*x + Whc*h + bc),
/// o = s(Wxo*x + Who*h + bo); c' = f.c + i.g; h' = o.tanh(c').
template <typename S>
ConvLstmState<S> convlstm_cell_step(const ConvLstmParams<S>& params, const Tensor<S>& x,
                                    const ConvLstmState<S>& state);

/// Runs the cell over `sequence` ([N,H,W] entries, oldest first) from a zero
/// state and applies the head to the last hidden state. Returns [N,H,W] >= 0.
template <typename S>
Tensor<S> convlstm_predict(const ConvLstmParams<S>& params, std::span<const Tensor<S>> sequence);

}  // namespace tskd
