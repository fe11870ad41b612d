#pragma once

#include <span>

#include "tskd/tensor.hpp"

// Differentiable free functions over Tensor<Scalar>. Binary ops never
// broadcast: operands must have identical shapes. Reductions accumulate
// left to right in row-major order so results are bit-reproducible.

namespace tskd {

template <typename S> Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> relu(const Tensor<S>& x);
template <typename S> Tensor<S> sigmoid(const Tensor<S>& x);
template <typename S> Tensor<S> tanh(const Tensor<S>& x);
/// Subgradient 0 at x == 0.
template <typename S> Tensor<S> abs(const Tensor<S>& x);
template <typename S> Tensor<S> square(const Tensor<S>& x);
template <typename S> Tensor<S> scale(const Tensor<S>& x, S c);

/// Identity in the forward pass; multiplies the incoming adjoint by `c`.
template <typename S> Tensor<S> scale_grad(const Tensor<S>& x, S c);

template <typename S> Tensor<S> sum_all(const Tensor<S>& x);
template <typename S> Tensor<S> mean_all(const Tensor<S>& x);
/// [N,C,H,W] -> [N,H,W]
template <typename S> Tensor<S> sum_channels(const Tensor<S>& x);

/// Cross-correlation. `bias` may be an undefined tensor.
/// input [N,Cin,H,W], kernel [Cout,Cin,kH,kW] -> [N,Cout,H',W'],
/// H' = (H + 2*padding - kH) / stride + 1.
template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& kernel, const Tensor<S>& bias, std::size_t stride = 1,
                 std::size_t padding = 0);

/// Adaptive average pooling over the two trailing axes.
template <typename S> Tensor<S> adaptive_avg_pool(const Tensor<S>& x, std::size_t out_h, std::size_t out_w);
/// [N,C,H,W] -> [N,C]
template <typename S> Tensor<S> global_avg_pool(const Tensor<S>& x);

/// x [N,I], weight [O,I], bias [O] (may be undefined) -> [N,O]
template <typename S> Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& bias);

template <typename S> Tensor<S> reshape(const Tensor<S>& x, Shape shape);

/// Row-wise log-softmax of [N,K].
template <typename S> Tensor<S> log_softmax(const Tensor<S>& logits);

/// Mean over the batch of -log softmax(logits)[label].
template <typename S> Tensor<S> softmax_cross_entropy(const Tensor<S>& logits, std::span<const int> labels);

/// Divides each sample (leading axis) by the L2 norm of its flattened values.
/// All-zero samples pass through unchanged with zero gradient.
template <typename S> Tensor<S> l2_normalize_samples(const Tensor<S>& x);

template <typename S>
Tensor<S> mse(const Tensor<S>& a, const Tensor<S>& b) {
  return mean_all(square(sub(a, b)));
}

}  // namespace tskd
