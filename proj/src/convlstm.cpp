#include "tskd/convlstm.hpp"

#include <cmath>

#include "tskd/ops.hpp"
#include "tskd/rng.hpp"

namespace tskd {

namespace {

template <typename S>
Tensor<S> uniform_kernel(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<S> values(shape_numel(shape));
  for (auto& v : values) v = static_cast<S>(rng.uniform(-bound, bound));
  return Tensor<S>(std::move(shape), std::move(values));
}

}  // namespace

template <typename S>
ConvLstmParams<S> ConvLstmParams<S>::init(const ConvLstmConfig& config, std::uint64_t seed) {
  if (config.kernel_size % 2 == 0) throw ContractError("ConvLSTM kernel size must be odd for same-padding");
  if (config.input_channels == 0 || config.hidden_channels == 0) {
    throw ContractError("ConvLSTM channel counts must be positive");
  }
  Rng rng(seed);
  const std::size_t k = config.kernel_size, in = config.input_channels, hid = config.hidden_channels;
  ConvLstmParams p;
  p.config = config;
  const std::size_t fan_in = (in + hid) * k * k;
  p.w_xi = uniform_kernel<S>({hid, in, k, k}, fan_in, rng);
  p.w_hi = uniform_kernel<S>({hid, hid, k, k}, fan_in, rng);
  p.w_xf = uniform_kernel<S>({hid, in, k, k}, fan_in, rng);
  p.w_hf = uniform_kernel<S>({hid, hid, k, k}, fan_in, rng);
  p.w_xc = uniform_kernel<S>({hid, in, k, k}, fan_in, rng);
  p.w_hc = uniform_kernel<S>({hid, hid, k, k}, fan_in, rng);
  p.w_xo = uniform_kernel<S>({hid, in, k, k}, fan_in, rng);
  p.w_ho = uniform_kernel<S>({hid, hid, k, k}, fan_in, rng);
  p.b_i = Tensor<S>(Shape{hid});
  p.b_f = Tensor<S>(Shape{hid}, S(1));
  p.b_c = Tensor<S>(Shape{hid});
  p.b_o = Tensor<S>(Shape{hid});
  p.head_w = uniform_kernel<S>({1, hid, 1, 1}, hid, rng);
  // Small positive bias keeps the relu head alive at initialisation.
  p.head_b = Tensor<S>(Shape{1}, S(0.01));
  for (auto& t : p.parameters()) t.tensor.set_requires_grad(true);
  return p;
}

template <typename S>
ParamSet<S> ConvLstmParams<S>::parameters() const {
  return {{"w_xi", w_xi}, {"w_hi", w_hi}, {"w_xf", w_xf}, {"w_hf", w_hf}, {"w_xc", w_xc},
          {"w_hc", w_hc}, {"w_xo", w_xo}, {"w_ho", w_ho}, {"b_i", b_i},   {"b_f", b_f},
          {"b_c", b_c},   {"b_o", b_o},   {"head_w", head_w}, {"head_b", head_b}};
}

template <typename S>
ConvLstmParams<S> ConvLstmParams<S>::clone() const {
  ConvLstmParams p;
  p.config = config;
  p.w_xi = w_xi.clone();
  p.w_hi = w_hi.clone();
  p.w_xf = w_xf.clone();
  p.w_hf = w_hf.clone();
  p.w_xc = w_xc.clone();
  p.w_hc = w_hc.clone();
  p.w_xo = w_xo.clone();
  p.w_ho = w_ho.clone();
  p.b_i = b_i.clone();
  p.b_f = b_f.clone();
  p.b_c = b_c.clone();
  p.b_o = b_o.clone();
  p.head_w = head_w.clone();
  p.head_b = head_b.clone();
  return p;
}

template <typename S>
ConvLstmState<S> zero_state(const ConvLstmParams<S>& params, std::size_t n, std::size_t h, std::size_t w) {
  const Shape shape{n, params.config.hidden_channels, h, w};
  return {Tensor<S>(shape), Tensor<S>(shape)};
}

template <typename S>
ConvLstmState<S> convlstm_cell_step(const ConvLstmParams<S>& params, const Tensor<S>& x,
                                    const ConvLstmState<S>& state) {
  if (x.rank() != 4 || x.dim(1) != params.config.input_channels) {
    throw DimensionError("convlstm_cell_step: input " + shape_str(x.shape()) + " does not have " +
                         std::to_string(params.config.input_channels) + " channels");
  }
  if (state.h.shape() != state.c.shape() || x.dim(0) != state.h.dim(0) || x.dim(2) != state.h.dim(2) ||
      x.dim(3) != state.h.dim(3)) {
    throw DimensionError("convlstm_cell_step: input " + shape_str(x.shape()) + " vs state " +
                         shape_str(state.h.shape()));
  }
  const std::size_t pad = params.config.kernel_size / 2;
  const Tensor<S> none;
  auto gate = [&](const Tensor<S>& wx, const Tensor<S>& wh, const Tensor<S>& b) {
    return add(conv2d(x, wx, b, 1, pad), conv2d(state.h, wh, none, 1, pad));
  };
  auto i = sigmoid(gate(params.w_xi, params.w_hi, params.b_i));
  auto f = sigmoid(gate(params.w_xf, params.w_hf, params.b_f));
  auto g = tskd::tanh(gate(params.w_xc, params.w_hc, params.b_c));
  auto o = sigmoid(gate(params.w_xo, params.w_ho, params.b_o));
  auto c_next = add(mul(f, state.c), mul(i, g));
  auto h_next = mul(o, tskd::tanh(c_next));
  return {h_next, c_next};
}

template <typename S>
Tensor<S> convlstm_predict(const ConvLstmParams<S>& params, std::span<const Tensor<S>> sequence) {
  if (sequence.empty()) throw ContractError("convlstm_predict: empty knowledge sequence");
  const Shape& shape = sequence.front().shape();
  if (shape.size() != 3) throw DimensionError("convlstm_predict: entries must be [N,H,W], got " + shape_str(shape));
  for (const auto& e : sequence) {
    if (e.shape() != shape) {
      throw ContractError("convlstm_predict: ragged sequence " + shape_str(shape) + " vs " + shape_str(e.shape()));
    }
  }
  if (params.config.input_channels != 1) throw ContractError("convlstm_predict: sequences carry one channel");
  const std::size_t n = shape[0], h = shape[1], w = shape[2];
  auto state = zero_state(params, n, h, w);
  for (const auto& entry : sequence) state = convlstm_cell_step(params, reshape(entry, {n, 1, h, w}), state);
  auto out = relu(conv2d(state.h, params.head_w, params.head_b, 1, 0));
  return reshape(out, {n, h, w});
}

template struct ConvLstmParams<float>;
template struct ConvLstmParams<double>;
template ConvLstmState<float> zero_state(const ConvLstmParams<float>&, std::size_t, std::size_t, std::size_t);
template ConvLstmState<double> zero_state(const ConvLstmParams<double>&, std::size_t, std::size_t, std::size_t);
template ConvLstmState<float> convlstm_cell_step(const ConvLstmParams<float>&, const Tensor<float>&,
                                                 const ConvLstmState<float>&);
template ConvLstmState<double> convlstm_cell_step(const ConvLstmParams<double>&, const Tensor<double>&,
                                                  const ConvLstmState<double>&);
template Tensor<float> convlstm_predict(const ConvLstmParams<float>&, std::span<const Tensor<float>>);
template Tensor<double> convlstm_predict(const ConvLstmParams<double>&, std::span<const Tensor<double>>);

}  // namespace tskd
