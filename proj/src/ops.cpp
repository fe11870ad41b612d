#include "tskd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tskd {

namespace {

template <typename S>
using Node = TensorNode<S>;

template <typename S>
void require_same_shape(const char* op, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename S>
void require_rank(const char* op, const Tensor<S>& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(x.shape()));
  }
}

// Elementwise unary op: y = f(x), dy/dx = df(x, y).
template <typename S, typename F, typename DF>
Tensor<S> unary(const char* op, const Tensor<S>& x, F f, DF df) {
  std::vector<S> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return Tensor<S>::make_result(op, x.shape(), std::move(out), {x}, [df](Node<S>& self) {
    auto& src = *self.inputs[0];
    if (!src.requires_grad) return;
    auto& g = src.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(src.data[i], self.data[i]);
  });
}

}  // namespace

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape("add", a, b);
  std::vector<S> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor<S>::make_result("add", a.shape(), std::move(out), {a, b}, [](Node<S>& self) {
    self.inputs[0]->accumulate_grad(self.grad);
    self.inputs[1]->accumulate_grad(self.grad);
  });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape("sub", a, b);
  std::vector<S> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor<S>::make_result("sub", a.shape(), std::move(out), {a, b}, [](Node<S>& self) {
    self.inputs[0]->accumulate_grad(self.grad);
    auto& rhs = *self.inputs[1];
    if (!rhs.requires_grad) return;
    auto& g = rhs.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
  });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape("mul", a, b);
  std::vector<S> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor<S>::make_result("mul", a.shape(), std::move(out), {a, b}, [](Node<S>& self) {
    auto& lhs = *self.inputs[0];
    auto& rhs = *self.inputs[1];
    if (lhs.requires_grad) {
      auto& g = lhs.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * rhs.data[i];
    }
    if (rhs.requires_grad) {
      auto& g = rhs.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * lhs.data[i];
    }
  });
}

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
  return unary(
      "relu", x, [](S v) { return v > S(0) || std::isnan(v) ? v : S(0); },
      [](S v, S) { return v > S(0) ? S(1) : S(0); });
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
  return unary(
      "sigmoid", x, [](S v) { return S(1) / (S(1) + std::exp(-v)); }, [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
Tensor<S> tanh(const Tensor<S>& x) {
  return unary(
      "tanh", x, [](S v) { return std::tanh(v); }, [](S, S y) { return S(1) - y * y; });
}

template <typename S>
Tensor<S> abs(const Tensor<S>& x) {
  return unary(
      "abs", x, [](S v) { return std::abs(v); },
      [](S v, S) { return v > S(0) ? S(1) : (v < S(0) ? S(-1) : S(0)); });
}

template <typename S>
Tensor<S> square(const Tensor<S>& x) {
  return unary(
      "square", x, [](S v) { return v * v; }, [](S v, S) { return S(2) * v; });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& x, S c) {
  return unary(
      "scale", x, [c](S v) { return c * v; }, [c](S, S) { return c; });
}

template <typename S>
Tensor<S> scale_grad(const Tensor<S>& x, S c) {
  std::vector<S> out(x.data().begin(), x.data().end());
  return Tensor<S>::make_result("scale_grad", x.shape(), std::move(out), {x}, [c](Node<S>& self) {
    auto& src = *self.inputs[0];
    if (!src.requires_grad) return;
    auto& g = src.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * self.grad[i];
  });
}

template <typename S>
Tensor<S> sum_all(const Tensor<S>& x) {
  S acc = S(0);
  for (S v : x.data()) acc += v;
  return Tensor<S>::make_result("sum_all", Shape{1}, {acc}, {x}, [](Node<S>& self) {
    auto& src = *self.inputs[0];
    if (!src.requires_grad) return;
    auto& g = src.grad_buffer();
    for (auto& v : g) v += self.grad[0];
  });
}

template <typename S>
Tensor<S> mean_all(const Tensor<S>& x) {
  S acc = S(0);
  for (S v : x.data()) acc += v;
  const S n = static_cast<S>(x.numel());
  return Tensor<S>::make_result("mean_all", Shape{1}, {acc / n}, {x}, [n](Node<S>& self) {
    auto& src = *self.inputs[0];
    if (!src.requires_grad) return;
    auto& g = src.grad_buffer();
    const S share = self.grad[0] / n;
    for (auto& v : g) v += share;
  });
}

template <typename S>
Tensor<S> sum_channels(const Tensor<S>& x) {
  require_rank("sum_channels", x, 4);
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<S> out(n * plane, S(0));
  auto in = x.data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const S* src = in.data() + (b * c + ch) * plane;
      S* dst = out.data() + b * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] += src[p];
    }
  }
  return Tensor<S>::make_result("sum_channels", Shape{n, x.dim(2), x.dim(3)}, std::move(out), {x},
                                [n, c, plane](Node<S>& self) {
                                  auto& src = *self.inputs[0];
                                  if (!src.requires_grad) return;
                                  auto& g = src.grad_buffer();
                                  for (std::size_t b = 0; b < n; ++b)
                                    for (std::size_t ch = 0; ch < c; ++ch)
                                      for (std::size_t p = 0; p < plane; ++p)
                                        g[(b * c + ch) * plane + p] += self.grad[b * plane + p];
                                });
}

namespace {

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, kh, kw, stride, pad, hp, wp, ho, wo;
  std::size_t padded_plane() const { return hp * wp; }
  // Length of the strided "extended" output run used by the stride-1 path:
  // rows of width wp with the last row truncated to wo.
  std::size_t ext_len() const { return (ho - 1) * wp + wo; }
};

template <typename S>
std::vector<S> pad_planes(std::span<const S> x, const ConvGeometry& g) {
  std::vector<S> out(g.n * g.cin * g.padded_plane(), S(0));
  for (std::size_t p = 0; p < g.n * g.cin; ++p) {
    const S* src = x.data() + p * g.h * g.w;
    S* dst = out.data() + p * g.padded_plane();
    for (std::size_t r = 0; r < g.h; ++r) {
      std::copy(src + r * g.w, src + (r + 1) * g.w, dst + (r + g.pad) * g.wp + g.pad);
    }
  }
  return out;
}

}  // namespace

template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& kernel, const Tensor<S>& bias, std::size_t stride,
                 std::size_t padding) {
  require_rank("conv2d input", input, 4);
  require_rank("conv2d kernel", kernel, 4);
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  if (input.dim(1) != kernel.dim(1)) {
    throw DimensionError("conv2d: input " + shape_str(input.shape()) + " has " + std::to_string(input.dim(1)) +
                         " channels but kernel " + shape_str(kernel.shape()) + " expects " +
                         std::to_string(kernel.dim(1)));
  }
  ConvGeometry g{};
  g.n = input.dim(0);
  g.cin = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.cout = kernel.dim(0);
  g.kh = kernel.dim(2);
  g.kw = kernel.dim(3);
  g.stride = stride;
  g.pad = padding;
  g.hp = g.h + 2 * padding;
  g.wp = g.w + 2 * padding;
  if (g.kh > g.hp || g.kw > g.wp) {
    throw DimensionError("conv2d: kernel " + shape_str(kernel.shape()) + " larger than padded input " +
                         shape_str(input.shape()) + " (padding " + std::to_string(padding) + ")");
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{g.cout}) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " does not match kernel " +
                         shape_str(kernel.shape()));
  }
  g.ho = (g.hp - g.kh) / stride + 1;
  g.wo = (g.wp - g.kw) / stride + 1;

  const auto padded = pad_planes(input.data(), g);
  auto w = kernel.data();
  const std::size_t out_plane = g.ho * g.wo;
  std::vector<S> out(g.n * g.cout * out_plane);

  // Each output element accumulates bias, then (cin, kh, kw) in row-major
  // order. The loops below hoist the kernel tap and sweep the output plane,
  // which keeps that per-element order while vectorizing the inner loop.
  if (stride == 1) {
    const std::size_t len = g.ext_len();
    std::vector<S> acc(len);
    for (std::size_t b = 0; b < g.n; ++b) {
      for (std::size_t co = 0; co < g.cout; ++co) {
        std::fill(acc.begin(), acc.end(), has_bias ? bias.data()[co] : S(0));
        for (std::size_t ci = 0; ci < g.cin; ++ci) {
          const S* base = padded.data() + (b * g.cin + ci) * g.padded_plane();
          for (std::size_t r = 0; r < g.kh; ++r) {
            for (std::size_t c = 0; c < g.kw; ++c) {
              const S wv = w[((co * g.cin + ci) * g.kh + r) * g.kw + c];
              const S* __restrict src = base + r * g.wp + c;
              S* __restrict dst = acc.data();
              for (std::size_t j = 0; j < len; ++j) dst[j] += wv * src[j];
            }
          }
        }
        S* o = out.data() + (b * g.cout + co) * out_plane;
        for (std::size_t oh = 0; oh < g.ho; ++oh) {
          std::copy(acc.begin() + oh * g.wp, acc.begin() + oh * g.wp + g.wo, o + oh * g.wo);
        }
      }
    }
  } else {
    for (std::size_t b = 0; b < g.n; ++b) {
      for (std::size_t co = 0; co < g.cout; ++co) {
        S* o = out.data() + (b * g.cout + co) * out_plane;
        std::fill(o, o + out_plane, has_bias ? bias.data()[co] : S(0));
        for (std::size_t ci = 0; ci < g.cin; ++ci) {
          const S* base = padded.data() + (b * g.cin + ci) * g.padded_plane();
          for (std::size_t r = 0; r < g.kh; ++r) {
            for (std::size_t c = 0; c < g.kw; ++c) {
              const S wv = w[((co * g.cin + ci) * g.kh + r) * g.kw + c];
              for (std::size_t oh = 0; oh < g.ho; ++oh) {
                const S* row = base + (oh * stride + r) * g.wp + c;
                S* dst = o + oh * g.wo;
                for (std::size_t ow = 0; ow < g.wo; ++ow) dst[ow] += wv * row[ow * stride];
              }
            }
          }
        }
      }
    }
  }

  std::vector<Tensor<S>> inputs{input, kernel};
  if (has_bias) inputs.push_back(bias);
  return Tensor<S>::make_result(
      "conv2d", Shape{g.n, g.cout, g.ho, g.wo}, std::move(out), std::move(inputs), [g, has_bias](Node<S>& self) {
        auto& x = *self.inputs[0];
        auto& k = *self.inputs[1];
        Node<S>* bnode = has_bias ? self.inputs[2].get() : nullptr;
        const bool need_x = x.requires_grad;
        const bool need_k = k.requires_grad;
        const bool need_b = bnode && bnode->requires_grad;
        const std::size_t out_plane = g.ho * g.wo;

        const auto padded = pad_planes<S>(x.data, g);
        std::vector<S> gpad(need_x ? padded.size() : 0, S(0));
        std::vector<S> gk(need_k ? k.data.size() : 0, S(0));

        if (g.stride == 1) {
          const std::size_t len = g.ext_len();
          std::vector<S> gext(len, S(0));
          for (std::size_t b = 0; b < g.n; ++b) {
            for (std::size_t co = 0; co < g.cout; ++co) {
              const S* go = self.grad.data() + (b * g.cout + co) * out_plane;
              for (std::size_t oh = 0; oh < g.ho; ++oh) {
                std::copy(go + oh * g.wo, go + (oh + 1) * g.wo, gext.begin() + oh * g.wp);
              }
              for (std::size_t ci = 0; ci < g.cin; ++ci) {
                const std::size_t plane_off = (b * g.cin + ci) * g.padded_plane();
                for (std::size_t r = 0; r < g.kh; ++r) {
                  for (std::size_t c = 0; c < g.kw; ++c) {
                    const std::size_t widx = ((co * g.cin + ci) * g.kh + r) * g.kw + c;
                    const std::size_t off = plane_off + r * g.wp + c;
                    if (need_k) {
                      const S* __restrict src = padded.data() + off;
                      S s = S(0);
                      for (std::size_t j = 0; j < len; ++j) s += gext[j] * src[j];
                      gk[widx] += s;
                    }
                    if (need_x) {
                      const S wv = k.data[widx];
                      S* __restrict dst = gpad.data() + off;
                      for (std::size_t j = 0; j < len; ++j) dst[j] += wv * gext[j];
                    }
                  }
                }
              }
            }
          }
        } else {
          for (std::size_t b = 0; b < g.n; ++b) {
            for (std::size_t co = 0; co < g.cout; ++co) {
              const S* go = self.grad.data() + (b * g.cout + co) * out_plane;
              for (std::size_t ci = 0; ci < g.cin; ++ci) {
                const std::size_t plane_off = (b * g.cin + ci) * g.padded_plane();
                for (std::size_t r = 0; r < g.kh; ++r) {
                  for (std::size_t c = 0; c < g.kw; ++c) {
                    const std::size_t widx = ((co * g.cin + ci) * g.kh + r) * g.kw + c;
                    const S wv = k.data[widx];
                    S s = S(0);
                    for (std::size_t oh = 0; oh < g.ho; ++oh) {
                      const std::size_t row = plane_off + (oh * g.stride + r) * g.wp + c;
                      for (std::size_t ow = 0; ow < g.wo; ++ow) {
                        const S gv = go[oh * g.wo + ow];
                        if (need_k) s += gv * padded[row + ow * g.stride];
                        if (need_x) gpad[row + ow * g.stride] += wv * gv;
                      }
                    }
                    if (need_k) gk[widx] += s;
                  }
                }
              }
            }
          }
        }

        if (need_x) {
          auto& gx = x.grad_buffer();
          for (std::size_t p = 0; p < g.n * g.cin; ++p) {
            const S* src = gpad.data() + p * g.padded_plane();
            S* dst = gx.data() + p * g.h * g.w;
            for (std::size_t r = 0; r < g.h; ++r)
              for (std::size_t c = 0; c < g.w; ++c) dst[r * g.w + c] += src[(r + g.pad) * g.wp + c + g.pad];
          }
        }
        if (need_k) k.accumulate_grad(gk);
        if (need_b) {
          auto& gb = bnode->grad_buffer();
          for (std::size_t co = 0; co < g.cout; ++co) {
            S s = S(0);
            for (std::size_t b = 0; b < g.n; ++b) {
              const S* go = self.grad.data() + (b * g.cout + co) * out_plane;
              for (std::size_t j = 0; j < out_plane; ++j) s += go[j];
            }
            gb[co] += s;
          }
        }
      });
}

template <typename S>
Tensor<S> adaptive_avg_pool(const Tensor<S>& x, std::size_t out_h, std::size_t out_w) {
  if (x.rank() < 2) throw DimensionError("adaptive_avg_pool: rank >= 2 required, got " + shape_str(x.shape()));
  const std::size_t r = x.rank();
  const std::size_t h = x.dim(r - 2), w = x.dim(r - 1);
  if (out_h == 0 || out_w == 0 || out_h > h || out_w > w) {
    throw DimensionError("adaptive_avg_pool: cannot pool " + shape_str(x.shape()) + " to " +
                         std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  const std::size_t planes = x.numel() / (h * w);
  auto bin = [](std::size_t i, std::size_t in, std::size_t out) {
    return std::pair<std::size_t, std::size_t>{i * in / out, ((i + 1) * in + out - 1) / out};
  };
  std::vector<S> out(planes * out_h * out_w);
  auto in = x.data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < out_h; ++i) {
      auto [r0, r1] = bin(i, h, out_h);
      for (std::size_t j = 0; j < out_w; ++j) {
        auto [c0, c1] = bin(j, w, out_w);
        S s = S(0);
        for (std::size_t a = r0; a < r1; ++a)
          for (std::size_t b = c0; b < c1; ++b) s += in[p * h * w + a * w + b];
        out[(p * out_h + i) * out_w + j] = s / static_cast<S>((r1 - r0) * (c1 - c0));
      }
    }
  }
  Shape shape = x.shape();
  shape[r - 2] = out_h;
  shape[r - 1] = out_w;
  return Tensor<S>::make_result(
      "adaptive_avg_pool", std::move(shape), std::move(out), {x}, [=](Node<S>& self) {
        auto& src = *self.inputs[0];
        if (!src.requires_grad) return;
        auto& g = src.grad_buffer();
        for (std::size_t p = 0; p < planes; ++p) {
          for (std::size_t i = 0; i < out_h; ++i) {
            auto [r0, r1] = bin(i, h, out_h);
            for (std::size_t j = 0; j < out_w; ++j) {
              auto [c0, c1] = bin(j, w, out_w);
              const S share =
                  self.grad[(p * out_h + i) * out_w + j] / static_cast<S>((r1 - r0) * (c1 - c0));
              for (std::size_t a = r0; a < r1; ++a)
                for (std::size_t b = c0; b < c1; ++b) g[p * h * w + a * w + b] += share;
            }
          }
        }
      });
}

template <typename S>
Tensor<S> global_avg_pool(const Tensor<S>& x) {
  require_rank("global_avg_pool", x, 4);
  const std::size_t planes = x.dim(0) * x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<S> out(planes);
  auto in = x.data();
  for (std::size_t p = 0; p < planes; ++p) {
    S s = S(0);
    for (std::size_t j = 0; j < plane; ++j) s += in[p * plane + j];
    out[p] = s / static_cast<S>(plane);
  }
  return Tensor<S>::make_result("global_avg_pool", Shape{x.dim(0), x.dim(1)}, std::move(out), {x},
                                [planes, plane](Node<S>& self) {
                                  auto& src = *self.inputs[0];
                                  if (!src.requires_grad) return;
                                  auto& g = src.grad_buffer();
                                  for (std::size_t p = 0; p < planes; ++p) {
                                    const S share = self.grad[p] / static_cast<S>(plane);
                                    for (std::size_t j = 0; j < plane; ++j) g[p * plane + j] += share;
                                  }
                                });
}

template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& bias) {
  require_rank("linear input", x, 2);
  require_rank("linear weight", weight, 2);
  const std::size_t n = x.dim(0), in_f = x.dim(1), out_f = weight.dim(0);
  if (weight.dim(1) != in_f) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{out_f}) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " vs weight " + shape_str(weight.shape()));
  }
  std::vector<S> out(n * out_f);
  auto xd = x.data();
  auto wd = weight.data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t o = 0; o < out_f; ++o) {
      S s = has_bias ? bias.data()[o] : S(0);
      for (std::size_t i = 0; i < in_f; ++i) s += xd[b * in_f + i] * wd[o * in_f + i];
      out[b * out_f + o] = s;
    }
  }
  std::vector<Tensor<S>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return Tensor<S>::make_result(
      "linear", Shape{n, out_f}, std::move(out), std::move(inputs), [n, in_f, out_f, has_bias](Node<S>& self) {
        auto& xn = *self.inputs[0];
        auto& wn = *self.inputs[1];
        const auto& g = self.grad;
        if (xn.requires_grad) {
          auto& gx = xn.grad_buffer();
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < out_f; ++o) {
              const S gv = g[b * out_f + o];
              for (std::size_t i = 0; i < in_f; ++i) gx[b * in_f + i] += gv * wn.data[o * in_f + i];
            }
        }
        if (wn.requires_grad) {
          auto& gw = wn.grad_buffer();
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < out_f; ++o) {
              const S gv = g[b * out_f + o];
              for (std::size_t i = 0; i < in_f; ++i) gw[o * in_f + i] += gv * xn.data[b * in_f + i];
            }
        }
        if (has_bias && self.inputs[2]->requires_grad) {
          auto& gb = self.inputs[2]->grad_buffer();
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t o = 0; o < out_f; ++o) gb[o] += g[b * out_f + o];
        }
      });
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<S> out(x.data().begin(), x.data().end());
  return Tensor<S>::make_result("reshape", std::move(shape), std::move(out), {x},
                                [](Node<S>& self) { self.inputs[0]->accumulate_grad(self.grad); });
}

template <typename S>
Tensor<S> log_softmax(const Tensor<S>& logits) {
  require_rank("log_softmax", logits, 2);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<S> out(n * k);
  auto in = logits.data();
  for (std::size_t b = 0; b < n; ++b) {
    const S* row = in.data() + b * k;
    const S mx = *std::max_element(row, row + k);
    S s = S(0);
    for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] - mx);
    const S lse = mx + std::log(s);
    for (std::size_t j = 0; j < k; ++j) out[b * k + j] = row[j] - lse;
  }
  return Tensor<S>::make_result("log_softmax", logits.shape(), std::move(out), {logits}, [n, k](Node<S>& self) {
    auto& src = *self.inputs[0];
    if (!src.requires_grad) return;
    auto& g = src.grad_buffer();
    for (std::size_t b = 0; b < n; ++b) {
      S gsum = S(0);
      for (std::size_t j = 0; j < k; ++j) gsum += self.grad[b * k + j];
      for (std::size_t j = 0; j < k; ++j) {
        g[b * k + j] += self.grad[b * k + j] - std::exp(self.data[b * k + j]) * gsum;
      }
    }
  });
}

template <typename S>
Tensor<S> softmax_cross_entropy(const Tensor<S>& logits, std::span<const int> labels) {
  require_rank("softmax_cross_entropy", logits, 2);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         shape_str(logits.shape()));
  }
  std::vector<int> lab(labels.begin(), labels.end());
  for (std::size_t b = 0; b < n; ++b) {
    if (lab[b] < 0 || static_cast<std::size_t>(lab[b]) >= k) {
      throw IndexError("softmax_cross_entropy: label " + std::to_string(lab[b]) + " outside [0, " +
                       std::to_string(k) + ")");
    }
  }
  std::vector<S> probs(n * k);
  auto in = logits.data();
  S total = S(0);
  for (std::size_t b = 0; b < n; ++b) {
    const S* row = in.data() + b * k;
    const S mx = *std::max_element(row, row + k);
    S s = S(0);
    for (std::size_t j = 0; j < k; ++j) {
      probs[b * k + j] = std::exp(row[j] - mx);
      s += probs[b * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) probs[b * k + j] /= s;
    total += (mx + std::log(s)) - row[lab[b]];
  }
  const S loss = total / static_cast<S>(n);
  return Tensor<S>::make_result(
      "softmax_cross_entropy", Shape{1}, {loss}, {logits},
      [n, k, lab = std::move(lab), probs = std::move(probs)](Node<S>& self) {
        auto& src = *self.inputs[0];
        if (!src.requires_grad) return;
        auto& g = src.grad_buffer();
        const S scale = self.grad[0] / static_cast<S>(n);
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t j = 0; j < k; ++j) {
            const S onehot = static_cast<std::size_t>(lab[b]) == j ? S(1) : S(0);
            g[b * k + j] += scale * (probs[b * k + j] - onehot);
          }
      });
}

template <typename S>
Tensor<S> l2_normalize_samples(const Tensor<S>& x) {
  const std::size_t n = x.dim(0), m = x.numel() / n;
  std::vector<S> out(x.numel());
  std::vector<S> norms(n);
  auto in = x.data();
  for (std::size_t b = 0; b < n; ++b) {
    S ss = S(0);
    for (std::size_t j = 0; j < m; ++j) ss += in[b * m + j] * in[b * m + j];
    norms[b] = std::sqrt(ss);
    for (std::size_t j = 0; j < m; ++j) out[b * m + j] = norms[b] > S(0) ? in[b * m + j] / norms[b] : S(0);
  }
  return Tensor<S>::make_result(
      "l2_normalize_samples", x.shape(), std::move(out), {x}, [n, m, norms = std::move(norms)](Node<S>& self) {
        auto& src = *self.inputs[0];
        if (!src.requires_grad) return;
        auto& g = src.grad_buffer();
        for (std::size_t b = 0; b < n; ++b) {
          if (!(norms[b] > S(0))) continue;
          S dot = S(0);
          for (std::size_t j = 0; j < m; ++j) dot += self.data[b * m + j] * self.grad[b * m + j];
          for (std::size_t j = 0; j < m; ++j) {
            g[b * m + j] += (self.grad[b * m + j] - self.data[b * m + j] * dot) / norms[b];
          }
        }
      });
}

#define TSKD_INSTANTIATE_OPS(S)                                                                         \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                          \
  template Tensor<S> sub(const Tensor<S>&, const Tensor<S>&);                                          \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                                          \
  template Tensor<S> relu(const Tensor<S>&);                                                           \
  template Tensor<S> sigmoid(const Tensor<S>&);                                                        \
  template Tensor<S> tanh(const Tensor<S>&);                                                           \
  template Tensor<S> abs(const Tensor<S>&);                                                            \
  template Tensor<S> square(const Tensor<S>&);                                                         \
  template Tensor<S> scale(const Tensor<S>&, S);                                                       \
  template Tensor<S> scale_grad(const Tensor<S>&, S);                                                  \
  template Tensor<S> sum_all(const Tensor<S>&);                                                        \
  template Tensor<S> mean_all(const Tensor<S>&);                                                       \
  template Tensor<S> sum_channels(const Tensor<S>&);                                                   \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, std::size_t, std::size_t); \
  template Tensor<S> adaptive_avg_pool(const Tensor<S>&, std::size_t, std::size_t);                    \
  template Tensor<S> global_avg_pool(const Tensor<S>&);                                                \
  template Tensor<S> linear(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);                     \
  template Tensor<S> reshape(const Tensor<S>&, Shape);                                                 \
  template Tensor<S> log_softmax(const Tensor<S>&);                                                    \
  template Tensor<S> softmax_cross_entropy(const Tensor<S>&, std::span<const int>);                    \
  template Tensor<S> l2_normalize_samples(const Tensor<S>&);

TSKD_INSTANTIATE_OPS(float)
TSKD_INSTANTIATE_OPS(double)

}  // namespace tskd
