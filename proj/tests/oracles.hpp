#pragma once

// Straightforward reference implementations, written without reusing any of
// the library's kernels. Used as ground truth by the unit and acceptance
// tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tskd/tensor.hpp"

namespace oracle {

using tskd::Shape;
using tskd::Tensor;

template <typename S>
Tensor<S> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::vector<S> v(tskd::shape_numel(shape));
  for (auto& x : v) x = static_cast<S>(lo + (hi - lo) * (static_cast<double>(gen() >> 11) * 0x1.0p-53));
  return Tensor<S>(std::move(shape), std::move(v));
}

template <typename S>
Tensor<S> random_param(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  auto t = random_tensor<S>(std::move(shape), seed, lo, hi);
  t.set_requires_grad(true);
  return t;
}

// Quadruple loop; each output starts at the bias and accumulates over
// (ci, kh, kw) in row-major order, reading zeros outside the input.
template <typename S>
std::vector<S> conv2d(const std::vector<S>& in, Shape is, const std::vector<S>& k, Shape ks, const std::vector<S>* bias,
                      std::size_t stride, std::size_t pad) {
  const std::size_t n = is[0], ci = is[1], h = is[2], w = is[3];
  const std::size_t co = ks[0], kh = ks[2], kw = ks[3];
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1, ow = (w + 2 * pad - kw) / stride + 1;
  std::vector<S> out(n * co * oh * ow);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          S acc = bias ? (*bias)[o] : S(0);
          for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t dy = 0; dy < kh; ++dy)
              for (std::size_t dx = 0; dx < kw; ++dx) {
                const long iy = static_cast<long>(y * stride + dy) - static_cast<long>(pad);
                const long ix = static_cast<long>(x * stride + dx) - static_cast<long>(pad);
                S v = 0;
                if (iy >= 0 && ix >= 0 && iy < static_cast<long>(h) && ix < static_cast<long>(w)) {
                  v = in[((b * ci + c) * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)];
                }
                acc += v * k[((o * ci + c) * kh + dy) * kw + dx];
              }
          out[((b * co + o) * oh + y) * ow + x] = acc;
        }
  return out;
}

// Per pixel: sum over channels of squares, channel order ascending.
template <typename S>
std::vector<S> attention_sum(const std::vector<S>& f, Shape s) {
  const std::size_t n = s[0], c = s[1], hw = s[2] * s[3];
  std::vector<S> out(n * hw);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < hw; ++p) {
      S acc = 0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const S v = f[(b * c + ch) * hw + p];
        acc += v * v;
      }
      out[b * hw + p] = acc;
    }
  return out;
}

template <typename S>
S serial_sum(std::span<const S> v) {
  S acc = 0;
  for (S x : v) acc += x;
  return acc;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar LSTM cell: (x, h, c) -> (h', c') with the same gate layout as the
// convolutional one at 1x1 spatial extent with 1x1 kernels.
struct ScalarLstm {
  // Per hidden unit j: wx[j] (input weight, single input channel), wh[j][m].
  std::size_t hidden;
  std::vector<double> wxi, wxf, wxc, wxo;
  std::vector<std::vector<double>> whi, whf, whc, who;
  std::vector<double> bi, bf, bc, bo;

  void step(double x, std::vector<double>& h, std::vector<double>& c) const {
    std::vector<double> nh(hidden), nc(hidden);
    for (std::size_t j = 0; j < hidden; ++j) {
      double ai = wxi[j] * x + bi[j], af = wxf[j] * x + bf[j], ag = wxc[j] * x + bc[j], ao = wxo[j] * x + bo[j];
      for (std::size_t m = 0; m < hidden; ++m) {
        ai += whi[j][m] * h[m];
        af += whf[j][m] * h[m];
        ag += whc[j][m] * h[m];
        ao += who[j][m] * h[m];
      }
      const double i = sigmoid(ai), f = sigmoid(af), g = std::tanh(ag), o = sigmoid(ao);
      nc[j] = f * c[j] + i * g;
      nh[j] = o * std::tanh(nc[j]);
    }
    h = nh;
    c = nc;
  }
};

// Softmax cross entropy for one row, computed in long double.
inline double cross_entropy_row(std::span<const double> z, int label) {
  long double m = z[0];
  for (double v : z) m = std::max<long double>(m, v);
  long double s = 0;
  for (double v : z) s += std::exp(static_cast<long double>(v) - m);
  return static_cast<double>(-(static_cast<long double>(z[static_cast<std::size_t>(label)]) - m - std::log(s)));
}

// (1 - a) CE + a T^2 KL(p_t || p_s) with p = softmax(z / T), batch mean.
inline double kd_loss(const std::vector<double>& s, const std::vector<double>& t, std::size_t n, std::size_t k,
                      double temp, double alpha, const std::vector<int>& labels) {
  double ce = 0, kl = 0;
  for (std::size_t b = 0; b < n; ++b) {
    std::vector<double> zs(s.begin() + static_cast<long>(b * k), s.begin() + static_cast<long>((b + 1) * k));
    std::vector<double> zt(t.begin() + static_cast<long>(b * k), t.begin() + static_cast<long>((b + 1) * k));
    ce += cross_entropy_row(zs, labels[b]);
    double ms = -1e300, mt = -1e300;
    for (std::size_t j = 0; j < k; ++j) {
      ms = std::max(ms, zs[j] / temp);
      mt = std::max(mt, zt[j] / temp);
    }
    double ss = 0, st = 0;
    for (std::size_t j = 0; j < k; ++j) {
      ss += std::exp(zs[j] / temp - ms);
      st += std::exp(zt[j] / temp - mt);
    }
    for (std::size_t j = 0; j < k; ++j) {
      const double lpt = zt[j] / temp - mt - std::log(st);
      const double lps = zs[j] / temp - ms - std::log(ss);
      kl += std::exp(lpt) * (lpt - lps);
    }
  }
  return (1 - alpha) * ce / static_cast<double>(n) + alpha * temp * temp * kl / static_cast<double>(n);
}

// y_t = c + sum phi_i y_{t-i} + e_t + sum theta_j e_{t-j}, Gaussian e with sd sigma.
inline std::vector<double> arma_series(std::size_t n, const std::vector<double>& phi, const std::vector<double>& theta,
                                       double c, double sigma, std::uint64_t seed, std::size_t burn = 200) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<double> y, e;
  for (std::size_t t = 0; t < n + burn; ++t) {
    double v = c;
    const double et = noise(gen);
    for (std::size_t i = 1; i <= phi.size(); ++i) v += t >= i ? phi[i - 1] * y[t - i] : 0.0;
    for (std::size_t j = 1; j <= theta.size(); ++j) v += t >= j ? theta[j - 1] * e[t - j] : 0.0;
    y.push_back(v + et);
    e.push_back(et);
  }
  return {y.begin() + static_cast<long>(burn), y.end()};
}

// Forecast of an ARMA(p,q) on a d=0 series given fitted coefficients:
// residuals by the conditional recursion, then zero future innovations.
inline std::vector<double> arma_forecast(const std::vector<double>& y, const std::vector<double>& phi,
                                         const std::vector<double>& theta, double c, int horizon) {
  const std::size_t p = phi.size();
  std::vector<double> w = y, e(y.size(), 0.0);
  for (std::size_t t = p; t < y.size(); ++t) {
    double pred = c;
    for (std::size_t i = 1; i <= p; ++i) pred += phi[i - 1] * w[t - i];
    for (std::size_t j = 1; j <= theta.size(); ++j) pred += t >= j ? theta[j - 1] * e[t - j] : 0.0;
    e[t] = w[t] - pred;
  }
  std::vector<double> out;
  for (int h = 0; h < horizon; ++h) {
    const std::size_t t = w.size();
    double pred = c;
    for (std::size_t i = 1; i <= p; ++i) pred += phi[i - 1] * w[t - i];
    for (std::size_t j = 1; j <= theta.size(); ++j) pred += theta[j - 1] * e[t - j];
    w.push_back(pred);
    e.push_back(0.0);
    out.push_back(pred);
  }
  return out;
}

}  // namespace oracle
