#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "tskd/tensor.hpp"

namespace tskd {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-5;
  // Relative errors are taken against max(|analytic|, |numeric|, floor) so
  // vanishing gradients are compared in absolute terms.
  double denominator_floor = 1e-4;
  // An entry sits on a kink when its one-sided slopes disagree by more than
  // this fraction of their magnitude; such entries are excluded.
  double kink_ratio = 0.05;
};

struct GradMismatch {
  std::size_t input = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  std::vector<GradMismatch> failures;

  bool passed() const { return failures.empty(); }
};

/// Central difference of a scalar program with respect to one input entry.
template <typename F>
double central_difference(F&& f, Tensor<double>& input, std::size_t index, double h) {
  NoGradGuard no_grad;
  auto w = input.mutable_data();
  const double x0 = w[index];
  w[index] = x0 + h;
  const double fp = f().item();
  w[index] = x0 - h;
  const double fm = f().item();
  w[index] = x0;
  return (fp - fm) / (2.0 * h);
}

/// Compares reverse-mode gradients of the scalar program `f` with central
/// differences for every entry of every input. `f` must read the inputs
/// through the handles passed here (they alias the same buffers). 64-bit only.
template <typename F>
GradCheckReport grad_check(F&& f, std::vector<Tensor<double>> inputs, const GradCheckOptions& opt = {}) {
  for (auto& t : inputs) t.clear_grad();
  {
    auto root = f();
    backward(root);
  }
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
  }

  GradCheckReport report;
  NoGradGuard no_grad;
  const double h = opt.step;
  const double f0 = f().item();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto w = inputs[i].mutable_data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double x0 = w[j];
      w[j] = x0 + h;
      const double fp = f().item();
      w[j] = x0 - h;
      const double fm = f().item();
      w[j] = x0;

      const double fwd = (fp - f0) / h;
      const double bwd = (f0 - fm) / h;
      if (std::abs(fwd - bwd) > opt.kink_ratio * std::max({std::abs(fwd), std::abs(bwd), 1e-3})) {
        ++report.excluded;
        continue;
      }
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[i][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      report.max_rel_error = std::max(report.max_rel_error, rel);
      if (rel > opt.tolerance) report.failures.push_back({i, j, a, numeric, rel});
    }
  }
  return report;
}

}  // namespace tskd
