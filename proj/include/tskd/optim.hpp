#pragma once

#include <vector>

#include "tskd/tensor.hpp"

namespace tskd {

/// Multiply the base learning rate by `multiplier` from `epoch` onward.
struct LrMilestone {
  int epoch = 0;
  double multiplier = 1.0;
};

/// Milestones at `start`, `start + every`, ... up to `total_epochs`, each
/// scaling by `factor` (e.g. 150/30/240/0.1 for the classic CIFAR recipe).
std::vector<LrMilestone> step_decay(int start, int every, int total_epochs, double factor);

template <typename S>
struct SgdState {
  double learning_rate = 0.1;
  double momentum = 0.0;
  std::vector<LrMilestone> milestones;
  std::vector<std::vector<S>> velocity;  // lazily shaped like the params

  double lr_at(int epoch) const;
};

/// v <- momentum * v + g;  p <- p - lr(epoch) * v;  grads zeroed afterward.
template <typename S>
void sgd_step(ParamSet<S>& params, SgdState<S>& state, int epoch);

template <typename S>
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long steps = 0;
  std::vector<std::vector<S>> m;
  std::vector<std::vector<S>> v;
};

template <typename S>
void adam_step(ParamSet<S>& params, AdamState<S>& state);

template <typename S>
void zero_grads(ParamSet<S>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace tskd
