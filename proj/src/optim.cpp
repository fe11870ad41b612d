#include "tskd/optim.hpp"

#include <cmath>

namespace tskd {

std::vector<LrMilestone> step_decay(int start, int every, int total_epochs, double factor) {
  std::vector<LrMilestone> out;
  for (int e = start; e < total_epochs; e += every) out.push_back({e, factor});
  return out;
}

template <typename S>
double SgdState<S>::lr_at(int epoch) const {
  double lr = learning_rate;
  for (const auto& m : milestones) {
    if (m.epoch <= epoch) lr *= m.multiplier;
  }
  return lr;
}

namespace {

template <typename S>
void require_grads(const ParamSet<S>& params, const char* who) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) throw ContractError(std::string(who) + ": parameter '" + p.name + "' has no gradient");
  }
}

template <typename S>
void shape_buffers(const ParamSet<S>& params, std::vector<std::vector<S>>& buffers, const char* who) {
  if (buffers.empty()) {
    for (const auto& p : params) buffers.emplace_back(p.tensor.numel(), S(0));
  }
  if (buffers.size() != params.size()) throw ContractError(std::string(who) + ": optimizer state/parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (buffers[i].size() != params[i].tensor.numel()) {
      throw DimensionError(std::string(who) + ": state buffer does not match parameter '" + params[i].name + "'");
    }
  }
}

}  // namespace

template <typename S>
void sgd_step(ParamSet<S>& params, SgdState<S>& state, int epoch) {
  require_grads(params, "sgd_step");
  shape_buffers(params, state.velocity, "sgd_step");
  const S lr = static_cast<S>(state.lr_at(epoch));
  const S mom = static_cast<S>(state.momentum);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].tensor.mutable_data();
    auto g = params[i].tensor.grad();
    auto& v = state.velocity[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = mom * v[j] + g[j];
      w[j] -= lr * v[j];
    }
    params[i].tensor.zero_grad();
  }
}

template <typename S>
void adam_step(ParamSet<S>& params, AdamState<S>& state) {
  require_grads(params, "adam_step");
  shape_buffers(params, state.m, "adam_step");
  shape_buffers(params, state.v, "adam_step");
  ++state.steps;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.steps));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.steps));
  const S b1 = static_cast<S>(state.beta1), b2 = static_cast<S>(state.beta2);
  const S step = static_cast<S>(state.learning_rate / bc1);
  const S inv_bc2 = static_cast<S>(1.0 / bc2);
  const S eps = static_cast<S>(state.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].tensor.mutable_data();
    auto g = params[i].tensor.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (S(1) - b1) * g[j];
      v[j] = b2 * v[j] + (S(1) - b2) * g[j] * g[j];
      w[j] -= step * m[j] / (std::sqrt(v[j] * inv_bc2) + eps);
    }
    params[i].tensor.zero_grad();
  }
}

template struct SgdState<float>;
template struct SgdState<double>;
template void sgd_step(ParamSet<float>&, SgdState<float>&, int);
template void sgd_step(ParamSet<double>&, SgdState<double>&, int);
template void adam_step(ParamSet<float>&, AdamState<float>&);
template void adam_step(ParamSet<double>&, AdamState<double>&);

}  // namespace tskd
