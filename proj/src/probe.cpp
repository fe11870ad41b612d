#include "tskd/probe.hpp"

#include <cmath>
#include <numeric>

#include "tskd/dataset.hpp"
#include "tskd/models.hpp"
#include "tskd/ops.hpp"
#include "tskd/optim.hpp"
#include "tskd/rng.hpp"

namespace tskd {

void ActivationTrace::append(int epoch, double value) {
  if (epoch != static_cast<int>(values.size())) {
    throw ContractError("trace '" + probe_id + "': expected epoch " + std::to_string(values.size()) + ", got " +
                        std::to_string(epoch));
  }
  values.push_back(value);
}

ProbeNet::ProbeNet(std::size_t hidden, std::uint64_t seed) : hidden_(hidden) {
  if (hidden == 0) throw ContractError("ProbeNet: hidden width must be positive");
  Rng rng(derive_seed(seed, 0x9b0beULL));
  w1_ = kaiming_normal<double>(Shape{hidden, 1}, 1, rng, 1.0);
  b1_ = Tensor<double>(Shape{hidden});
  for (auto& v : b1_.mutable_data()) v = rng.uniform(-1.0, 1.0);
  w2_ = kaiming_normal<double>(Shape{1, hidden}, hidden, rng, 1.0);
  b2_ = Tensor<double>(Shape{1});
  for (auto* t : {&w1_, &b1_, &w2_, &b2_}) t->set_requires_grad(true);
}

ProbeNet::Output ProbeNet::forward(const Tensor<double>& x) const {
  Output out;
  out.fc1 = tanh(linear(x, w1_, b1_));
  out.fc2 = linear(out.fc1, w2_, b2_);
  return out;
}

ParamSet<double> ProbeNet::parameters() const {
  return {{"fc1.weight", w1_}, {"fc1.bias", b1_}, {"fc2.weight", w2_}, {"fc2.bias", b2_}};
}

double probe_activation(const ProbeNet& net, const std::string& tap, std::size_t unit, double input) {
  NoGradGuard no_grad;
  auto out = net.forward(Tensor<double>(Shape{1, 1}, std::vector<double>{input}));
  const Tensor<double>* t = nullptr;
  if (tap == "fc1") {
    t = &out.fc1;
  } else if (tap == "fc2") {
    t = &out.fc2;
  } else {
    throw ContractError("probe: unknown tap '" + tap + "' (expected fc1 or fc2)");
  }
  if (unit >= t->numel()) {
    throw IndexError("probe: unit " + std::to_string(unit) + " out of range for tap '" + tap + "' with " +
                     std::to_string(t->numel()) + " units");
  }
  return t->data()[unit];
}

void record_trace(const ProbeNet& net, const std::string& tap, std::size_t unit, double input, int epoch,
                  ActivationTrace& trace) {
  trace.append(epoch, probe_activation(net, tap, unit, input));
}

ProbeRun train_probe(const ProbeOptions& opt) {
  if (opt.samples < 2 || opt.batch_size == 0) throw ContractError("probe: need >= 2 samples and a positive batch");
  ProbeNet net(opt.hidden, opt.seed);
  std::vector<double> xs(opt.samples), ys(opt.samples);
  for (std::size_t i = 0; i < opt.samples; ++i) {
    xs[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(opt.samples - 1);
    ys[i] = xs[i] * xs[i];
  }
  ProbeRun run;
  run.trace.probe_id = opt.tap + "[" + std::to_string(opt.unit) + "]@x=" + std::to_string(opt.probe_input);
  // Validate the probe before spending time on training.
  probe_activation(net, opt.tap, opt.unit, opt.probe_input);

  SgdState<double> sgd;
  sgd.learning_rate = opt.learning_rate;
  sgd.momentum = opt.momentum;
  auto params = net.parameters();
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const auto order = epoch_order(derive_seed(opt.seed, 0x0bdeULL), epoch, opt.samples);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t stop = std::min(order.size(), start + opt.batch_size);
      std::vector<double> bx, by;
      for (std::size_t i = start; i < stop; ++i) {
        bx.push_back(xs[order[i]]);
        by.push_back(ys[order[i]]);
      }
      const std::size_t n = bx.size();
      auto pred = net.forward(Tensor<double>(Shape{n, 1}, bx)).fc2;
      auto loss = mse(pred, Tensor<double>(Shape{n, 1}, by));
      loss_sum += loss.item();
      ++batches;
      backward(loss);
      sgd_step(params, sgd, epoch);
    }
    run.train_loss.push_back(loss_sum / static_cast<double>(batches));
    record_trace(net, opt.tap, opt.unit, opt.probe_input, epoch, run.trace);
  }
  return run;
}

}  // namespace tskd
