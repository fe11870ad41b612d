#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tskd/tensor.hpp"

namespace tskd {

/// Scalar activation of one unit on a fixed input, one value per epoch.
struct ActivationTrace {
  std::string probe_id;
  std::vector<double> values;

  /// Epochs must arrive contiguously from 0.
  void append(int epoch, double value);
  std::size_t size() const { return values.size(); }
};

/// Two-layer fully connected regressor: fc1 (1 -> hidden, tanh), fc2 (hidden -> 1).
class ProbeNet {
 public:
  ProbeNet(std::size_t hidden, std::uint64_t seed);

  struct Output {
    Tensor<double> fc1;  // [N,hidden], after tanh
    Tensor<double> fc2;  // [N,1]
  };
  Output forward(const Tensor<double>& x) const;
  ParamSet<double> parameters() const;
  std::size_t hidden() const { return hidden_; }

 private:
  std::size_t hidden_;
  Tensor<double> w1_, b1_, w2_, b2_;
};

/// Activation of `unit` at tap "fc1" or "fc2" for a single scalar input.
double probe_activation(const ProbeNet& net, const std::string& tap, std::size_t unit, double input);

void record_trace(const ProbeNet& net, const std::string& tap, std::size_t unit, double input, int epoch,
                  ActivationTrace& trace);

struct ProbeOptions {
  std::uint64_t seed = 0;
  std::size_t hidden = 16;
  std::size_t samples = 64;  // evenly spaced on [-1, 1]
  std::size_t batch_size = 8;
  double learning_rate = 0.005;
  double momentum = 0.0;
  int epochs = 40;
  std::string tap = "fc1";
  std::size_t unit = 0;
  double probe_input = 0.5;
};

struct ProbeRun {
  ActivationTrace trace;  // one value per epoch, recorded after that epoch's training
  std::vector<double> train_loss;
};

/// Fits y = x^2 with seeded minibatch SGD and records the probe trace.
ProbeRun train_probe(const ProbeOptions& options);

}  // namespace tskd
