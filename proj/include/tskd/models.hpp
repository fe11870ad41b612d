#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tskd/tensor.hpp"

namespace tskd {

class Rng;

enum class ModelRole { Teacher, Student };

/// Plain conv/relu network: stages of 3x3 convolutions (the first block of
/// each stage halves the extent), global average pooling, linear classifier.
/// One feature tap at the end of every stage, named "stage1", "stage2", ...
struct CnnSpec {
  std::string name;
  ModelRole role = ModelRole::Student;
  std::vector<std::size_t> widths;
  std::size_t blocks_per_stage = 1;
  std::size_t in_channels = 1;
  std::size_t in_height = 28;
  std::size_t in_width = 28;
  std::size_t classes = 10;

  static CnnSpec default_teacher(std::size_t classes, std::size_t channels, std::size_t height, std::size_t width);
  static CnnSpec default_student(std::size_t classes, std::size_t channels, std::size_t height, std::size_t width);

  std::vector<std::string> tap_names() const;
  /// Spatial extent (h, w) of each tap.
  std::vector<std::pair<std::size_t, std::size_t>> tap_extents() const;
  void validate() const;
};

template <typename S>
struct FeatureTap {
  std::string name;
  Tensor<S> activation;  // [N,C,H,W]
};

template <typename S>
using TapSet = std::vector<FeatureTap<S>>;

template <typename S>
const Tensor<S>& find_tap(const TapSet<S>& taps, std::string_view name);

template <typename S>
struct ForwardResult {
  Tensor<S> logits;
  TapSet<S> taps;
};

template <typename S>
class Cnn {
 public:
  Cnn(CnnSpec spec, std::uint64_t seed);

  const CnnSpec& spec() const { return spec_; }

  /// Frozen models run without recording a graph.
  ForwardResult<S> forward(const Tensor<S>& batch) const;

  /// Handles aliasing the live parameter buffers, in a fixed order.
  ParamSet<S> parameters() const;
  /// Copies values by name; every parameter must be present with its shape.
  void load_parameters(const ParamSet<S>& values);

  void freeze();
  bool frozen() const { return frozen_; }

  /// Deep, frozen copy.
  Cnn snapshot() const;

  std::size_t parameter_count() const;
  std::uint64_t fingerprint() const;

 private:
  struct ConvLayer {
    std::string name;
    Tensor<S> kernel;
    Tensor<S> bias;
    std::size_t stride = 1;
  };

  CnnSpec spec_;
  std::vector<std::vector<ConvLayer>> stages_;
  Tensor<S> fc_weight_;
  Tensor<S> fc_bias_;
  bool frozen_ = false;
};

/// Kaiming-style fan-in normal initialisation.
template <typename S>
Tensor<S> kaiming_normal(Shape shape, std::size_t fan_in, Rng& rng, double gain = 2.0);

extern template class Cnn<float>;
extern template class Cnn<double>;

}  // namespace tskd
