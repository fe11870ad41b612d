#include "tskd/models.hpp"

#include <cmath>
#include <optional>

#include "tskd/ops.hpp"
#include "tskd/rng.hpp"

namespace tskd {

CnnSpec CnnSpec::default_teacher(std::size_t classes, std::size_t channels, std::size_t height, std::size_t width) {
  return CnnSpec{"teacher", ModelRole::Teacher, {32, 64, 128}, 2, channels, height, width, classes};
}

CnnSpec CnnSpec::default_student(std::size_t classes, std::size_t channels, std::size_t height, std::size_t width) {
  return CnnSpec{"student", ModelRole::Student, {8, 16, 32}, 1, channels, height, width, classes};
}

std::vector<std::string> CnnSpec::tap_names() const {
  std::vector<std::string> names;
  for (std::size_t s = 0; s < widths.size(); ++s) names.push_back("stage" + std::to_string(s + 1));
  return names;
}

std::vector<std::pair<std::size_t, std::size_t>> CnnSpec::tap_extents() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t h = in_height, w = in_width;
  for (std::size_t s = 0; s < widths.size(); ++s) {
    // 3x3, padding 1, stride 2
    h = (h + 2 - 3) / 2 + 1;
    w = (w + 2 - 3) / 2 + 1;
    out.emplace_back(h, w);
  }
  return out;
}

void CnnSpec::validate() const {
  if (widths.empty()) throw ContractError("CnnSpec '" + name + "': at least one stage required");
  for (auto w : widths) {
    if (w == 0) throw ContractError("CnnSpec '" + name + "': stage widths must be positive");
  }
  if (blocks_per_stage == 0) throw ContractError("CnnSpec '" + name + "': blocks_per_stage must be positive");
  if (in_channels == 0 || in_height == 0 || in_width == 0) {
    throw ContractError("CnnSpec '" + name + "': input shape must be positive");
  }
  if (classes < 2) throw ContractError("CnnSpec '" + name + "': need at least 2 classes");
}

template <typename S>
const Tensor<S>& find_tap(const TapSet<S>& taps, std::string_view name) {
  for (const auto& t : taps) {
    if (t.name == name) return t.activation;
  }
  throw ContractError("feature tap '" + std::string(name) + "' was not captured");
}

template <typename S>
Tensor<S> kaiming_normal(Shape shape, std::size_t fan_in, Rng& rng, double gain) {
  const double stddev = std::sqrt(gain / static_cast<double>(fan_in));
  std::vector<S> values(shape_numel(shape));
  for (auto& v : values) v = static_cast<S>(stddev * rng.normal());
  return Tensor<S>(std::move(shape), std::move(values));
}

template <typename S>
Cnn<S>::Cnn(CnnSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  Rng rng(seed);
  std::size_t in_c = spec_.in_channels;
  for (std::size_t s = 0; s < spec_.widths.size(); ++s) {
    std::vector<ConvLayer> blocks;
    for (std::size_t b = 0; b < spec_.blocks_per_stage; ++b) {
      const std::size_t out_c = spec_.widths[s];
      ConvLayer layer;
      layer.name = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1);
      layer.kernel = kaiming_normal<S>(Shape{out_c, in_c, 3, 3}, in_c * 9, rng);
      layer.bias = Tensor<S>(Shape{out_c});
      layer.stride = b == 0 ? 2 : 1;
      blocks.push_back(std::move(layer));
      in_c = out_c;
    }
    stages_.push_back(std::move(blocks));
  }
  fc_weight_ = kaiming_normal<S>(Shape{spec_.classes, in_c}, in_c, rng, 1.0);
  fc_bias_ = Tensor<S>(Shape{spec_.classes});
  for (auto& p : parameters()) p.tensor.set_requires_grad(true);
}

template <typename S>
ForwardResult<S> Cnn<S>::forward(const Tensor<S>& batch) const {
  const Shape expected{spec_.in_channels, spec_.in_height, spec_.in_width};
  if (batch.rank() != 4 || Shape(batch.shape().begin() + 1, batch.shape().end()) != expected) {
    throw DimensionError("model '" + spec_.name + "' expects [N," + std::to_string(spec_.in_channels) + "," +
                         std::to_string(spec_.in_height) + "," + std::to_string(spec_.in_width) + "], got " +
                         shape_str(batch.shape()));
  }
  std::optional<NoGradGuard> no_grad;
  if (frozen_) no_grad.emplace();

  ForwardResult<S> out;
  Tensor<S> x = batch;
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (const auto& layer : stages_[s]) x = relu(conv2d(x, layer.kernel, layer.bias, layer.stride, 1));
    out.taps.push_back({"stage" + std::to_string(s + 1), x});
  }
  out.logits = linear(global_avg_pool(x), fc_weight_, fc_bias_);
  return out;
}

template <typename S>
ParamSet<S> Cnn<S>::parameters() const {
  ParamSet<S> params;
  for (const auto& stage : stages_) {
    for (const auto& layer : stage) {
      params.push_back({layer.name + ".weight", layer.kernel});
      params.push_back({layer.name + ".bias", layer.bias});
    }
  }
  params.push_back({"fc.weight", fc_weight_});
  params.push_back({"fc.bias", fc_bias_});
  return params;
}

template <typename S>
void Cnn<S>::load_parameters(const ParamSet<S>& values) {
  for (auto& p : parameters()) {
    const NamedTensor<S>* src = nullptr;
    for (const auto& v : values) {
      if (v.name == p.name) src = &v;
    }
    if (!src) throw ContractError("model '" + spec_.name + "': parameter '" + p.name + "' missing from source");
    if (src->tensor.shape() != p.tensor.shape()) {
      throw DimensionError("model '" + spec_.name + "': parameter '" + p.name + "' expects " +
                           shape_str(p.tensor.shape()) + ", source has " + shape_str(src->tensor.shape()));
    }
    auto dst = p.tensor.mutable_data();
    std::copy(src->tensor.data().begin(), src->tensor.data().end(), dst.begin());
  }
}

template <typename S>
void Cnn<S>::freeze() {
  frozen_ = true;
  for (auto& p : parameters()) {
    p.tensor.clear_grad();
    p.tensor.set_requires_grad(false);
  }
}

template <typename S>
Cnn<S> Cnn<S>::snapshot() const {
  Cnn copy = *this;
  for (auto& stage : copy.stages_) {
    for (auto& layer : stage) {
      layer.kernel = layer.kernel.detach();
      layer.bias = layer.bias.detach();
    }
  }
  copy.fc_weight_ = fc_weight_.detach();
  copy.fc_bias_ = fc_bias_.detach();
  copy.frozen_ = true;
  return copy;
}

template <typename S>
std::size_t Cnn<S>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

template <typename S>
std::uint64_t Cnn<S>::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : parameters()) h = fnv1a(p.tensor.data().data(), p.tensor.numel() * sizeof(S), h);
  return h;
}

template class Cnn<float>;
template class Cnn<double>;
template const Tensor<float>& find_tap(const TapSet<float>&, std::string_view);
template const Tensor<double>& find_tap(const TapSet<double>&, std::string_view);
template Tensor<float> kaiming_normal(Shape, std::size_t, Rng&, double);
template Tensor<double> kaiming_normal(Shape, std::size_t, Rng&, double);

}  // namespace tskd
