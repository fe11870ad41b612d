#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tskd/errors.hpp"

namespace tskd {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Gradient recording switch (thread-local). Results of ops executed while
/// recording is disabled are detached leaves.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename Scalar>
struct TensorNode {
  Shape shape;
  std::vector<Scalar> data;
  std::vector<Scalar> grad;  // empty when absent
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> inputs;
  // Propagates this node's grad into its inputs. Empty for leaves.
  std::function<void(TensorNode&)> backward_fn;

  TensorNode() = default;
  TensorNode(const TensorNode&) = default;
  TensorNode& operator=(const TensorNode&) = default;
  // Releases long input chains without recursing once per node.
  ~TensorNode();

  bool is_leaf() const { return !backward_fn; }
  std::vector<Scalar>& grad_buffer();
  void accumulate_grad(std::span<const Scalar> g);
};

/// Dense row-major tensor handle. Copies share the underlying node, so a
/// parameter tensor and every graph that references it see the same buffer.
template <typename Scalar>
class Tensor {
 public:
  using scalar_type = Scalar;
  using Node = TensorNode<Scalar>;

  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = Scalar(0));
  Tensor(Shape shape, std::vector<Scalar> values);

  static Tensor scalar(Scalar value) { return Tensor(Shape{1}, std::vector<Scalar>{value}); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const Scalar> data() const { return node_->data; }
  std::span<Scalar> mutable_data() { return node_->data; }
  Scalar item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on);

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const Scalar> grad() const { return node_->grad; }
  std::span<Scalar> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();
  void clear_grad() { node_->grad.clear(); }

  /// Same values, no history, no grad requirement.
  Tensor detach() const;
  /// Deep copy of values as a fresh leaf, keeping the requires_grad flag.
  Tensor clone() const;

  bool is_leaf() const { return node_->is_leaf(); }
  bool same_node(const Tensor& other) const { return node_ == other.node_; }
  const std::shared_ptr<Node>& node() const { return node_; }

  /// Reverse-mode differentiation from this scalar.
  void backward() const;

  /// Builds an op result. When recording is off or no input needs a grad the
  /// result is a plain leaf and the closure is dropped.
  static Tensor make_result(const char* op, Shape shape, std::vector<Scalar> values,
                            std::vector<Tensor> inputs, std::function<void(Node&)> backward_fn);

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// Operations reachable from a root, ordered so that every node precedes its
/// inputs. Reverse-mode replay walks this list front to back.
template <typename Scalar>
class Graph {
 public:
  static Graph collect(const Tensor<Scalar>& root);

  std::size_t size() const { return order_.size(); }
  const std::vector<std::shared_ptr<TensorNode<Scalar>>>& order() const { return order_; }

  /// Seeds the root with `seed` and propagates adjoints; leaves accumulate.
  void run_backward(Scalar seed = Scalar(1)) const;
  void clear() { order_.clear(); }

 private:
  std::vector<std::shared_ptr<TensorNode<Scalar>>> order_;
};

template <typename Scalar>
void backward(const Tensor<Scalar>& loss);

template <typename Scalar>
struct NamedTensor {
  std::string name;
  Tensor<Scalar> tensor;
};

/// Ordered, named parameter collection. Tensors alias the model's buffers.
template <typename Scalar>
using ParamSet = std::vector<NamedTensor<Scalar>>;

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& t);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace tskd
