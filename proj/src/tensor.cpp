#include "tskd/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace tskd {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
}
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename Scalar>
TensorNode<Scalar>::~TensorNode() {
  std::vector<std::shared_ptr<TensorNode>> pending = std::move(inputs);
  while (!pending.empty()) {
    auto node = std::move(pending.back());
    pending.pop_back();
    if (node && node.use_count() == 1) {
      for (auto& in : node->inputs) pending.push_back(std::move(in));
      node->inputs.clear();
    }
  }
}

template <typename Scalar>
std::vector<Scalar>& TensorNode<Scalar>::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), Scalar(0));
  return grad;
}

template <typename Scalar>
void TensorNode<Scalar>::accumulate_grad(std::span<const Scalar> g) {
  if (!requires_grad) return;
  auto& buf = grad_buffer();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

template <typename Scalar>
Tensor<Scalar>::Tensor(Shape shape, Scalar fill) : node_(std::make_shared<Node>()) {
  check_shape(shape);
  node_->data.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

template <typename Scalar>
Tensor<Scalar>::Tensor(Shape shape, std::vector<Scalar> values) : node_(std::make_shared<Node>()) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not hold " + std::to_string(values.size()) +
                         " values");
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

template <typename Scalar>
Scalar Tensor<Scalar>::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

template <typename Scalar>
Tensor<Scalar>& Tensor<Scalar>::set_requires_grad(bool on) {
  if (!is_leaf()) throw ContractError("requires_grad can only be set on leaf tensors");
  node_->requires_grad = on;
  return *this;
}

template <typename Scalar>
void Tensor<Scalar>::zero_grad() {
  if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), Scalar(0));
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::detach() const {
  return Tensor(node_->shape, node_->data);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::clone() const {
  Tensor copy(node_->shape, node_->data);
  copy.node_->requires_grad = node_->requires_grad && node_->is_leaf();
  return copy;
}

template <typename Scalar>
void Tensor<Scalar>::backward() const {
  tskd::backward(*this);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::make_result(const char* op, Shape shape, std::vector<Scalar> values,
                                           std::vector<Tensor> inputs, std::function<void(Node&)> backward_fn) {
  Tensor out(std::move(shape), std::move(values));
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  out.node_->op = op;
  out.node_->requires_grad = true;
  out.node_->inputs.reserve(inputs.size());
  for (auto& in : inputs) out.node_->inputs.push_back(in.node_);
  out.node_->backward_fn = std::move(backward_fn);
  return out;
}

template <typename Scalar>
Graph<Scalar> Graph<Scalar>::collect(const Tensor<Scalar>& root) {
  using NodePtr = std::shared_ptr<TensorNode<Scalar>>;
  Graph g;
  if (!root.requires_grad()) return g;

  // Iterative post-order DFS; reversing it gives a topological order with
  // the root first. Input order is fixed, so the result is deterministic.
  std::vector<NodePtr> post;
  std::unordered_set<const TensorNode<Scalar>*> seen;
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      NodePtr child = node->inputs[next++];
      if (child->requires_grad && !child->is_leaf() && seen.insert(child.get()).second) {
        stack.emplace_back(std::move(child), 0);
      }
      continue;
    }
    post.push_back(node);
    stack.pop_back();
  }
  g.order_.assign(post.rbegin(), post.rend());
  return g;
}

template <typename Scalar>
void Graph<Scalar>::run_backward(Scalar seed) const {
  if (order_.empty()) return;
  // Interior adjoints restart from zero on every pass; only leaves accumulate.
  for (const auto& node : order_) node->grad.assign(node->data.size(), Scalar(0));
  order_.front()->grad[0] = seed;
  for (const auto& node : order_) node->backward_fn(*node);
}

template <typename Scalar>
void backward(const Tensor<Scalar>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) return;
  if (loss.is_leaf()) {
    loss.node()->grad_buffer()[0] += Scalar(1);
    return;
  }
  Graph<Scalar>::collect(loss).run_backward();
}

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& t) {
  std::vector<To> values(t.data().begin(), t.data().end());
  Tensor<To> out(t.shape(), std::move(values));
  if (t.requires_grad() && t.is_leaf()) out.set_requires_grad(true);
  return out;
}

template struct TensorNode<float>;
template struct TensorNode<double>;
template class Tensor<float>;
template class Tensor<double>;
template class Graph<float>;
template class Graph<double>;
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);
template Tensor<float> cast(const Tensor<double>&);
template Tensor<double> cast(const Tensor<float>&);
template Tensor<float> cast(const Tensor<float>&);
template Tensor<double> cast(const Tensor<double>&);

}  // namespace tskd
