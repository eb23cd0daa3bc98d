#include "mdn/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "mdn/error.hpp"

namespace mdn {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d <= 0) throw DimensionError("non-positive dimension in shape " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : node_(std::make_shared<detail::Node<T>>()) {
  node_->data.assign(static_cast<std::size_t>(shape_numel(shape)), fill);
  node_->shape = std::move(shape);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values)
    : node_(std::make_shared<detail::Node<T>>()) {
  if (static_cast<Index>(values.size()) != shape_numel(shape)) {
    throw DimensionError("data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_to_string(shape));
  }
  node_->data = std::move(values);
  node_->shape = std::move(shape);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value) {
  return BasicTensor(Shape{1}, value);
}

template <typename T>
const Shape& BasicTensor<T>::shape() const {
  static const Shape empty;
  return node_ ? node_->shape : empty;
}

template <typename T>
Index BasicTensor<T>::dim(std::size_t axis) const {
  if (axis >= shape().size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(shape()));
  }
  return shape()[axis];
}

template <typename T>
Index BasicTensor<T>::numel() const {
  return node_ ? static_cast<Index>(node_->data.size()) : 0;
}

template <typename T>
std::span<T> BasicTensor<T>::data() {
  if (!node_) return {};
  return node_->data;
}

template <typename T>
std::span<const T> BasicTensor<T>::data() const {
  if (!node_) return {};
  return node_->data;
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) {
    throw ContractError("item() on tensor of shape " + shape_to_string(shape()));
  }
  return node_->data[0];
}

template <typename T>
std::span<const T> BasicTensor<T>::grad() const {
  if (!node_) return {};
  return node_->grad;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_grad() {
  if (!node_) return {};
  return node_->ensure_grad();
}

template <typename T>
bool BasicTensor<T>::has_grad() const {
  return node_ && !node_->grad.empty();
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
bool BasicTensor<T>::requires_grad() const {
  return node_ && node_->requires_grad;
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool on) {
  if (!node_) throw ContractError("set_requires_grad on undefined tensor");
  if (!is_leaf()) throw ContractError("requires_grad can only be toggled on leaf tensors");
  node_->requires_grad = on;
  return *this;
}

template <typename T>
bool BasicTensor<T>::is_leaf() const {
  return !node_ || !node_->backward;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  if (!node_) return {};
  return BasicTensor(node_->shape, node_->data);
}

template <typename T>
BasicTensor<T> make_op_result(Shape shape, std::vector<T> data, const char* op,
                              std::initializer_list<const BasicTensor<T>*> inputs,
                              std::function<void(detail::Node<T>&)> backward) {
  auto node = std::make_shared<detail::Node<T>>();
  if (static_cast<Index>(data.size()) != shape_numel(shape)) {
    throw DimensionError(std::string(op) + ": result length does not match " +
                         shape_to_string(shape));
  }
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool track = false;
  if (grad_enabled()) {
    for (const auto* in : inputs) track = track || (in && in->requires_grad());
  }
  if (track) {
    node->requires_grad = true;
    for (const auto* in : inputs) node->inputs.push_back(in ? in->node() : nullptr);
    node->backward = std::move(backward);
  }
  return BasicTensor<T>::from_node(std::move(node));
}

template <typename T>
void backward(const BasicTensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got " + shape_to_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward() on a loss with no differentiable lineage");
  }
  using NodePtr = detail::Node<T>*;
  std::vector<NodePtr> order;
  std::unordered_set<NodePtr> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<NodePtr, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      NodePtr child = node->inputs[next++].get();
      if (child && child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }
  for (NodePtr n : order) {
    if (n->backward) {
      n->ensure_grad();
      std::fill(n->grad.begin(), n->grad.end(), T(0));
    }
  }
  loss.node()->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodePtr n = *it;
    if (!n->backward) continue;
    for (auto& in : n->inputs) {
      if (in && in->requires_grad) in->ensure_grad();
    }
    n->backward(*n);
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template BasicTensor<float> make_op_result(Shape, std::vector<float>, const char*,
                                           std::initializer_list<const BasicTensor<float>*>,
                                           std::function<void(detail::Node<float>&)>);
template BasicTensor<double> make_op_result(Shape, std::vector<double>, const char*,
                                            std::initializer_list<const BasicTensor<double>*>,
                                            std::function<void(detail::Node<double>&)>);
template void backward(const BasicTensor<float>&);
template void backward(const BasicTensor<double>&);

}  // namespace mdn
