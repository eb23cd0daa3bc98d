#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mdn {

using Index = std::ptrdiff_t;
using Shape = std::vector<Index>;

Index shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

template <typename T>
class BasicTensor;

namespace detail {

// One vertex of the autodiff graph. Results of differentiable ops hold their
// inputs and a closure that pushes this node's grad into theirs.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = nullptr;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::vector<T>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

// Whether ops record lineage on the current thread.
bool grad_enabled();

// Disables lineage recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Dense row-major N-d array with an optional gradient slot.
//
// Copies share storage: a BasicTensor is a handle, and the autodiff graph
// refers to the same storage the handle exposes. Use clone() for an
// independent copy. Feature maps use N x C x H x W layout.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> values);

  static BasicTensor scalar(T value);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  Index dim(std::size_t axis) const;
  std::size_t ndim() const { return shape().size(); }
  Index numel() const;

  std::span<T> data();
  std::span<const T> data() const;
  T item() const;

  // Empty span until a backward pass (or mutable_grad()) allocates it.
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  bool has_grad() const;
  void zero_grad();

  bool requires_grad() const;
  BasicTensor& set_requires_grad(bool on);
  bool is_leaf() const;

  BasicTensor clone() const;
  BasicTensor detach() const { return clone(); }

  // Internal: wraps an existing graph node.
  static BasicTensor from_node(std::shared_ptr<detail::Node<T>> node) {
    BasicTensor t;
    t.node_ = std::move(node);
    return t;
  }
  const std::shared_ptr<detail::Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Builds the output of an op. Lineage and the backward closure are attached
// only when grad mode is on and at least one input requires grad.
template <typename T>
BasicTensor<T> make_op_result(Shape shape, std::vector<T> data, const char* op,
                              std::initializer_list<const BasicTensor<T>*> inputs,
                              std::function<void(detail::Node<T>&)> backward);

// Reverse-mode sweep from a scalar. Leaf grads accumulate across calls;
// intermediate grads are reset at the start of each sweep.
template <typename T>
void backward(const BasicTensor<T>& loss);

}  // namespace mdn
