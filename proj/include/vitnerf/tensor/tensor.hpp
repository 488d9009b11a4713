#pragma once

// Dense row-major tensors with tape-free reverse-mode differentiation: every
// op result keeps shared handles to its inputs and a closure that pushes its
// gradient back to them. backward() walks that graph in reverse topological
// order.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vitnerf {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Graph recording switch, thread-local. Ops evaluated while disabled carry
/// no backward closure.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool on);
};

class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward;

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

template <typename T>
class Tensor {
 public:
  using value_type = T;
  using Node = TensorNode<T>;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor scalar(T value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const T> data() const;
  const T* ptr() const { return node_->data.data(); }
  T item() const;
  T operator[](std::size_t i) const { return node_->data[i]; }

  /// In-place access for leaves (parameter init, optimizer, grad checks).
  /// Throws if this tensor is the output of a recorded op.
  std::span<T> mutable_data();

  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tensor& set_requires_grad(bool on);

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  /// Value copy without history.
  Tensor detach() const;

  /// Reverse pass from a single-element tensor, seeded with 1.
  void backward() const;

  /// Builds an op result. The closure is stored only when recording is
  /// enabled and at least one input requires a gradient.
  static Tensor make_op(Shape shape, std::vector<T> data,
                        std::vector<Tensor> inputs,
                        std::function<void(Node&)> backward);

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace vitnerf
