#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dbr {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace detail {
struct Node;
}

/// Backward rule of a graph node. Receives the gradient flowing into the
/// node's output and the node's parents; accumulates into the parents that
/// require gradients via Tensor::grad_buffer().
using BackwardFn = std::function<void(std::span<const double> grad_out, std::vector<Tensor>& parents)>;

/// Dense row-major N-d array that doubles as a node of a reverse-mode
/// autodiff graph. Copies are shallow: two Tensor handles may refer to the
/// same node. Values are 64-bit.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  /// Writable view of the values. Only meaningful for leaves (parameters,
  /// inputs); mutating an interior node does not re-run its producers.
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t flat_index) const { return values()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  /// Gradient storage, allocated (zeroed) on first use.
  std::span<double> grad_buffer();
  void zero_grad();

  /// Seeds d(this)/d(this) = 1 and propagates to every leaf in the graph that
  /// requires a gradient. Leaf gradients accumulate across calls; interior
  /// gradients are recomputed from scratch on every call.
  void backward() const;

  /// Same values, no history.
  Tensor detach() const;
  const std::string& op_name() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend Tensor make_op(std::string name, Shape shape, std::vector<double> values,
                        std::vector<Tensor> parents, BackwardFn backward);
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Creates the result of a differentiable operation. History is recorded
/// only when at least one parent requires a gradient.
Tensor make_op(std::string name, Shape shape, std::vector<double> values,
               std::vector<Tensor> parents, BackwardFn backward);

}  // namespace dbr
