#pragma once
// Minimal reverse-mode automatic differentiation.
//
// A Graph records every operation it creates in execution order, which is a
// topological order by construction. Graph::backward walks that list in
// reverse exactly once. Parameters are leaf tensors that live outside any
// graph; their gradient buffers accumulate across graphs until zeroed.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace handreg::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty unless requires_grad
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  std::string_view op = "leaf";
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  /// Leaf with a gradient buffer; used for trainable weights.
  static Tensor parameter(Shape shape, std::vector<double> values);
  /// Leaf without a gradient buffer.
  static Tensor constant(Shape shape, std::vector<double> values);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  std::string_view op() const { return node_->op; }

  std::span<double> value() { return node_->value; }
  std::span<const double> value() const { return node_->value; }
  std::span<double> grad() { return node_->grad; }
  std::span<const double> grad() const { return node_->grad; }

  /// Value of a single-element tensor.
  double item() const;
  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf owned by this graph. With requires_grad the leaf receives a
  /// gradient during backward.
  Tensor input(Shape shape, std::vector<double> values, bool requires_grad = false);

  // Linear algebra. Leading dimensions are flattened into one batch axis;
  // either operand may omit it, in which case it is broadcast.
  Tensor matmul(const Tensor& a, const Tensor& b);
  /// x [B,C,H,W], w [O,C,k,k] (odd k), bias [O] or undefined; same padding.
  Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride);

  // Elementwise with numpy-style broadcasting.
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor div(const Tensor& a, const Tensor& b);

  Tensor scale(const Tensor& x, double c);
  Tensor add_scalar(const Tensor& x, double c);
  Tensor neg(const Tensor& x) { return scale(x, -1.0); }

  Tensor relu(const Tensor& x);
  Tensor abs(const Tensor& x);
  Tensor square(const Tensor& x);
  Tensor sqrt(const Tensor& x);
  Tensor log(const Tensor& x);
  Tensor exp(const Tensor& x);
  Tensor softplus(const Tensor& x);
  Tensor sin(const Tensor& x);
  Tensor cos(const Tensor& x);
  Tensor acos(const Tensor& x);
  /// Gradient is zero where the input is outside [lo, hi].
  Tensor clamp(const Tensor& x, double lo, double hi);

  Tensor sum(const Tensor& x);
  Tensor mean(const Tensor& x);
  /// Reduces one axis; the axis is removed from the output shape.
  Tensor sum_axis(const Tensor& x, std::size_t axis);
  Tensor mean_axis(const Tensor& x, std::size_t axis);

  Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
  Tensor concat(std::span<const Tensor> parts, std::size_t axis);
  Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
  Tensor reshape(const Tensor& x, Shape shape);

  /// Escape hatch for fused operators defined elsewhere. The backward rule
  /// reads out.grad and accumulates into the inputs' grad buffers.
  Tensor custom(std::string_view op, Shape shape, std::vector<double> value,
                std::vector<Tensor> inputs, std::function<void(Node&)> backward);

  /// Reverse sweep from a single-element loss. Throws NonScalarLoss or, when
  /// called a second time on the same graph, DoubleBackward.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

 private:
  Tensor record(std::string_view op, Shape shape, std::vector<double> value,
                std::vector<Tensor> inputs, std::function<void(Node&)> backward);
  template <class F, class G>
  Tensor unary(std::string_view op, const Tensor& x, F f, G df);
  template <class F, class GA, class GB>
  Tensor binary(std::string_view op, const Tensor& a, const Tensor& b, F f, GA da, GB db);

  std::vector<std::shared_ptr<Node>> nodes_;
  bool backward_done_ = false;
};

}  // namespace handreg::ad
