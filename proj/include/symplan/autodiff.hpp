// SPDX-License-Identifier: Apache-2.0
/**
 * @file   autodiff.hpp
 * @brief  Reverse-mode differentiation over the planner's operation set, and
 *         the RMSprop optimizer.
 *
 * A Tape records nodes in creation order, which is a topological order, so
 * backward() is a single reverse sweep. Values are batched tensors
 * [n, h, w, c] with channels contiguous per pixel.
 */
#ifndef SYMPLAN_AUTODIFF_HPP
#define SYMPLAN_AUTODIFF_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "symplan/steerable.hpp"

namespace symplan::ad {

struct Shape {
  int n = 1;
  int h = 1;
  int w = 1;
  int c = 1;

  std::size_t size() const { return static_cast<std::size_t>(n) * h * w * c; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}
  Tensor(Shape s, std::vector<double> values);

  double& at(int b, int i, int j, int k) { return data[index(b, i, j, k)]; }
  double at(int b, int i, int j, int k) const { return data[index(b, i, j, k)]; }
  std::size_t index(int b, int i, int j, int k) const {
    return ((static_cast<std::size_t>(b) * shape.h + i) * shape.w + j) * shape.c + k;
  }
};

/// A trainable steerable kernel: free parameters live in the kernel's raw
/// array, gradients are accumulated with respect to them.
class Parameter {
 public:
  Parameter(std::string name, SteerableKernel kernel);

  const std::string& name() const { return name_; }
  SteerableKernel& kernel() { return kernel_; }
  const SteerableKernel& kernel() const { return kernel_; }
  std::vector<double>& grad() { return grad_; }
  const std::vector<double>& grad() const { return grad_; }
  void zero_grad();

 private:
  std::string name_;
  SteerableKernel kernel_;
  std::vector<double> grad_;
};

enum class Op { input, param, conv2d, conv1x1, add, scale, concat_channels, block_max, softmax_ce };

struct Var {
  std::size_t id = 0;
};

/// Label value excluded from the loss (obstacle and goal cells).
inline constexpr std::uint8_t kIgnoreLabel = 255;

class Tape {
 public:
  Var input(Tensor value);
  /// Records the parameter's current projected kernel.
  Var param(Parameter& p);

  Var conv2d(Var kernel, Var x, Padding padding);
  Var conv1x1(Var kernel, Var x);
  Var add(Var a, Var b);
  Var scale(Var a, double c);
  Var concat_channels(std::span<const Var> parts);
  /// Elementwise max over `copies` contiguous channel blocks. Backward routes
  /// the gradient to the first block attaining the maximum.
  Var block_max(Var a, int copies);
  /// Mean over maps of the mean per-pixel cross-entropy over labelled cells.
  Var softmax_ce(Var logits, std::vector<std::uint8_t> labels);

  /// Throws std::invalid_argument unless `loss` holds a single value.
  /// Gradients of intermediate nodes are released as the sweep passes them
  /// unless `keep_intermediate` is set; input gradients are always kept.
  void backward(Var loss, bool keep_intermediate = false);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  /// Empty tensor when no gradient reached the node.
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
  Op op(Var v) const { return nodes_.at(v.id).op; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op = Op::input;
    std::vector<std::size_t> parents;
    Tensor value;
    Tensor grad;
    Parameter* parameter = nullptr;
    Padding padding = Padding::zero;
    double factor = 1.0;
    int copies = 1;
    std::vector<std::uint8_t> labels;
    std::vector<std::uint16_t> argmax;
  };

  Var push(Node node);
  void backward_node(Node& node);
  Tensor& grad_of(std::size_t id);

  std::vector<Node> nodes_;
};

/// Loss value of softmax_ce without recording a node.
double softmax_ce_value(const Tensor& logits, std::span<const std::uint8_t> labels);

struct RmsPropConfig {
  double learning_rate = 1e-3;
  double decay = 0.99;
  double epsilon = 1e-8;
};

/// v <- decay v + (1 - decay) g^2, then p <- p - lr g / (sqrt(v) + eps).
void rmsprop_update(std::span<double> params, std::span<const double> grads,
                    std::span<double> second_moment, const RmsPropConfig& config);

class RmsProp {
 public:
  explicit RmsProp(RmsPropConfig config = {}) : config_(config) {}

  /// Updates raw parameters from their accumulated gradients and re-projects.
  void step(std::span<Parameter> params);

  const RmsPropConfig& config() const { return config_; }
  std::vector<std::vector<double>>& state() { return second_moments_; }
  const std::vector<std::vector<double>>& state() const { return second_moments_; }

 private:
  RmsPropConfig config_;
  std::vector<std::vector<double>> second_moments_;
};

}  // namespace symplan::ad

#endif  // SYMPLAN_AUTODIFF_HPP
