#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "planefield/tensor.hpp"

namespace planefield {

namespace detail {
struct Node;
}

/// Handle to a node of an eagerly evaluated reverse-mode graph. Ops compute
/// their value immediately and record how to push gradients to their
/// parents; backward() then walks the graph in reverse topological order.
///
/// A graph is built and differentiated on one thread; distinct graphs are
/// independent.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  /// Gradient accumulated by the last backward() pass (zeros before).
  const Tensor& grad() const;
  bool requires_grad() const;

 private:
  friend Var make_leaf(Tensor, bool);
  friend Var make_constant(Tensor);
  friend class GraphOps;
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

Var make_leaf(Tensor value, bool requires_grad = true);
Var make_constant(Tensor value);

/// Same-padded stride-1 cross-correlation. input (H, W, C_in), kernel
/// (k, k, C_in, C_out) with k in {1, 3}, bias (C_out) -> (H, W, C_out).
Var conv2d(const Var& input, const Var& kernel, const Var& bias);

/// 2x2 max pooling with stride 2; odd trailing rows/columns pool over the
/// in-bounds elements only. (H, W, C) -> (ceil(H/2), ceil(W/2), C). The
/// gradient routes to the window argmax; ties go to the first element in
/// row-major order.
Var maxpool2(const Var& input);

/// Bilinear resize without corner alignment: output sample y maps to
/// source coordinate (y + 0.5) * H_in / H_out - 0.5, clamped to the image.
Var upsample_bilinear(const Var& input, int out_height, int out_width);

Var sigmoid(const Var& input);
Var relu(const Var& input);
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);

/// Broadcast product of a single-channel mask (H, W, 1) with (H, W, C).
Var mul_mask(const Var& mask, const Var& input);

Var concat_channels(std::span<const Var> inputs);

/// Scalar sum of all elements, shape (1).
Var value_sum(const Var& input);

/// Scalar dot product with fixed weights, shape (1).
Var project_scalar(const Var& input, const Tensor& weights);

/// Residual refinement block: x + conv3x3(relu(conv3x3(x, w1, b1)), w2, b2).
/// Both kernels must preserve the channel count.
struct ResidualUnitParams {
  Var weight1, bias1;
  Var weight2, bias2;
};
Var residual_unit(const Var& input, const ResidualUnitParams& params);

/// Seeds the scalar root with gradient 1 and propagates to every leaf that
/// requires a gradient. Throws DomainError unless root has exactly one
/// element.
void backward(const Var& root);

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::int64_t elements_checked = 0;
};

/// Compares reverse-mode gradients against central finite differences for
/// every element of every input.
///
/// `build` receives one leaf per input tensor (in order) and returns the
/// function output; the scalar probed is a seeded random projection of that
/// output, which makes index-transposition bugs visible where a plain sum
/// could cancel. The relative error denominator is max(1, |analytic|,
/// |numeric|), i.e. absolute below 1. Throws DomainError when non-finite
/// values appear.
GradCheckReport grad_check(
    const std::function<Var(std::span<const Var>)>& build,
    std::span<const Tensor> inputs, double step = 1e-5,
    std::uint64_t projection_seed = 0x5eed);

}  // namespace planefield
