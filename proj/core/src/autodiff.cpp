#include "planefield/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_set>

namespace planefield {

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Pushes this node's gradient into its parents' gradient buffers.
  std::function<void(Node&)> backprop;
};

}  // namespace detail

using detail::Node;

namespace {

void ensure_grad(Node& n) {
  if (n.grad.size() != n.value.size()) {
    n.grad = Tensor(n.value.shape());
  }
}

}  // namespace

class GraphOps {
 public:
  static std::shared_ptr<Node> node(const Var& v) { return v.node_; }
  static Var wrap(std::shared_ptr<Node> n) { return Var(std::move(n)); }

  static Var make(Tensor value, std::vector<std::shared_ptr<Node>> parents,
                  std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) {
      if (p->requires_grad) {
        n->requires_grad = true;
        break;
      }
    }
    if (n->requires_grad) {
      n->backprop = std::move(backprop);
    }
    return wrap(std::move(n));
  }
};

namespace {

std::shared_ptr<Node> node_of(const Var& v) {
  auto n = GraphOps::node(v);
  if (!n) {
    throw DomainError("empty graph variable");
  }
  return n;
}

}  // namespace

const Tensor& Var::value() const {
  if (!node_) throw DomainError("empty graph variable");
  return node_->value;
}

const Tensor& Var::grad() const {
  if (!node_) throw DomainError("empty graph variable");
  if (node_->grad.size() != node_->value.size()) {
    node_->grad = Tensor(node_->value.shape());
  }
  return node_->grad;
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

Var make_leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return GraphOps::wrap(std::move(n));
}

Var make_constant(Tensor value) { return make_leaf(std::move(value), false); }

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

Var conv2d(const Var& input, const Var& kernel, const Var& bias) {
  auto in = node_of(input);
  auto ker = node_of(kernel);
  auto bi = node_of(bias);
  const Tensor& x = in->value;
  const Tensor& w = ker->value;
  const Tensor& b = bi->value;
  if (x.rank() != 3) throw ShapeError("conv2d input must be (H, W, C)");
  if (w.rank() != 4 || w.dim(0) != w.dim(1)) {
    throw ShapeError("conv2d kernel must be (k, k, C_in, C_out)");
  }
  const int k = w.dim(0);
  if (k != 1 && k != 3) throw ShapeError("conv2d supports k in {1, 3}");
  if (w.dim(2) != x.dim(2)) throw ShapeError("conv2d channel mismatch");
  if (b.rank() != 1 || b.dim(0) != w.dim(3)) {
    throw ShapeError("conv2d bias must have C_out entries");
  }
  const int h = x.dim(0), width = x.dim(1);
  const int c_in = w.dim(2), c_out = w.dim(3);
  const int pad = k / 2;

  Tensor y({h, width, c_out});
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < width; ++xx) {
      for (int co = 0; co < c_out; ++co) {
        double acc = b[co];
        for (int dy = 0; dy < k; ++dy) {
          const int sy = yy + dy - pad;
          if (sy < 0 || sy >= h) continue;
          for (int dx = 0; dx < k; ++dx) {
            const int sx = xx + dx - pad;
            if (sx < 0 || sx >= width) continue;
            for (int ci = 0; ci < c_in; ++ci) {
              acc += x(sy, sx, ci) * w(dy, dx, ci, co);
            }
          }
        }
        y(yy, xx, co) = acc;
      }
    }
  }

  return GraphOps::make(
      std::move(y), {in, ker, bi}, [in, ker, bi, k, pad](Node& self) {
        const Tensor& g = self.grad;
        const Tensor& x = in->value;
        const Tensor& w = ker->value;
        const int h = x.dim(0), width = x.dim(1);
        const int c_in = w.dim(2), c_out = w.dim(3);
        if (in->requires_grad) {
          ensure_grad(*in);
          for (int yy = 0; yy < h; ++yy) {
            for (int xx = 0; xx < width; ++xx) {
              for (int co = 0; co < c_out; ++co) {
                const double gv = g(yy, xx, co);
                if (gv == 0.0) continue;
                for (int dy = 0; dy < k; ++dy) {
                  const int sy = yy + dy - pad;
                  if (sy < 0 || sy >= h) continue;
                  for (int dx = 0; dx < k; ++dx) {
                    const int sx = xx + dx - pad;
                    if (sx < 0 || sx >= width) continue;
                    for (int ci = 0; ci < c_in; ++ci) {
                      in->grad(sy, sx, ci) += gv * w(dy, dx, ci, co);
                    }
                  }
                }
              }
            }
          }
        }
        if (ker->requires_grad) {
          ensure_grad(*ker);
          for (int yy = 0; yy < h; ++yy) {
            for (int xx = 0; xx < width; ++xx) {
              for (int co = 0; co < c_out; ++co) {
                const double gv = g(yy, xx, co);
                if (gv == 0.0) continue;
                for (int dy = 0; dy < k; ++dy) {
                  const int sy = yy + dy - pad;
                  if (sy < 0 || sy >= h) continue;
                  for (int dx = 0; dx < k; ++dx) {
                    const int sx = xx + dx - pad;
                    if (sx < 0 || sx >= width) continue;
                    for (int ci = 0; ci < c_in; ++ci) {
                      ker->grad(dy, dx, ci, co) += gv * x(sy, sx, ci);
                    }
                  }
                }
              }
            }
          }
        }
        if (bi->requires_grad) {
          ensure_grad(*bi);
          for (int yy = 0; yy < h; ++yy) {
            for (int xx = 0; xx < width; ++xx) {
              for (int co = 0; co < c_out; ++co) {
                bi->grad[co] += g(yy, xx, co);
              }
            }
          }
        }
      });
}

Var maxpool2(const Var& input) {
  auto in = node_of(input);
  const Tensor& x = in->value;
  if (x.rank() != 3 || x.size() == 0) {
    throw ShapeError("maxpool2 input must be a non-empty (H, W, C) tensor");
  }
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const int oh = (h + 1) / 2, ow = (w + 1) / 2;
  Tensor y({oh, ow, c});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(y.size()));
  std::int64_t flat = 0;
  for (int yy = 0; yy < oh; ++yy) {
    for (int xx = 0; xx < ow; ++xx) {
      for (int cc = 0; cc < c; ++cc, ++flat) {
        double best = -std::numeric_limits<double>::infinity();
        std::int64_t best_index = -1;
        for (int dy = 0; dy < 2; ++dy) {
          const int sy = 2 * yy + dy;
          if (sy >= h) continue;
          for (int dx = 0; dx < 2; ++dx) {
            const int sx = 2 * xx + dx;
            if (sx >= w) continue;
            const double v = x(sy, sx, cc);
            if (v > best) {  // ties keep the first row-major element
              best = v;
              best_index = (static_cast<std::int64_t>(sy) * w + sx) * c + cc;
            }
          }
        }
        y[flat] = best;
        (*argmax)[static_cast<std::size_t>(flat)] = best_index;
      }
    }
  }
  return GraphOps::make(std::move(y), {in}, [in, argmax](Node& self) {
    if (!in->requires_grad) return;
    ensure_grad(*in);
    for (std::int64_t i = 0; i < self.grad.size(); ++i) {
      in->grad[(*argmax)[static_cast<std::size_t>(i)]] += self.grad[i];
    }
  });
}

namespace {

struct LerpAxis {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

LerpAxis lerp_axis(int out_n, int in_n) {
  LerpAxis axis;
  axis.lo.resize(static_cast<std::size_t>(out_n));
  axis.hi.resize(static_cast<std::size_t>(out_n));
  axis.frac.resize(static_cast<std::size_t>(out_n));
  const double scale = static_cast<double>(in_n) / out_n;
  for (int i = 0; i < out_n; ++i) {
    double coord = (i + 0.5) * scale - 0.5;
    coord = std::clamp(coord, 0.0, static_cast<double>(in_n - 1));
    const int lo = static_cast<int>(std::floor(coord));
    axis.lo[static_cast<std::size_t>(i)] = lo;
    axis.hi[static_cast<std::size_t>(i)] = std::min(lo + 1, in_n - 1);
    axis.frac[static_cast<std::size_t>(i)] = coord - lo;
  }
  return axis;
}

}  // namespace

Var upsample_bilinear(const Var& input, int out_height, int out_width) {
  auto in = node_of(input);
  const Tensor& x = in->value;
  if (x.rank() != 3 || x.size() == 0) {
    throw ShapeError("upsample input must be a non-empty (H, W, C) tensor");
  }
  if (out_height <= 0 || out_width <= 0) {
    throw ShapeError("upsample target dimensions must be positive");
  }
  const int c = x.dim(2);
  const LerpAxis ys = lerp_axis(out_height, x.dim(0));
  const LerpAxis xs = lerp_axis(out_width, x.dim(1));
  Tensor y({out_height, out_width, c});
  for (int yy = 0; yy < out_height; ++yy) {
    const int y0 = ys.lo[static_cast<std::size_t>(yy)];
    const int y1 = ys.hi[static_cast<std::size_t>(yy)];
    const double fy = ys.frac[static_cast<std::size_t>(yy)];
    for (int xx = 0; xx < out_width; ++xx) {
      const int x0 = xs.lo[static_cast<std::size_t>(xx)];
      const int x1 = xs.hi[static_cast<std::size_t>(xx)];
      const double fx = xs.frac[static_cast<std::size_t>(xx)];
      for (int cc = 0; cc < c; ++cc) {
        const double top = (1.0 - fx) * x(y0, x0, cc) + fx * x(y0, x1, cc);
        const double bot = (1.0 - fx) * x(y1, x0, cc) + fx * x(y1, x1, cc);
        y(yy, xx, cc) = (1.0 - fy) * top + fy * bot;
      }
    }
  }
  return GraphOps::make(std::move(y), {in}, [in, ys, xs](Node& self) {
    if (!in->requires_grad) return;
    ensure_grad(*in);
    const int oh = self.value.dim(0), ow = self.value.dim(1),
              c = self.value.dim(2);
    for (int yy = 0; yy < oh; ++yy) {
      const int y0 = ys.lo[static_cast<std::size_t>(yy)];
      const int y1 = ys.hi[static_cast<std::size_t>(yy)];
      const double fy = ys.frac[static_cast<std::size_t>(yy)];
      for (int xx = 0; xx < ow; ++xx) {
        const int x0 = xs.lo[static_cast<std::size_t>(xx)];
        const int x1 = xs.hi[static_cast<std::size_t>(xx)];
        const double fx = xs.frac[static_cast<std::size_t>(xx)];
        for (int cc = 0; cc < c; ++cc) {
          const double g = self.grad(yy, xx, cc);
          if (g == 0.0) continue;
          in->grad(y0, x0, cc) += g * (1.0 - fx) * (1.0 - fy);
          in->grad(y0, x1, cc) += g * fx * (1.0 - fy);
          in->grad(y1, x0, cc) += g * (1.0 - fx) * fy;
          in->grad(y1, x1, cc) += g * fx * fy;
        }
      }
    }
  });
}

Var sigmoid(const Var& input) {
  auto in = node_of(input);
  Tensor y(in->value.shape());
  for (std::int64_t i = 0; i < y.size(); ++i) {
    const double v = in->value[i];
    // Branch on sign to avoid overflow in exp.
    y[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                    : std::exp(v) / (1.0 + std::exp(v));
  }
  return GraphOps::make(std::move(y), {in}, [in](Node& self) {
    if (!in->requires_grad) return;
    ensure_grad(*in);
    for (std::int64_t i = 0; i < self.grad.size(); ++i) {
      const double s = self.value[i];
      in->grad[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Var relu(const Var& input) {
  auto in = node_of(input);
  Tensor y(in->value.shape());
  for (std::int64_t i = 0; i < y.size(); ++i) {
    y[i] = in->value[i] > 0.0 ? in->value[i] : 0.0;
  }
  return GraphOps::make(std::move(y), {in}, [in](Node& self) {
    if (!in->requires_grad) return;
    ensure_grad(*in);
    for (std::int64_t i = 0; i < self.grad.size(); ++i) {
      if (in->value[i] > 0.0) in->grad[i] += self.grad[i];
    }
  });
}

Var add(const Var& a, const Var& b) {
  auto na = node_of(a);
  auto nb = node_of(b);
  if (!na->value.same_shape(nb->value)) {
    throw ShapeError("add operands must share a shape");
  }
  Tensor y(na->value.shape());
  for (std::int64_t i = 0; i < y.size(); ++i) {
    y[i] = na->value[i] + nb->value[i];
  }
  return GraphOps::make(std::move(y), {na, nb}, [na, nb](Node& self) {
    if (na->requires_grad) {
      ensure_grad(*na);
      for (std::int64_t i = 0; i < self.grad.size(); ++i) {
        na->grad[i] += self.grad[i];
      }
    }
    if (nb->requires_grad) {
      ensure_grad(*nb);
      for (std::int64_t i = 0; i < self.grad.size(); ++i) {
        nb->grad[i] += self.grad[i];
      }
    }
  });
}

Var mul(const Var& a, const Var& b) {
  auto na = node_of(a);
  auto nb = node_of(b);
  if (!na->value.same_shape(nb->value)) {
    throw ShapeError("mul operands must share a shape");
  }
  Tensor y(na->value.shape());
  for (std::int64_t i = 0; i < y.size(); ++i) {
    y[i] = na->value[i] * nb->value[i];
  }
  return GraphOps::make(std::move(y), {na, nb}, [na, nb](Node& self) {
    if (na->requires_grad) {
      ensure_grad(*na);
      for (std::int64_t i = 0; i < self.grad.size(); ++i) {
        na->grad[i] += self.grad[i] * nb->value[i];
      }
    }
    if (nb->requires_grad) {
      ensure_grad(*nb);
      for (std::int64_t i = 0; i < self.grad.size(); ++i) {
        nb->grad[i] += self.grad[i] * na->value[i];
      }
    }
  });
}

Var scale(const Var& a, double s) {
  auto na = node_of(a);
  Tensor y(na->value.shape());
  for (std::int64_t i = 0; i < y.size(); ++i) {
    y[i] = na->value[i] * s;
  }
  return GraphOps::make(std::move(y), {na}, [na, s](Node& self) {
    if (!na->requires_grad) return;
    ensure_grad(*na);
    for (std::int64_t i = 0; i < self.grad.size(); ++i) {
      na->grad[i] += self.grad[i] * s;
    }
  });
}

Var mul_mask(const Var& mask, const Var& input) {
  auto nm = node_of(mask);
  auto nx = node_of(input);
  const Tensor& m = nm->value;
  const Tensor& x = nx->value;
  if (m.rank() != 3 || x.rank() != 3 || m.dim(2) != 1 ||
      m.dim(0) != x.dim(0) || m.dim(1) != x.dim(1)) {
    throw ShapeError("mask must be (H, W, 1) matching the input plane");
  }
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor y({h, w, c});
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      const double mv = m(yy, xx, 0);
      for (int cc = 0; cc < c; ++cc) {
        y(yy, xx, cc) = mv * x(yy, xx, cc);
      }
    }
  }
  return GraphOps::make(std::move(y), {nm, nx}, [nm, nx](Node& self) {
    const int h = self.value.dim(0), w = self.value.dim(1),
              c = self.value.dim(2);
    if (nm->requires_grad) {
      ensure_grad(*nm);
      for (int yy = 0; yy < h; ++yy) {
        for (int xx = 0; xx < w; ++xx) {
          double acc = 0.0;
          for (int cc = 0; cc < c; ++cc) {
            acc += self.grad(yy, xx, cc) * nx->value(yy, xx, cc);
          }
          nm->grad(yy, xx, 0) += acc;
        }
      }
    }
    if (nx->requires_grad) {
      ensure_grad(*nx);
      for (int yy = 0; yy < h; ++yy) {
        for (int xx = 0; xx < w; ++xx) {
          const double mv = nm->value(yy, xx, 0);
          for (int cc = 0; cc < c; ++cc) {
            nx->grad(yy, xx, cc) += self.grad(yy, xx, cc) * mv;
          }
        }
      }
    }
  });
}

Var concat_channels(std::span<const Var> inputs) {
  if (inputs.empty()) {
    throw ShapeError("concat needs at least one input");
  }
  std::vector<std::shared_ptr<Node>> nodes;
  nodes.reserve(inputs.size());
  int channels = 0;
  const Tensor& first = node_of(inputs[0])->value;
  if (first.rank() != 3) throw ShapeError("concat inputs must be (H, W, C)");
  for (const Var& v : inputs) {
    auto n = node_of(v);
    if (n->value.rank() != 3 || n->value.dim(0) != first.dim(0) ||
        n->value.dim(1) != first.dim(1)) {
      throw ShapeError("concat inputs must share spatial dimensions");
    }
    channels += n->value.dim(2);
    nodes.push_back(std::move(n));
  }
  const int h = first.dim(0), w = first.dim(1);
  Tensor y({h, w, channels});
  int base = 0;
  for (const auto& n : nodes) {
    const int c = n->value.dim(2);
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < w; ++xx) {
        for (int cc = 0; cc < c; ++cc) {
          y(yy, xx, base + cc) = n->value(yy, xx, cc);
        }
      }
    }
    base += c;
  }
  return GraphOps::make(std::move(y), nodes, [nodes](Node& self) {
    const int h = self.value.dim(0), w = self.value.dim(1);
    int base = 0;
    for (const auto& n : nodes) {
      const int c = n->value.dim(2);
      if (n->requires_grad) {
        ensure_grad(*n);
        for (int yy = 0; yy < h; ++yy) {
          for (int xx = 0; xx < w; ++xx) {
            for (int cc = 0; cc < c; ++cc) {
              n->grad(yy, xx, cc) += self.grad(yy, xx, base + cc);
            }
          }
        }
      }
      base += c;
    }
  });
}

Var value_sum(const Var& input) {
  auto in = node_of(input);
  double total = 0.0;
  for (std::int64_t i = 0; i < in->value.size(); ++i) {
    total += in->value[i];
  }
  Tensor y({1});
  y[0] = total;
  return GraphOps::make(std::move(y), {in}, [in](Node& self) {
    if (!in->requires_grad) return;
    ensure_grad(*in);
    for (std::int64_t i = 0; i < in->grad.size(); ++i) {
      in->grad[i] += self.grad[0];
    }
  });
}

Var project_scalar(const Var& input, const Tensor& weights) {
  auto in = node_of(input);
  if (!in->value.same_shape(weights)) {
    throw ShapeError("projection weights must match the input shape");
  }
  double total = 0.0;
  for (std::int64_t i = 0; i < in->value.size(); ++i) {
    total += in->value[i] * weights[i];
  }
  Tensor y({1});
  y[0] = total;
  auto w = std::make_shared<Tensor>(weights);
  return GraphOps::make(std::move(y), {in}, [in, w](Node& self) {
    if (!in->requires_grad) return;
    ensure_grad(*in);
    for (std::int64_t i = 0; i < in->grad.size(); ++i) {
      in->grad[i] += self.grad[0] * (*w)[i];
    }
  });
}

Var residual_unit(const Var& input, const ResidualUnitParams& params) {
  const Var inner = conv2d(input, params.weight1, params.bias1);
  const Var outer = conv2d(relu(inner), params.weight2, params.bias2);
  if (!outer.value().same_shape(input.value())) {
    throw ShapeError("residual unit must preserve the channel count");
  }
  return add(input, outer);
}

// ---------------------------------------------------------------------------
// Backward pass and gradient checking
// ---------------------------------------------------------------------------

void backward(const Var& root) {
  auto r = node_of(root);
  if (r->value.size() != 1) {
    throw DomainError("backward expects a scalar root");
  }

  // Iterative post-order DFS for the reverse topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(r.get(), 0);
  visited.insert(r.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    n->grad = Tensor(n->value.shape());
  }
  r->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) {
      (*it)->backprop(**it);
    }
  }
}

GradCheckReport grad_check(
    const std::function<Var(std::span<const Var>)>& build,
    std::span<const Tensor> inputs, double step, std::uint64_t projection_seed) {
  if (!(step > 0.0)) {
    throw DomainError("finite-difference step must be positive");
  }

  std::vector<Tensor> probe(inputs.begin(), inputs.end());
  const auto forward_loss = [&](const Tensor& weights) {
    std::vector<Var> leaves;
    leaves.reserve(probe.size());
    for (const Tensor& t : probe) {
      leaves.push_back(make_constant(t));
    }
    const Var out = build(leaves);
    double loss = 0.0;
    for (std::int64_t i = 0; i < out.value().size(); ++i) {
      loss += out.value()[i] * weights[i];
    }
    return loss;
  };

  // Analytic pass.
  std::vector<Var> leaves;
  leaves.reserve(probe.size());
  for (const Tensor& t : probe) {
    leaves.push_back(make_leaf(t));
  }
  const Var out = build(leaves);
  for (std::int64_t i = 0; i < out.value().size(); ++i) {
    if (!std::isfinite(out.value()[i])) {
      throw DomainError("grad_check: forward pass produced non-finite values");
    }
  }
  std::mt19937_64 engine(projection_seed);
  Tensor weights(out.value().shape());
  for (std::int64_t i = 0; i < weights.size(); ++i) {
    const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
    weights[i] = 2.0 * u - 1.0;
  }
  backward(project_scalar(out, weights));

  GradCheckReport report;
  for (std::size_t li = 0; li < probe.size(); ++li) {
    const Tensor analytic = leaves[li].grad();
    for (std::int64_t i = 0; i < probe[li].size(); ++i) {
      const double kept = probe[li][i];
      probe[li][i] = kept + step;
      const double plus = forward_loss(weights);
      probe[li][i] = kept - step;
      const double minus = forward_loss(weights);
      probe[li][i] = kept;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw DomainError("grad_check: perturbed pass produced non-finite values");
      }
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[i];
      if (!std::isfinite(a)) {
        throw DomainError("grad_check: analytic gradient is non-finite");
      }
      const double abs_err = std::abs(a - numeric);
      const double rel_err =
          abs_err / std::max({1.0, std::abs(a), std::abs(numeric)});
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      report.max_rel_error = std::max(report.max_rel_error, rel_err);
      ++report.elements_checked;
    }
  }
  return report;
}

}  // namespace planefield
