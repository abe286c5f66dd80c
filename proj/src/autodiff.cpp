// SPDX-License-Identifier: Apache-2.0
#include "symplan/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "conv_gemm.hpp"

namespace symplan::ad {

Tensor::Tensor(Shape s, std::vector<double> values) : shape(s), data(std::move(values)) {
  if (data.size() != s.size()) {
    throw ShapeMismatch("tensor data has " + std::to_string(data.size()) + " values, shape needs " +
                        std::to_string(s.size()));
  }
}

Parameter::Parameter(std::string name, SteerableKernel kernel)
    : name_(std::move(name)), kernel_(std::move(kernel)), grad_(kernel_.parameter_count(), 0.0) {}

void Parameter::zero_grad() {
  grad_.assign(kernel_.parameter_count(), 0.0);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Tensor& Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.data.empty()) n.grad = Tensor(n.value.shape, 0.0);
  return n.grad;
}

Var Tape::input(Tensor value) {
  Node n;
  n.op = Op::input;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  const SteerableKernel& k = p.kernel();
  Node n;
  n.op = Op::param;
  n.parameter = &p;
  n.value = Tensor(Shape{k.size(), k.size(), k.out_dim(), k.in_dim()}, k.projected());
  return push(std::move(n));
}

namespace {

// A param node stores its kernel as shape {F, F, c_out, c_in}.
detail::ConvGeometry geometry(const Tensor& kernel, const Tensor& x) {
  detail::ConvGeometry g;
  g.n = x.shape.n;
  g.h = x.shape.h;
  g.w = x.shape.w;
  g.c_in = kernel.shape.c;
  g.c_out = kernel.shape.w;
  g.size = kernel.shape.h;
  if (x.shape.c != g.c_in) {
    throw ShapeMismatch("conv: input has " + std::to_string(x.shape.c) +
                        " channels, kernel expects " + std::to_string(g.c_in));
  }
  return g;
}

}  // namespace

Var Tape::conv2d(Var kernel, Var x, Padding padding) {
  const Node& kn = nodes_.at(kernel.id);
  if (kn.op != Op::param) throw std::invalid_argument("conv2d: kernel must be a parameter node");
  const Tensor& xv = nodes_.at(x.id).value;
  detail::ConvGeometry g = geometry(kn.value, xv);
  g.padding = padding;
  Node n;
  n.op = Op::conv2d;
  n.parents = {kernel.id, x.id};
  n.padding = padding;
  n.value = Tensor(Shape{xv.shape.n, xv.shape.h, xv.shape.w, g.c_out});
  detail::conv_forward(g, xv.data.data(), kn.value.data.data(), n.value.data.data());
  return push(std::move(n));
}

Var Tape::conv1x1(Var kernel, Var x) {
  const Node& kn = nodes_.at(kernel.id);
  if (kn.op != Op::param || kn.value.shape.h != 1) {
    throw std::invalid_argument("conv1x1: kernel must be a 1x1 parameter node");
  }
  Var v = conv2d(kernel, x, Padding::zero);
  nodes_[v.id].op = Op::conv1x1;
  return v;
}

Var Tape::add(Var a, Var b) {
  const Tensor& av = nodes_.at(a.id).value;
  const Tensor& bv = nodes_.at(b.id).value;
  if (!(av.shape == bv.shape)) throw ShapeMismatch("add: shape mismatch");
  Node n;
  n.op = Op::add;
  n.parents = {a.id, b.id};
  n.value = av;
  for (std::size_t i = 0; i < bv.data.size(); ++i) n.value.data[i] += bv.data[i];
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::scale;
  n.parents = {a.id};
  n.factor = c;
  n.value = nodes_.at(a.id).value;
  for (double& v : n.value.data) v *= c;
  return push(std::move(n));
}

Var Tape::concat_channels(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  Shape s = nodes_.at(parts[0].id).value.shape;
  int total = 0;
  for (const Var& p : parts) {
    const Shape& ps = nodes_.at(p.id).value.shape;
    if (ps.n != s.n || ps.h != s.h || ps.w != s.w) {
      throw ShapeMismatch("concat_channels: spatial shape mismatch");
    }
    total += ps.c;
  }
  s.c = total;
  Node n;
  n.op = Op::concat_channels;
  n.value = Tensor(s);
  const std::size_t pixels = static_cast<std::size_t>(s.n) * s.h * s.w;
  int offset = 0;
  for (const Var& p : parts) {
    n.parents.push_back(p.id);
    const Tensor& pv = nodes_[p.id].value;
    const int c = pv.shape.c;
    for (std::size_t px = 0; px < pixels; ++px) {
      std::copy_n(pv.data.data() + px * c, c, n.value.data.data() + px * total + offset);
    }
    offset += c;
  }
  return push(std::move(n));
}

Var Tape::block_max(Var a, int copies) {
  const Tensor& av = nodes_.at(a.id).value;
  if (copies <= 0 || av.shape.c % copies != 0) {
    throw ShapeMismatch("block_max: " + std::to_string(av.shape.c) +
                        " channels do not split into " + std::to_string(copies) + " blocks");
  }
  if (copies > std::numeric_limits<std::uint16_t>::max()) {
    throw std::invalid_argument("block_max: too many blocks");
  }
  const int block = av.shape.c / copies;
  Shape s = av.shape;
  s.c = block;
  Node n;
  n.op = Op::block_max;
  n.parents = {a.id};
  n.copies = copies;
  n.value = Tensor(s);
  n.argmax.assign(s.size(), 0);
  const std::size_t pixels = static_cast<std::size_t>(s.n) * s.h * s.w;
  for (std::size_t px = 0; px < pixels; ++px) {
    const double* src = av.data.data() + px * av.shape.c;
    double* dst = n.value.data.data() + px * block;
    std::uint16_t* arg = n.argmax.data() + px * block;
    std::copy_n(src, block, dst);
    for (int m = 1; m < copies; ++m) {
      const double* blk = src + static_cast<std::size_t>(m) * block;
      for (int c = 0; c < block; ++c) {
        if (blk[c] > dst[c]) {
          dst[c] = blk[c];
          arg[c] = static_cast<std::uint16_t>(m);
        }
      }
    }
  }
  return push(std::move(n));
}

namespace {

struct CeStats {
  double loss = 0.0;
  std::vector<int> labelled_per_map;
};

// Per-map label counts; maps with no labelled cell contribute zero.
CeStats ce_stats(const Tensor& logits, std::span<const std::uint8_t> labels) {
  CeStats st;
  const Shape& s = logits.shape;
  const std::size_t per_map = static_cast<std::size_t>(s.h) * s.w;
  st.labelled_per_map.assign(s.n, 0);
  for (int b = 0; b < s.n; ++b) {
    double sum = 0.0;
    for (std::size_t p = 0; p < per_map; ++p) {
      const std::uint8_t y = labels[b * per_map + p];
      if (y == kIgnoreLabel) continue;
      const double* z = logits.data.data() + (b * per_map + p) * s.c;
      const double zmax = *std::max_element(z, z + s.c);
      double denom = 0.0;
      for (int c = 0; c < s.c; ++c) denom += std::exp(z[c] - zmax);
      sum += std::log(denom) + zmax - z[y];
      ++st.labelled_per_map[b];
    }
    if (st.labelled_per_map[b] > 0) st.loss += sum / st.labelled_per_map[b];
  }
  st.loss /= s.n;
  return st;
}

}  // namespace

double softmax_ce_value(const Tensor& logits, std::span<const std::uint8_t> labels) {
  const Shape& s = logits.shape;
  if (labels.size() != static_cast<std::size_t>(s.n) * s.h * s.w) {
    throw ShapeMismatch("softmax_ce: label count does not match logits");
  }
  return ce_stats(logits, labels).loss;
}

Var Tape::softmax_ce(Var logits, std::vector<std::uint8_t> labels) {
  const Tensor& lv = nodes_.at(logits.id).value;
  const Shape& s = lv.shape;
  if (labels.size() != static_cast<std::size_t>(s.n) * s.h * s.w) {
    throw ShapeMismatch("softmax_ce: label count does not match logits");
  }
  for (std::uint8_t y : labels) {
    if (y != kIgnoreLabel && y >= s.c) {
      throw std::invalid_argument("softmax_ce: label " + std::to_string(y) + " out of range");
    }
  }
  Node n;
  n.op = Op::softmax_ce;
  n.parents = {logits.id};
  n.value = Tensor(Shape{1, 1, 1, 1}, ce_stats(lv, labels).loss);
  n.labels = std::move(labels);
  return push(std::move(n));
}

void Tape::backward_node(Node& node) {
  const Tensor& g = node.grad;
  switch (node.op) {
    case Op::input:
      break;
    case Op::param: {
      const std::vector<double> pulled = node.parameter->kernel().project(g.data);
      auto& pg = node.parameter->grad();
      for (std::size_t i = 0; i < pulled.size(); ++i) pg[i] += pulled[i];
      break;
    }
    case Op::conv2d:
    case Op::conv1x1: {
      const std::size_t kid = node.parents[0];
      const std::size_t xid = node.parents[1];
      detail::ConvGeometry geo = geometry(nodes_[kid].value, nodes_[xid].value);
      geo.padding = node.padding;
      double* dk = grad_of(kid).data.data();
      double* dx = grad_of(xid).data.data();
      detail::conv_backward(geo, nodes_[xid].value.data.data(), nodes_[kid].value.data.data(),
                            g.data.data(), dx, dk);
      break;
    }
    case Op::add:
      for (std::size_t pid : node.parents) {
        Tensor& pg = grad_of(pid);
        for (std::size_t i = 0; i < g.data.size(); ++i) pg.data[i] += g.data[i];
      }
      break;
    case Op::scale: {
      Tensor& pg = grad_of(node.parents[0]);
      for (std::size_t i = 0; i < g.data.size(); ++i) pg.data[i] += node.factor * g.data[i];
      break;
    }
    case Op::concat_channels: {
      const Shape& s = node.value.shape;
      const std::size_t pixels = static_cast<std::size_t>(s.n) * s.h * s.w;
      int offset = 0;
      for (std::size_t pid : node.parents) {
        Tensor& pg = grad_of(pid);
        const int c = pg.shape.c;
        for (std::size_t px = 0; px < pixels; ++px) {
          const double* src = g.data.data() + px * s.c + offset;
          double* dst = pg.data.data() + px * c;
          for (int k = 0; k < c; ++k) dst[k] += src[k];
        }
        offset += c;
      }
      break;
    }
    case Op::block_max: {
      Tensor& pg = grad_of(node.parents[0]);
      const int block = node.value.shape.c;
      const int full = pg.shape.c;
      const std::size_t pixels = node.value.shape.size() / block;
      for (std::size_t px = 0; px < pixels; ++px) {
        for (int c = 0; c < block; ++c) {
          const std::size_t o = px * block + c;
          pg.data[px * full + static_cast<std::size_t>(node.argmax[o]) * block + c] += g.data[o];
        }
      }
      break;
    }
    case Op::softmax_ce: {
      const Tensor& lv = nodes_[node.parents[0]].value;
      Tensor& pg = grad_of(node.parents[0]);
      const Shape& s = lv.shape;
      const std::size_t per_map = static_cast<std::size_t>(s.h) * s.w;
      const CeStats st = ce_stats(lv, node.labels);
      std::vector<double> prob(s.c);
      for (int b = 0; b < s.n; ++b) {
        if (st.labelled_per_map[b] == 0) continue;
        const double w = g.data[0] / (static_cast<double>(s.n) * st.labelled_per_map[b]);
        for (std::size_t p = 0; p < per_map; ++p) {
          const std::uint8_t y = node.labels[b * per_map + p];
          if (y == kIgnoreLabel) continue;
          const std::size_t base = (b * per_map + p) * s.c;
          const double* z = lv.data.data() + base;
          const double zmax = *std::max_element(z, z + s.c);
          double denom = 0.0;
          for (int c = 0; c < s.c; ++c) {
            prob[c] = std::exp(z[c] - zmax);
            denom += prob[c];
          }
          for (int c = 0; c < s.c; ++c) {
            pg.data[base + c] += w * (prob[c] / denom - (c == y ? 1.0 : 0.0));
          }
        }
      }
      break;
    }
  }
}

void Tape::backward(Var loss, bool keep_intermediate) {
  if (nodes_.at(loss.id).value.data.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar");
  }
  for (Node& n : nodes_) n.grad = Tensor();
  nodes_[loss.id].grad = Tensor(nodes_[loss.id].value.shape, 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.data.empty()) continue;
    backward_node(n);
    if (!keep_intermediate && n.op != Op::input && n.op != Op::param) {
      n.grad = Tensor();
    }
  }
}

void rmsprop_update(std::span<double> params, std::span<const double> grads,
                    std::span<double> second_moment, const RmsPropConfig& config) {
  if (params.size() != grads.size() || params.size() != second_moment.size()) {
    throw ShapeMismatch("rmsprop_update: length mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    second_moment[i] = config.decay * second_moment[i] + (1.0 - config.decay) * g * g;
    params[i] -= config.learning_rate * g / (std::sqrt(second_moment[i]) + config.epsilon);
  }
}

void RmsProp::step(std::span<Parameter> params) {
  if (second_moments_.size() != params.size()) {
    second_moments_.assign(params.size(), {});
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = params[k];
    auto& v = second_moments_[k];
    if (v.size() != p.kernel().parameter_count()) v.assign(p.kernel().parameter_count(), 0.0);
    const auto r = p.kernel().raw();
    std::vector<double> raw(r.begin(), r.end());
    rmsprop_update(raw, p.grad(), v, config_);
    p.kernel().set_raw(std::move(raw));
  }
}

}  // namespace symplan::ad
