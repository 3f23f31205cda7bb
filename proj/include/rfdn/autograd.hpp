#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "rfdn/ops.hpp"
#include "rfdn/tensor.hpp"

namespace rfdn::ad {

/// Handle to a node on a Tape.
struct Var {
  int i = -1;
  bool valid() const { return i >= 0; }
};

/// Reverse-mode computation record. Every recorded op computes its value
/// eagerly and stores a closure implementing its chain rule; backward()
/// walks the record in reverse. Nodes are appended in execution order, so
/// topological order holds by construction.
template <typename S>
class Tape {
 public:
  Var leaf(Tensor<S> value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor<S>& value(Var v) const { return node(v).value; }

  /// Gradient accumulated for v by the last backward(); zero if the loss
  /// does not depend on it.
  const Tensor<S>& grad(Var v) {
    Node& nd = node(v);
    if (nd.grad.empty()) nd.grad = Tensor<S>(nd.value.shape());
    return nd.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  void clear() { nodes_.clear(); }

  Var conv2d(Var x, Var kernel, Var bias, int pad) {
    const Tensor<S>& xv = value(x);
    const Tensor<S>& kv = value(kernel);
    const Tensor<S>& bv = value(bias);
    if (bv.numel() != kv.n())
      throw ShapeError("conv2d: bias numel does not match c_out");
    Tensor<S> out = rfdn::conv2d(xv, kv, bv.data(), pad);
    return record(std::move(out), [this, x, kernel, bias, pad](Node& self) {
      Tensor<S>* gx = touch(x);
      Tensor<S>* gk = touch(kernel);
      Tensor<S>* gb = touch(bias);
      conv2d_backward(value(x), value(kernel), pad, self.grad, gx, gk,
                      gb ? gb->data() : nullptr);
    });
  }

  Var leaky_relu(Var x, S slope) {
    Tensor<S> out = rfdn::leaky_relu(value(x), slope);
    return record(std::move(out), [this, x, slope](Node& self) {
      Tensor<S>* gx = touch(x);
      if (!gx) return;
      const Tensor<S>& xv = value(x);
      for (index_t i = 0; i < xv.numel(); ++i)
        (*gx)[i] += self.grad[i] * (xv[i] > S(0) ? S(1) : slope);
    });
  }

  Var pixel_shuffle(Var x, int r) {
    Tensor<S> out = rfdn::pixel_shuffle(value(x), r);
    return record(std::move(out), [this, x, r](Node& self) {
      Tensor<S>* gx = touch(x);
      if (!gx) return;
      // Gradient of a permutation is the inverse permutation.
      Tensor<S> g = pixel_unshuffle(self.grad, r);
      for (index_t i = 0; i < g.numel(); ++i) (*gx)[i] += g[i];
    });
  }

  Var concat_channels(std::vector<Var> xs) {
    std::vector<const Tensor<S>*> vals;
    vals.reserve(xs.size());
    for (Var v : xs) vals.push_back(&value(v));
    Tensor<S> out = rfdn::concat_channels(vals);
    return record(std::move(out), [this, xs = std::move(xs)](Node& self) {
      index_t coff = 0;
      for (Var v : xs) {
        const index_t ci = value(v).c();
        if (Tensor<S>* gx = touch(v)) {
          const Tensor<S>& g = self.grad;
          const index_t hw = g.h() * g.w();
          for (index_t n = 0; n < g.n(); ++n)
            for (index_t c = 0; c < ci; ++c) {
              const S* src = g.data() + g.offset(n, coff + c, 0, 0);
              S* dst = gx->data() + gx->offset(n, c, 0, 0);
              for (index_t i = 0; i < hw; ++i) dst[i] += src[i];
            }
        }
        coff += ci;
      }
    });
  }

  Var slice_channels(Var x, index_t c0, index_t c1) {
    Tensor<S> out = rfdn::slice_channels(value(x), c0, c1);
    return record(std::move(out), [this, x, c0, c1](Node& self) {
      Tensor<S>* gx = touch(x);
      if (!gx) return;
      const Tensor<S>& g = self.grad;
      const index_t hw = g.h() * g.w();
      for (index_t n = 0; n < g.n(); ++n)
        for (index_t c = c0; c < c1; ++c) {
          const S* src = g.data() + g.offset(n, c - c0, 0, 0);
          S* dst = gx->data() + gx->offset(n, c, 0, 0);
          for (index_t i = 0; i < hw; ++i) dst[i] += src[i];
        }
    });
  }

  Var add(Var a, Var b) {
    Tensor<S> out = rfdn::add(value(a), value(b));
    return record(std::move(out), [this, a, b](Node& self) {
      for (Var v : {a, b})
        if (Tensor<S>* g = touch(v))
          for (index_t i = 0; i < self.grad.numel(); ++i)
            (*g)[i] += self.grad[i];
    });
  }

  Var sigmoid(Var x) {
    Tensor<S> out = rfdn::sigmoid(value(x));
    return record(std::move(out), [this, x](Node& self) {
      Tensor<S>* gx = touch(x);
      if (!gx) return;
      for (index_t i = 0; i < self.value.numel(); ++i) {
        const S s = self.value[i];
        (*gx)[i] += self.grad[i] * s * (S(1) - s);
      }
    });
  }

  Var contrast_pool(Var x) {
    Tensor<S> out = rfdn::contrast_pool(value(x));
    return record(std::move(out), [this, x](Node& self) {
      Tensor<S>* gx = touch(x);
      if (!gx) return;
      const Tensor<S>& xv = value(x);
      const index_t hw = xv.h() * xv.w();
      auto [means, stds] = channel_stats_pool(xv);
      for (index_t nc = 0; nc < xv.n() * xv.c(); ++nc) {
        const S g = self.grad[nc];
        const S mean = means[nc], sd = stds[nc];
        const S* p = xv.data() + nc * hw;
        S* q = gx->data() + nc * hw;
        // d(mean)/dx = 1/hw; d(std)/dx = (x - mean)/(hw * std), taken as 0
        // at zero variance.
        for (index_t i = 0; i < hw; ++i) {
          S d = S(1) / static_cast<S>(hw);
          if (sd > S(0)) d += (p[i] - mean) / (static_cast<S>(hw) * sd);
          q[i] += g * d;
        }
      }
    });
  }

  Var scale_channels(Var x, Var s) {
    Tensor<S> out = rfdn::scale_channels(value(x), value(s));
    return record(std::move(out), [this, x, s](Node& self) {
      const Tensor<S>& xv = value(x);
      const Tensor<S>& sv = value(s);
      const index_t hw = xv.h() * xv.w();
      if (Tensor<S>* gx = touch(x))
        for (index_t nc = 0; nc < xv.n() * xv.c(); ++nc) {
          const S g = sv[nc];
          const S* src = self.grad.data() + nc * hw;
          S* dst = gx->data() + nc * hw;
          for (index_t i = 0; i < hw; ++i) dst[i] += src[i] * g;
        }
      if (Tensor<S>* gs = touch(s))
        for (index_t nc = 0; nc < xv.n() * xv.c(); ++nc) {
          const S* gp = self.grad.data() + nc * hw;
          const S* xp = xv.data() + nc * hw;
          S acc = S(0);
          for (index_t i = 0; i < hw; ++i) acc += gp[i] * xp[i];
          (*gs)[nc] += acc;
        }
    });
  }

  /// Fixed projection to a (1,1,1,1) scalar: sum_i w_i * x_i.
  Var weighted_sum(Var x, Tensor<S> w) {
    const Tensor<S>& xv = value(x);
    if (!(xv.shape() == w.shape()))
      throw ShapeError("weighted_sum: shape mismatch");
    double acc = 0.0;
    for (index_t i = 0; i < xv.numel(); ++i)
      acc += static_cast<double>(w[i]) * static_cast<double>(xv[i]);
    Tensor<S> out(1, 1, 1, 1);
    out[0] = static_cast<S>(acc);
    return record(std::move(out), [this, x, w = std::move(w)](Node& self) {
      if (Tensor<S>* gx = touch(x))
        for (index_t i = 0; i < w.numel(); ++i)
          (*gx)[i] += self.grad[0] * w[i];
    });
  }

  /// Mean absolute difference over all elements; terminal (1,1,1,1) scalar.
  Var l1_loss(Var pred, Var target) {
    const Tensor<S>& p = value(pred);
    const Tensor<S>& t = value(target);
    if (!(p.shape() == t.shape()))
      throw ShapeError("l1_loss: shape mismatch " + p.shape().str() + " vs " +
                       t.shape().str());
    double acc = 0.0;
    for (index_t i = 0; i < p.numel(); ++i)
      acc += std::abs(static_cast<double>(p[i]) - static_cast<double>(t[i]));
    Tensor<S> out(1, 1, 1, 1);
    out[0] = static_cast<S>(acc / static_cast<double>(p.numel()));
    return record(std::move(out), [this, pred, target](Node& self) {
      const Tensor<S>& p = value(pred);
      const Tensor<S>& t = value(target);
      const S g = self.grad[0] / static_cast<S>(p.numel());
      auto sign = [](S v) { return v > S(0) ? S(1) : (v < S(0) ? S(-1) : S(0)); };
      if (Tensor<S>* gp = touch(pred))
        for (index_t i = 0; i < p.numel(); ++i)
          (*gp)[i] += g * sign(p[i] - t[i]);
      if (Tensor<S>* gt = touch(target))
        for (index_t i = 0; i < p.numel(); ++i)
          (*gt)[i] -= g * sign(p[i] - t[i]);
    });
  }

  /// Accumulate chain-rule gradients for everything the scalar loss node
  /// depends on.
  void backward(Var loss) {
    Node& terminal = node(loss);
    if (terminal.value.numel() != 1)
      throw UsageError("backward: terminal node is not a scalar, shape " +
                       terminal.value.shape().str());
    if (terminal.grad.empty()) terminal.grad = Tensor<S>(terminal.value.shape());
    terminal.grad[0] = S(1);
    for (int i = loss.i; i >= 0; --i) {
      Node& nd = nodes_[static_cast<std::size_t>(i)];
      if (nd.back && !nd.grad.empty()) nd.back(nd);
    }
  }

 private:
  struct Node {
    Tensor<S> value;
    Tensor<S> grad;  // allocated on first touch
    std::function<void(Node&)> back;
  };

  Node& node(Var v) {
    if (!v.valid() || v.i >= static_cast<int>(nodes_.size()))
      throw UsageError("invalid tape variable");
    return nodes_[static_cast<std::size_t>(v.i)];
  }
  const Node& node(Var v) const {
    if (!v.valid() || v.i >= static_cast<int>(nodes_.size()))
      throw UsageError("invalid tape variable");
    return nodes_[static_cast<std::size_t>(v.i)];
  }

  // Gradient buffer of a parent node, allocating on demand.
  Tensor<S>* touch(Var v) {
    Node& nd = node(v);
    if (nd.grad.empty()) nd.grad = Tensor<S>(nd.value.shape());
    return &nd.grad;
  }

  template <typename Fn>
  Var record(Tensor<S> value, Fn&& back) {
    nodes_.push_back(Node{std::move(value), {}, std::forward<Fn>(back)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

}  // namespace rfdn::ad
