#pragma once

#include <cmath>
#include <map>
#include <string>

#include "rfdn/tensor.hpp"

namespace rfdn {

/// Piecewise-constant halving schedule:
/// lr(step) = initial * 2^(-floor(step / half_life)).
struct LrSchedule {
  double initial = 5e-4;
  std::int64_t half_life = 200000;

  double at(std::int64_t step) const {
    if (step < 0) throw ConfigError("lr schedule: negative step");
    return std::ldexp(initial, -static_cast<int>(step / half_life));
  }
};

inline double lr_at(const LrSchedule& s, std::int64_t step) { return s.at(step); }

/// Adam moments, one pair of tensors per named parameter.
template <typename S>
struct AdamState {
  std::map<std::string, Tensor<S>> m, v;
  std::int64_t t = 0;
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
};

/// One Adam update with bias correction:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps).
template <typename S>
void adam_step(std::map<std::string, Tensor<S>>& params,
               const std::map<std::string, Tensor<S>>& grads,
               AdamState<S>& state, S lr) {
  ++state.t;
  const S c1 = S(1) - std::pow(state.beta1, static_cast<S>(state.t));
  const S c2 = S(1) - std::pow(state.beta2, static_cast<S>(state.t));
  for (auto& [name, p] : params) {
    const auto git = grads.find(name);
    if (git == grads.end())
      throw ConfigError("adam_step: missing gradient for " + name);
    const Tensor<S>& g = git->second;
    if (!(g.shape() == p.shape()))
      throw ShapeError("adam_step: gradient shape mismatch for " + name);
    Tensor<S>& m = state.m.try_emplace(name, Tensor<S>(p.shape())).first->second;
    Tensor<S>& v = state.v.try_emplace(name, Tensor<S>(p.shape())).first->second;
    for (index_t i = 0; i < p.numel(); ++i) {
      m[i] = state.beta1 * m[i] + (S(1) - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (S(1) - state.beta2) * g[i] * g[i];
      const S mhat = m[i] / c1;
      const S vhat = v[i] / c2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace rfdn
