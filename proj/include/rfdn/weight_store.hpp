#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rfdn/model_config.hpp"
#include "rfdn/tensor.hpp"

namespace rfdn {

/// Named parameter tensors. std::map gives the lexicographic, run-stable
/// iteration order the serialization format requires. Kernels are stored
/// under "<layer>.weight" and biases under "<layer>.bias" (as (1,c,1,1)).
using WeightStore = std::map<std::string, Tensor<float>>;

// Deterministic uniforms built directly from mt19937_64 output, so streams
// are identical across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::int64_t uniform_below(std::mt19937_64& rng, std::int64_t n) {
  return static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n));
}

/// Fan-in-scaled uniform initialization: kernels U(-b, b) with
/// b = 1/sqrt(c_in * k * k), biases zero. Layers are visited in the order
/// given, so one seed fixes every parameter.
inline WeightStore init_weights(const std::vector<LayerSpec>& layers,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  WeightStore store;
  for (const LayerSpec& l : layers) {
    Tensor<float> kernel(l.c_out, l.c_in, l.k, l.k);
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.c_in) * l.k * l.k);
    for (index_t i = 0; i < kernel.numel(); ++i)
      kernel[i] = static_cast<float>((2.0 * uniform01(rng) - 1.0) * bound);
    store.emplace(l.name + ".weight", std::move(kernel));
    store.emplace(l.name + ".bias", Tensor<float>(1, l.c_out, 1, 1));
  }
  return store;
}

inline std::int64_t param_count(const WeightStore& store) {
  std::int64_t total = 0;
  for (const auto& [name, t] : store) total += t.numel();
  return total;
}

/// Checks a store against a layer inventory; returns the name of the first
/// tensor whose shape disagrees (or is missing), empty when consistent.
inline std::string first_mismatch(const WeightStore& store,
                                  const std::vector<LayerSpec>& layers) {
  for (const LayerSpec& l : layers) {
    const auto w = store.find(l.name + ".weight");
    if (w == store.end() ||
        !(w->second.shape() == Shape{l.c_out, l.c_in, l.k, l.k}))
      return l.name + ".weight";
    const auto b = store.find(l.name + ".bias");
    if (b == store.end() || !(b->second.shape() == Shape{1, l.c_out, 1, 1}))
      return l.name + ".bias";
  }
  std::size_t expected = 2 * layers.size();
  if (store.size() != expected)
    for (const auto& [name, t] : store) {
      bool known = false;
      for (const LayerSpec& l : layers)
        if (name == l.name + ".weight" || name == l.name + ".bias") {
          known = true;
          break;
        }
      if (!known) return name;
    }
  return {};
}

/// Weights of one model instance converted to the compute scalar type.
template <typename S>
class TypedWeights {
 public:
  TypedWeights() = default;

  TypedWeights(const WeightStore& store, const std::vector<LayerSpec>& layers) {
    for (const LayerSpec& l : layers) {
      const auto w = store.find(l.name + ".weight");
      const auto b = store.find(l.name + ".bias");
      if (w == store.end() || b == store.end())
        throw ConfigError("missing weights for layer " + l.name);
      std::vector<S> bias(static_cast<std::size_t>(b->second.numel()));
      for (index_t i = 0; i < b->second.numel(); ++i)
        bias[static_cast<std::size_t>(i)] = static_cast<S>(b->second[i]);
      convs_.emplace(l.name, ConvWeights<S>(w->second.template cast<S>(),
                                            std::move(bias)));
    }
  }

  const ConvWeights<S>& at(const std::string& name) const {
    const auto it = convs_.find(name);
    if (it == convs_.end()) throw ConfigError("no such layer: " + name);
    return it->second;
  }

  std::map<std::string, ConvWeights<S>>& all() { return convs_; }
  const std::map<std::string, ConvWeights<S>>& all() const { return convs_; }

 private:
  std::map<std::string, ConvWeights<S>> convs_;
};

/// Recovers the ModelConfig of an rfdb-block store from tensor shapes alone
/// (the inverse of model_layers, used to run inference from a weight file
/// without repeating structural flags).
inline ModelConfig infer_config(const WeightStore& store) {
  const auto head = store.find("head.weight");
  const auto recon = store.find("recon.weight");
  if (head == store.end() || recon == store.end())
    throw FormatError("weight store lacks head/recon tensors");
  ModelConfig cfg;
  cfg.channels = static_cast<int>(head->second.n());
  const int recon_out = static_cast<int>(recon->second.n());
  if (recon_out % 3 != 0)
    throw FormatError("reconstruction width not a multiple of 3");
  const int s2 = recon_out / 3;
  cfg.scale = static_cast<int>(std::lround(std::sqrt(double(s2))));
  if (cfg.scale * cfg.scale != s2)
    throw FormatError("reconstruction width is not 3*scale^2");
  int blocks = 0;
  while (store.count("block" + std::to_string(blocks + 1) + ".fuse.weight"))
    ++blocks;
  cfg.num_blocks = blocks;
  const auto dl1 = store.find("block1.dl1.weight");
  if (blocks < 1 || dl1 == store.end())
    throw FormatError("weight store has no recognizable blocks");
  cfg.distill_rate =
      static_cast<double>(dl1->second.n()) / static_cast<double>(cfg.channels);
  return cfg;
}

}  // namespace rfdn
