#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rfdn/autograd.hpp"
#include "rfdn/model_config.hpp"
#include "rfdn/ops.hpp"
#include "rfdn/weight_store.hpp"

namespace rfdn {

// The block and network forwards below are written once against a small
// execution-context interface and instantiated either eagerly on tensors
// (inference) or on an autograd tape (training, gradient checks).

template <typename S>
struct EagerCtx {
  using Value = Tensor<S>;
  struct Conv {
    const ConvWeights<S>* w;
  };

  explicit EagerCtx(const TypedWeights<S>& tw) : weights(&tw) {}
  const TypedWeights<S>* weights;

  Conv conv(const std::string& name) const { return {&weights->at(name)}; }
  Value conv2d(const Value& x, Conv c) const { return conv2d_same(x, *c.w); }
  Value act(const Value& x) const {
    return leaky_relu(x, static_cast<S>(kLeakySlope));
  }
  Value add(const Value& a, const Value& b) const { return rfdn::add(a, b); }
  Value concat(const std::vector<Value>& xs) const {
    return concat_channels(xs);
  }
  Value slice(const Value& x, index_t c0, index_t c1) const {
    return slice_channels(x, c0, c1);
  }
  Value pixel_shuffle(const Value& x, int r) const {
    return rfdn::pixel_shuffle(x, r);
  }
  Value sigmoid(const Value& x) const { return rfdn::sigmoid(x); }
  Value contrast_pool(const Value& x) const { return rfdn::contrast_pool(x); }
  Value scale_channels(const Value& x, const Value& s) const {
    return rfdn::scale_channels(x, s);
  }
};

template <typename S>
struct TapeCtx {
  using Value = ad::Var;
  struct Conv {
    ad::Var kernel, bias;
    int pad;
  };

  TapeCtx(ad::Tape<S>& t, const TypedWeights<S>& tw) : tape(&t) {
    for (const auto& [name, cw] : tw.all()) {
      Tensor<S> bias(1, cw.c_out(), 1, 1);
      for (index_t i = 0; i < cw.c_out(); ++i) bias[i] = cw.bias[i];
      params.emplace(name, Conv{t.leaf(cw.kernel), t.leaf(std::move(bias)),
                                (cw.k() - 1) / 2});
    }
  }

  ad::Tape<S>* tape;
  std::map<std::string, Conv> params;

  Conv conv(const std::string& name) const {
    const auto it = params.find(name);
    if (it == params.end()) throw ConfigError("no such layer: " + name);
    return it->second;
  }
  Value conv2d(Value x, Conv c) const {
    return tape->conv2d(x, c.kernel, c.bias, c.pad);
  }
  Value act(Value x) const {
    return tape->leaky_relu(x, static_cast<S>(kLeakySlope));
  }
  Value add(Value a, Value b) const { return tape->add(a, b); }
  Value concat(const std::vector<Value>& xs) const {
    return tape->concat_channels(xs);
  }
  Value slice(Value x, index_t c0, index_t c1) const {
    return tape->slice_channels(x, c0, c1);
  }
  Value pixel_shuffle(Value x, int r) const {
    return tape->pixel_shuffle(x, r);
  }
  Value sigmoid(Value x) const { return tape->sigmoid(x); }
  Value contrast_pool(Value x) const { return tape->contrast_pool(x); }
  Value scale_channels(Value x, Value s) const {
    return tape->scale_channels(x, s);
  }
};

/// Shallow residual block: act(conv3x3(x) + x). No parameters beyond the
/// convolution itself.
template <class Ctx>
typename Ctx::Value srb_forward(Ctx& cx, const typename Ctx::Value& x,
                                typename Ctx::Conv w) {
  return cx.act(cx.add(cx.conv2d(x, w), x));
}

/// Contrast-aware channel attention: a per-channel sigmoid gate computed
/// from the spatial mean + standard deviation through a 1x1 bottleneck.
template <class Ctx>
typename Ctx::Value cca_forward(Ctx& cx, const typename Ctx::Value& x,
                                typename Ctx::Conv down,
                                typename Ctx::Conv up) {
  auto stats = cx.contrast_pool(x);
  auto gate = cx.sigmoid(cx.conv2d(cx.act(cx.conv2d(stats, down)), up));
  return cx.scale_channels(x, gate);
}

template <class Ctx>
typename Ctx::Value block_forward(Ctx& cx, const typename Ctx::Value& x,
                                  const ModelConfig& cfg, BlockKind kind,
                                  const std::string& prefix) {
  using Value = typename Ctx::Value;
  const index_t c = cfg.channels;
  const index_t d = cfg.distilled();
  auto cv = [&](const char* name) { return cx.conv(prefix + name); };

  Value fused = x;
  switch (kind) {
    case BlockKind::rfdb:
    case BlockKind::fdc: {
      const bool residual = kind == BlockKind::rfdb;
      Value cur = x;
      std::vector<Value> distilled;
      for (int j = 1; j <= 3; ++j) {
        const std::string js = std::to_string(j);
        distilled.push_back(cx.act(cx.conv2d(cur, cx.conv(prefix + "dl" + js))));
        auto refined = cx.conv2d(cur, cx.conv(prefix + "r" + js));
        cur = residual ? cx.act(cx.add(refined, cur)) : cx.act(refined);
      }
      distilled.push_back(cx.act(cx.conv2d(cur, cv("l4"))));
      fused = cx.conv2d(cx.concat(distilled), cv("fuse"));
      break;
    }
    case BlockKind::srb:
    case BlockKind::base: {
      Value cur = x;
      for (int j = 1; j <= 4; ++j) {
        auto w = cx.conv(prefix + "c" + std::to_string(j));
        cur = kind == BlockKind::srb ? srb_forward(cx, cur, w)
                                     : cx.act(cx.conv2d(cur, w));
      }
      fused = cur;
      break;
    }
    case BlockKind::imdb: {
      // Progressive refinement: each stage's wide conv output splits into
      // the retained (first d channels) and coarse parts.
      Value cur = x;
      std::vector<Value> distilled;
      for (int j = 1; j <= 3; ++j) {
        auto y = cx.act(cx.conv2d(cur, cx.conv(prefix + "l" + std::to_string(j))));
        distilled.push_back(cx.slice(y, 0, d));
        cur = cx.slice(y, d, d + c);
      }
      distilled.push_back(cx.act(cx.conv2d(cur, cv("l4"))));
      fused = cx.conv2d(cx.concat(distilled), cv("fuse"));
      break;
    }
    case BlockKind::imdb_r: {
      // The split decoupled into parallel distill/refine convolutions.
      Value cur = x;
      std::vector<Value> distilled;
      for (int j = 1; j <= 3; ++j) {
        const std::string js = std::to_string(j);
        distilled.push_back(cx.act(cx.conv2d(cur, cx.conv(prefix + "dl" + js))));
        cur = cx.act(cx.conv2d(cur, cx.conv(prefix + "rl" + js)));
      }
      distilled.push_back(cx.act(cx.conv2d(cur, cv("dl4"))));
      fused = cx.conv2d(cx.concat(distilled), cv("fuse"));
      break;
    }
  }
  auto gated = cca_forward(cx, fused, cv("cca.down"), cv("cca.up"));
  return cx.add(gated, x);
}

/// Whole network: extraction conv, num_blocks chained blocks, 1x1 + 3x3
/// fusion over the concatenated block outputs, global skip, reconstruction
/// conv and sub-pixel upsampling.
template <class Ctx>
typename Ctx::Value model_forward(Ctx& cx, const typename Ctx::Value& lr,
                                  const ModelConfig& cfg,
                                  BlockKind kind = BlockKind::rfdb) {
  using Value = typename Ctx::Value;
  Value f0 = cx.conv2d(lr, cx.conv("head"));
  std::vector<Value> features;
  Value cur = f0;
  for (int b = 1; b <= cfg.num_blocks; ++b) {
    cur = block_forward(cx, cur, cfg, kind,
                        "block" + std::to_string(b) + ".");
    features.push_back(cur);
  }
  Value assembled = cx.conv2d(
      cx.act(cx.conv2d(cx.concat(features), cx.conv("fuse1"))),
      cx.conv("fuse3"));
  Value body = cx.add(assembled, f0);
  return cx.pixel_shuffle(cx.conv2d(body, cx.conv("recon")), cfg.scale);
}

/// Freshly initialized RFDN weights for the given configuration.
inline WeightStore build_rfdn(const ModelConfig& cfg, std::uint64_t seed) {
  return init_weights(model_layers(cfg, BlockKind::rfdb), seed);
}

inline WeightStore build_variant(BlockVariant kind, const ModelConfig& cfg,
                                 std::uint64_t seed) {
  return init_weights(model_layers(cfg, kind), seed);
}

/// Splits one convolution into the pair that computes the same map in two
/// parts: DL takes output filters [0, distilled), RL the rest, biases
/// likewise. concat(DL(x), RL(x)) == L(x) for every x by construction.
template <typename S>
std::pair<ConvWeights<S>, ConvWeights<S>> split_decompose(
    const ConvWeights<S>& L, index_t distilled) {
  const index_t co = L.c_out();
  if (distilled < 1 || distilled >= co)
    throw ConfigError("split_decompose: distilled " +
                      std::to_string(distilled) + " outside [1, c_out)");
  const index_t ci = L.c_in();
  const int k = L.k();
  Tensor<S> dk(distilled, ci, k, k), rk(co - distilled, ci, k, k);
  const index_t fsz = ci * k * k;
  std::copy(L.kernel.data(), L.kernel.data() + distilled * fsz, dk.data());
  std::copy(L.kernel.data() + distilled * fsz,
            L.kernel.data() + co * fsz, rk.data());
  std::vector<S> db(L.bias.begin(), L.bias.begin() + distilled);
  std::vector<S> rb(L.bias.begin() + distilled, L.bias.end());
  return {ConvWeights<S>(std::move(dk), std::move(db)),
          ConvWeights<S>(std::move(rk), std::move(rb))};
}

/// Rewrites an imdb-block store as the equivalent imdb_r-block store by
/// decomposing every stage convolution.
inline WeightStore decompose_imdb_store(const WeightStore& store,
                                        const ModelConfig& cfg) {
  const index_t d = cfg.distilled();
  WeightStore out;
  for (const auto& [name, t] : store) out.emplace(name, t);
  for (int b = 1; b <= cfg.num_blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    for (int j = 1; j <= 3; ++j) {
      const std::string js = std::to_string(j);
      const Tensor<float>& kw = store.at(p + "l" + js + ".weight");
      const Tensor<float>& kb = store.at(p + "l" + js + ".bias");
      std::vector<float> bias(static_cast<std::size_t>(kb.numel()));
      for (index_t i = 0; i < kb.numel(); ++i)
        bias[static_cast<std::size_t>(i)] = kb[i];
      auto [dl, rl] = split_decompose(ConvWeights<float>(kw, std::move(bias)), d);
      auto put = [&out](const std::string& base, const ConvWeights<float>& cw) {
        out[base + ".weight"] = cw.kernel;
        Tensor<float> b(1, cw.c_out(), 1, 1);
        for (index_t i = 0; i < cw.c_out(); ++i) b[i] = cw.bias[i];
        out[base + ".bias"] = std::move(b);
      };
      put(p + "dl" + js, dl);
      put(p + "rl" + js, rl);
      out.erase(p + "l" + js + ".weight");
      out.erase(p + "l" + js + ".bias");
    }
    out[p + "dl4.weight"] = store.at(p + "l4.weight");
    out[p + "dl4.bias"] = store.at(p + "l4.bias");
    out.erase(p + "l4.weight");
    out.erase(p + "l4.bias");
  }
  return out;
}

/// [0,255] RGB in, [0,255] RGB out (clamped, not rounded). The network
/// itself computes on a [0,1] value range.
template <typename S>
Tensor<S> super_resolve(const ModelConfig& cfg, const TypedWeights<S>& tw,
                        const Tensor<S>& lr_rgb,
                        BlockKind kind = BlockKind::rfdb) {
  Tensor<S> x(lr_rgb.shape());
  for (index_t i = 0; i < x.numel(); ++i) x[i] = lr_rgb[i] / S(255);
  EagerCtx<S> cx(tw);
  Tensor<S> y = model_forward(cx, x, cfg, kind);
  for (index_t i = 0; i < y.numel(); ++i)
    y[i] = std::clamp(y[i] * S(255), S(0), S(255));
  return y;
}

/// Rounds an image tensor onto the 8-bit integer grid, as saving it would.
template <typename S>
void quantize_255(Tensor<S>& img) {
  for (index_t i = 0; i < img.numel(); ++i)
    img[i] = static_cast<S>(
        std::clamp<long>(std::lround(static_cast<double>(img[i])), 0, 255));
}

}  // namespace rfdn
