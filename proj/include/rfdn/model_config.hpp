#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rfdn/tensor.hpp"

namespace rfdn {

/// Everything that determines a network instance.
struct ModelConfig {
  int scale = 4;
  int channels = 48;    // 48 for RFDN, 52 for RFDN-L
  int num_blocks = 6;
  double distill_rate = 0.5;

  int distilled() const {
    return static_cast<int>(std::lround(channels * distill_rate));
  }
  // Bottleneck width of the contrast-aware attention gate.
  int cca_reduced() const { return std::max(1, channels / 16); }

  void validate() const {
    if (scale < 2 || scale > 4)
      throw ConfigError("scale must be 2, 3 or 4, got " +
                        std::to_string(scale));
    if (channels < 2) throw ConfigError("channels must be >= 2");
    if (num_blocks < 1) throw ConfigError("num_blocks must be >= 1");
    const int d = distilled();
    if (d < 1 || d >= channels)
      throw ConfigError("distill_rate " + std::to_string(distill_rate) +
                        " gives distilled width " + std::to_string(d) +
                        " outside [1, channels)");
  }
};

/// Block interior used when stacking the network body.
///   rfdb    - 1x1 distillation branches + shallow residual blocks
///   fdc     - 1x1 distillation branches + plain convolutions
///   srb     - shallow residual blocks only, no distillation branches
///   base    - plain convolutions only, no distillation branches
///   imdb    - single wide 3x3 per stage, split into distilled/coarse parts
///   imdb_r  - the imdb stage decoupled into parallel distill/refine convs
enum class BlockKind { rfdb, fdc, srb, base, imdb, imdb_r };

/// The four ablation blocks; a subset of BlockKind.
using BlockVariant = BlockKind;

inline std::string to_string(BlockKind k) {
  switch (k) {
    case BlockKind::rfdb: return "rfdb";
    case BlockKind::fdc: return "fdc";
    case BlockKind::srb: return "srb";
    case BlockKind::base: return "base";
    case BlockKind::imdb: return "imdb";
    case BlockKind::imdb_r: return "imdb_r";
  }
  return "?";
}

inline BlockKind block_kind_from_string(const std::string& s) {
  if (s == "rfdb") return BlockKind::rfdb;
  if (s == "fdc") return BlockKind::fdc;
  if (s == "srb") return BlockKind::srb;
  if (s == "base") return BlockKind::base;
  if (s == "imdb") return BlockKind::imdb;
  if (s == "imdb_r" || s == "imdb-r") return BlockKind::imdb_r;
  throw UsageError("unknown block variant '" + s + "'");
}

/// One convolution layer of the network, by name and shape. The layer list
/// is the single source of truth for construction, initialization and the
/// complexity counters.
struct LayerSpec {
  std::string name;
  int c_in = 0;
  int c_out = 0;
  int k = 0;
  bool unit_res = false;  // attention convs run on pooled 1x1 maps
};

inline void append_cca_layers(std::vector<LayerSpec>& out,
                              const std::string& prefix,
                              const ModelConfig& cfg) {
  out.push_back({prefix + "cca.down", cfg.channels, cfg.cca_reduced(), 1, true});
  out.push_back({prefix + "cca.up", cfg.cca_reduced(), cfg.channels, 1, true});
}

inline std::vector<LayerSpec> block_layers(const ModelConfig& cfg,
                                           BlockKind kind,
                                           const std::string& prefix) {
  const int c = cfg.channels;
  const int d = cfg.distilled();
  std::vector<LayerSpec> out;
  switch (kind) {
    case BlockKind::rfdb:
    case BlockKind::fdc:
      for (int j = 1; j <= 3; ++j) {
        out.push_back({prefix + "dl" + std::to_string(j), c, d, 1});
        out.push_back({prefix + "r" + std::to_string(j), c, c, 3});
      }
      out.push_back({prefix + "l4", c, d, 3});
      out.push_back({prefix + "fuse", 4 * d, c, 1});
      break;
    case BlockKind::srb:
    case BlockKind::base:
      for (int j = 1; j <= 4; ++j)
        out.push_back({prefix + "c" + std::to_string(j), c, c, 3});
      break;
    case BlockKind::imdb:
      // Each stage produces the distilled part and the full-width coarse
      // part from one wide convolution; the split peels off the first d
      // channels.
      for (int j = 1; j <= 3; ++j)
        out.push_back({prefix + "l" + std::to_string(j), c, d + c, 3});
      out.push_back({prefix + "l4", c, d, 3});
      out.push_back({prefix + "fuse", 4 * d, c, 1});
      break;
    case BlockKind::imdb_r:
      for (int j = 1; j <= 3; ++j) {
        out.push_back({prefix + "dl" + std::to_string(j), c, d, 3});
        out.push_back({prefix + "rl" + std::to_string(j), c, c, 3});
      }
      out.push_back({prefix + "dl4", c, d, 3});
      out.push_back({prefix + "fuse", 4 * d, c, 1});
      break;
  }
  append_cca_layers(out, prefix, cfg);
  return out;
}

/// Layer inventory for the whole network: extraction conv, stacked blocks,
/// the 1x1 + 3x3 fusion pair over the concatenated block outputs, and the
/// reconstruction conv feeding the sub-pixel upsampler.
inline std::vector<LayerSpec> model_layers(const ModelConfig& cfg,
                                           BlockKind kind = BlockKind::rfdb) {
  cfg.validate();
  const int c = cfg.channels;
  std::vector<LayerSpec> out;
  out.push_back({"head", 3, c, 3});
  for (int b = 1; b <= cfg.num_blocks; ++b) {
    auto blk = block_layers(cfg, kind, "block" + std::to_string(b) + ".");
    out.insert(out.end(), blk.begin(), blk.end());
  }
  out.push_back({"fuse1", cfg.num_blocks * c, c, 1});
  out.push_back({"fuse3", c, c, 3});
  out.push_back({"recon", c, 3 * cfg.scale * cfg.scale, 3});
  return out;
}

/// Kernel + bias element count over a layer list.
inline std::int64_t param_count(const std::vector<LayerSpec>& layers) {
  std::int64_t total = 0;
  for (const LayerSpec& l : layers)
    total += static_cast<std::int64_t>(l.c_in) * l.c_out * l.k * l.k + l.c_out;
  return total;
}

inline std::int64_t param_count(const ModelConfig& cfg,
                                BlockKind kind = BlockKind::rfdb) {
  return param_count(model_layers(cfg, kind));
}

/// Multiply-accumulate count for one forward pass producing an hr_h x hr_w
/// output. Every conv runs at LR resolution (the network upsamples last);
/// attention convs see pooled 1x1 maps. Conv cost is c_in*c_out*k^2 per
/// site; pooling and elementwise work is excluded.
inline std::int64_t mult_adds(const std::vector<LayerSpec>& layers, int scale,
                              std::int64_t hr_h, std::int64_t hr_w) {
  const std::int64_t lh = (hr_h + scale - 1) / scale;
  const std::int64_t lw = (hr_w + scale - 1) / scale;
  std::int64_t total = 0;
  for (const LayerSpec& l : layers) {
    const std::int64_t sites = l.unit_res ? 1 : lh * lw;
    total += static_cast<std::int64_t>(l.c_in) * l.c_out * l.k * l.k * sites;
  }
  return total;
}

inline std::int64_t mult_adds(const ModelConfig& cfg, std::int64_t hr_h,
                              std::int64_t hr_w,
                              BlockKind kind = BlockKind::rfdb) {
  return mult_adds(model_layers(cfg, kind), cfg.scale, hr_h, hr_w);
}

}  // namespace rfdn
