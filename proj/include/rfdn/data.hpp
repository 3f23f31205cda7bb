#pragma once

#include <iostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rfdn/resize.hpp"
#include "rfdn/tensor.hpp"
#include "rfdn/weight_store.hpp"

namespace rfdn {

/// Aligned HR/LR pair. Both sides hold integer values in [0,255]; the LR
/// side is the antialiased bicubic downscale of the HR side.
struct ImagePair {
  Tensor<float> hr;
  Tensor<float> lr;
  int scale = 0;
  std::string id;
};

/// Crop to the largest top-left-anchored region whose sides are multiples
/// of `scale`.
inline Tensor<float> modcrop(const Tensor<float>& img, int scale) {
  const index_t h = img.h() / scale * scale;
  const index_t w = img.w() / scale * scale;
  if (h == img.h() && w == img.w()) return img;
  Tensor<float> out(img.n(), img.c(), h, w);
  for (index_t n = 0; n < img.n(); ++n)
    for (index_t c = 0; c < img.c(); ++c)
      for (index_t y = 0; y < h; ++y)
        std::copy(img.data() + img.offset(n, c, y, 0),
                  img.data() + img.offset(n, c, y, 0) + w,
                  out.data() + out.offset(n, c, y, 0));
  return out;
}

/// HR -> (HR, LR): modcrop, antialiased bicubic 1/scale, clamp and round to
/// the 8-bit grid (the LR an on-disk degraded set would contain).
inline ImagePair degrade(const Tensor<float>& hr, int scale,
                         std::string id = {}) {
  if (scale < 2 || scale > 4)
    throw ConfigError("degrade: scale must be 2, 3 or 4");
  if (hr.h() < scale || hr.w() < scale)
    throw ConfigError("degrade: image " + hr.shape().str() +
                      " smaller than scale " + std::to_string(scale));
  ImagePair pair;
  pair.hr = modcrop(hr, scale);
  pair.lr = bicubic_resize(pair.hr, 1.0 / scale, /*antialias=*/true);
  for (index_t i = 0; i < pair.lr.numel(); ++i)
    pair.lr[i] = static_cast<float>(
        std::clamp<long>(std::lround(pair.lr[i]), 0, 255));
  pair.scale = scale;
  pair.id = std::move(id);
  return pair;
}

inline Tensor<float> flip_h(const Tensor<float>& t) {
  Tensor<float> out(t.shape());
  for (index_t n = 0; n < t.n(); ++n)
    for (index_t c = 0; c < t.c(); ++c)
      for (index_t y = 0; y < t.h(); ++y)
        for (index_t x = 0; x < t.w(); ++x)
          out(n, c, y, x) = t(n, c, y, t.w() - 1 - x);
  return out;
}

/// Quarter turn counterclockwise; (h,w) becomes (w,h).
inline Tensor<float> rot90(const Tensor<float>& t) {
  Tensor<float> out(t.n(), t.c(), t.w(), t.h());
  for (index_t n = 0; n < t.n(); ++n)
    for (index_t c = 0; c < t.c(); ++c)
      for (index_t y = 0; y < out.h(); ++y)
        for (index_t x = 0; x < out.w(); ++x)
          out(n, c, y, x) = t(n, c, x, t.w() - 1 - y);
  return out;
}

/// Applies the same randomly drawn transform to both sides of a pair:
/// optional horizontal flip, then an optional quarter turn (all four turns
/// with full_dihedral). Draws are consumed even for identity outcomes, so
/// streams stay aligned.
inline void augment(Tensor<float>& lr, Tensor<float>& hr,
                    std::mt19937_64& rng, bool full_dihedral = false) {
  const bool flip = uniform_below(rng, 2) == 1;
  const std::int64_t turns =
      full_dihedral ? uniform_below(rng, 4) : uniform_below(rng, 2);
  if (flip) {
    lr = flip_h(lr);
    hr = flip_h(hr);
  }
  for (std::int64_t t = 0; t < turns; ++t) {
    lr = rot90(lr);
    hr = rot90(hr);
  }
}

/// Draws `batch` aligned random crops: LR patches of side `patch` and the
/// corresponding HR patches of side scale*patch at scaled offsets. Images
/// smaller than the patch are skipped (with a one-time warning).
inline std::pair<Tensor<float>, Tensor<float>> sample_batch(
    const std::vector<ImagePair>& pairs, int patch, int batch,
    std::mt19937_64& rng) {
  if (pairs.empty()) throw ConfigError("sample_batch: empty dataset");
  std::vector<const ImagePair*> usable;
  for (const ImagePair& p : pairs) {
    if (p.lr.h() >= patch && p.lr.w() >= patch) {
      usable.push_back(&p);
    } else {
      static bool warned = false;
      if (!warned) {
        std::cerr << "warning: skipping image '" << p.id
                  << "' smaller than patch " << patch << "\n";
        warned = true;
      }
    }
  }
  if (usable.empty())
    throw ConfigError("sample_batch: no image is at least " +
                      std::to_string(patch) + "x" + std::to_string(patch));

  const int s = usable.front()->scale;
  Tensor<float> lr_batch(batch, 3, patch, patch);
  Tensor<float> hr_batch(batch, 3, patch * s, patch * s);
  for (int b = 0; b < batch; ++b) {
    const ImagePair& p = *usable[static_cast<std::size_t>(
        uniform_below(rng, static_cast<std::int64_t>(usable.size())))];
    const index_t y0 = uniform_below(rng, p.lr.h() - patch + 1);
    const index_t x0 = uniform_below(rng, p.lr.w() - patch + 1);
    for (index_t c = 0; c < 3; ++c) {
      for (index_t y = 0; y < patch; ++y)
        std::copy(p.lr.data() + p.lr.offset(0, c, y0 + y, x0),
                  p.lr.data() + p.lr.offset(0, c, y0 + y, x0) + patch,
                  lr_batch.data() + lr_batch.offset(b, c, y, 0));
      for (index_t y = 0; y < patch * s; ++y)
        std::copy(p.hr.data() + p.hr.offset(0, c, s * y0 + y, s * x0),
                  p.hr.data() + p.hr.offset(0, c, s * y0 + y, s * x0) +
                      patch * s,
                  hr_batch.data() + hr_batch.offset(b, c, y, 0));
    }
  }
  return {std::move(lr_batch), std::move(hr_batch)};
}

}  // namespace rfdn
