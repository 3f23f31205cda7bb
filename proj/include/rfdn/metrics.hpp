#pragma once

#include <array>
#include <cmath>

#include "rfdn/tensor.hpp"

namespace rfdn {

struct EvalResult {
  double psnr_db = 0.0;
  double ssim = 0.0;
  int shave = 0;
};

/// Studio-swing BT.601 luma of an RGB image in [0,255]:
/// Y = 16 + (65.481 R + 128.553 G + 24.966 B) / 255, range [16, 235].
/// Output is (n,1,h,w) in double; metrics run in 64-bit throughout.
template <typename S>
Tensor<double> rgb_to_y(const Tensor<S>& img) {
  if (img.c() != 3)
    throw ShapeError("rgb_to_y: expected 3 channels, got " +
                     std::to_string(img.c()));
  Tensor<double> y(img.n(), 1, img.h(), img.w());
  const index_t hw = img.h() * img.w();
  for (index_t n = 0; n < img.n(); ++n) {
    const S* r = img.data() + img.offset(n, 0, 0, 0);
    const S* g = img.data() + img.offset(n, 1, 0, 0);
    const S* b = img.data() + img.offset(n, 2, 0, 0);
    double* q = y.data() + y.offset(n, 0, 0, 0);
    for (index_t i = 0; i < hw; ++i)
      q[i] = 16.0 + (65.481 * r[i] + 128.553 * g[i] + 24.966 * b[i]) / 255.0;
  }
  return y;
}

inline Tensor<double> shave_border(const Tensor<double>& x, int shave) {
  if (shave < 0) throw ConfigError("negative shave");
  if (shave == 0) return x;
  if (2 * shave >= x.h() || 2 * shave >= x.w())
    throw ShapeError("shave " + std::to_string(shave) +
                     " leaves no pixels for " + x.shape().str());
  Tensor<double> out(x.n(), x.c(), x.h() - 2 * shave, x.w() - 2 * shave);
  for (index_t n = 0; n < x.n(); ++n)
    for (index_t c = 0; c < x.c(); ++c)
      for (index_t y = 0; y < out.h(); ++y)
        for (index_t xx = 0; xx < out.w(); ++xx)
          out(n, c, y, xx) = x(n, c, y + shave, xx + shave);
  return out;
}

/// PSNR between two Y-channel images, peak 255, capped at 100 dB.
inline double psnr_from_y(const Tensor<double>& ya, const Tensor<double>& yb) {
  if (!(ya.shape() == yb.shape()))
    throw ShapeError("psnr: shape mismatch " + ya.shape().str() + " vs " +
                     yb.shape().str());
  double se = 0.0;
  for (index_t i = 0; i < ya.numel(); ++i) {
    const double d = ya[i] - yb[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(ya.numel());
  if (mse == 0.0) return 100.0;
  return std::min(100.0, 20.0 * std::log10(255.0 / std::sqrt(mse)));
}

/// Y-channel PSNR of two RGB images in [0,255]; `shave` border pixels are
/// dropped from both sides after the Y conversion.
template <typename S>
double psnr_y(const Tensor<S>& sr, const Tensor<S>& hr, int shave) {
  if (!(sr.shape() == hr.shape()))
    throw ShapeError("psnr_y: shape mismatch " + sr.shape().str() + " vs " +
                     hr.shape().str());
  return psnr_from_y(shave_border(rgb_to_y(sr), shave),
                     shave_border(rgb_to_y(hr), shave));
}

namespace detail {

inline std::array<double, 11> ssim_window() {
  std::array<double, 11> w{};
  const double sigma = 1.5;
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5.0;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable 11-tap filter, valid positions only: (h,w) -> (h-10, w-10).
inline Tensor<double> gauss_filter_valid(const Tensor<double>& x) {
  const auto win = ssim_window();
  const index_t h = x.h(), w = x.w();
  const index_t oh = h - 10, ow = w - 10;
  Tensor<double> mid(x.n(), x.c(), h, ow);
  for (index_t nc = 0; nc < x.n() * x.c(); ++nc) {
    const double* src = x.data() + nc * h * w;
    double* dst = mid.data() + nc * h * ow;
    for (index_t y = 0; y < h; ++y)
      for (index_t xo = 0; xo < ow; ++xo) {
        double acc = 0.0;
        for (int t = 0; t < 11; ++t) acc += win[t] * src[y * w + xo + t];
        dst[y * ow + xo] = acc;
      }
  }
  Tensor<double> out(x.n(), x.c(), oh, ow);
  for (index_t nc = 0; nc < x.n() * x.c(); ++nc) {
    const double* src = mid.data() + nc * h * ow;
    double* dst = out.data() + nc * oh * ow;
    for (index_t yo = 0; yo < oh; ++yo)
      for (index_t xo = 0; xo < ow; ++xo) {
        double acc = 0.0;
        for (int t = 0; t < 11; ++t) acc += win[t] * src[(yo + t) * ow + xo];
        dst[yo * ow + xo] = acc;
      }
  }
  return out;
}

}  // namespace detail

/// Single-scale SSIM on Y-channel images: 11x11 Gaussian window sigma 1.5,
/// K1 = 0.01, K2 = 0.03, L = 255, averaged over valid window positions.
inline double ssim(const Tensor<double>& ya, const Tensor<double>& yb) {
  if (!(ya.shape() == yb.shape()))
    throw ShapeError("ssim: shape mismatch " + ya.shape().str() + " vs " +
                     yb.shape().str());
  if (ya.h() < 11 || ya.w() < 11)
    throw ConfigError("ssim: image smaller than the 11x11 window");
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);

  Tensor<double> aa(ya.shape()), bb(ya.shape()), ab(ya.shape());
  for (index_t i = 0; i < ya.numel(); ++i) {
    aa[i] = ya[i] * ya[i];
    bb[i] = yb[i] * yb[i];
    ab[i] = ya[i] * yb[i];
  }
  const Tensor<double> mu_a = detail::gauss_filter_valid(ya);
  const Tensor<double> mu_b = detail::gauss_filter_valid(yb);
  const Tensor<double> m_aa = detail::gauss_filter_valid(aa);
  const Tensor<double> m_bb = detail::gauss_filter_valid(bb);
  const Tensor<double> m_ab = detail::gauss_filter_valid(ab);

  double total = 0.0;
  for (index_t i = 0; i < mu_a.numel(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = m_aa[i] - ma * ma;
    const double vb = m_bb[i] - mb * mb;
    const double cov = m_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
             ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.numel());
}

/// Full evaluation protocol: Y conversion, border shave, PSNR and SSIM.
template <typename S>
EvalResult evaluate_pair(const Tensor<S>& sr, const Tensor<S>& hr, int shave) {
  if (!(sr.shape() == hr.shape()))
    throw ShapeError("evaluate_pair: shape mismatch " + sr.shape().str() +
                     " vs " + hr.shape().str());
  const Tensor<double> ya = shave_border(rgb_to_y(sr), shave);
  const Tensor<double> yb = shave_border(rgb_to_y(hr), shave);
  return EvalResult{psnr_from_y(ya, yb), ssim(ya, yb), shave};
}

}  // namespace rfdn
