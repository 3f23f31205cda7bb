#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <utility>
#include <vector>

#include "rfdn/tensor.hpp"

namespace rfdn {

// Negative slope of the leaky rectifier used throughout the network.
inline constexpr double kLeakySlope = 0.05;

template <typename S>
using MatrixRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

template <typename S>
void check_conv_args(const Tensor<S>& x, const Tensor<S>& kernel, int pad) {
  const int k = static_cast<int>(kernel.h());
  if (kernel.h() != kernel.w())
    throw ConfigError("non-square kernel " + kernel.shape().str());
  if (k % 2 == 0) throw ConfigError("non-odd kernel size " + std::to_string(k));
  if (x.c() != kernel.c())
    throw ConfigError("conv channel mismatch: input " + x.shape().str() +
                      " vs kernel " + kernel.shape().str());
  if (pad != (k - 1) / 2)
    throw ConfigError("pad " + std::to_string(pad) +
                      " does not preserve spatial size for k=" +
                      std::to_string(k));
}

// Patch matrix for one image: row (ci*k*k + ky*k + kx), column (y*w + x).
// Out-of-range taps are zero.
template <typename S>
void im2col(const Tensor<S>& x, index_t n, int k, int pad, MatrixRM<S>& cols) {
  const index_t c = x.c(), h = x.h(), w = x.w();
  cols.resize(c * k * k, h * w);
  for (index_t ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        S* row = cols.data() + (ci * k * k + ky * k + kx) * h * w;
        for (index_t y = 0; y < h; ++y) {
          const index_t sy = y + ky - pad;
          if (sy < 0 || sy >= h) {
            std::fill(row + y * w, row + (y + 1) * w, S(0));
            continue;
          }
          const S* src = x.data() + x.offset(n, ci, sy, 0);
          const index_t dx = kx - pad;
          for (index_t xo = 0; xo < w; ++xo) {
            const index_t sx = xo + dx;
            row[y * w + xo] = (sx >= 0 && sx < w) ? src[sx] : S(0);
          }
        }
      }
    }
  }
}

// Transpose of im2col: scatter-add patch-matrix gradients back to image.
template <typename S>
void col2im_add(const MatrixRM<S>& cols, index_t n, int k, int pad,
                Tensor<S>& gx) {
  const index_t c = gx.c(), h = gx.h(), w = gx.w();
  for (index_t ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const S* row = cols.data() + (ci * k * k + ky * k + kx) * h * w;
        for (index_t y = 0; y < h; ++y) {
          const index_t sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          S* dst = gx.data() + gx.offset(n, ci, sy, 0);
          const index_t dx = kx - pad;
          for (index_t xo = 0; xo < w; ++xo) {
            const index_t sx = xo + dx;
            if (sx >= 0 && sx < w) dst[sx] += row[y * w + xo];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Reference convolution: direct quadruple loop over output sites and taps.
/// Kept as the oracle the im2col path is tested against.
template <typename S>
Tensor<S> conv2d_naive(const Tensor<S>& x, const Tensor<S>& kernel,
                       const S* bias, int pad) {
  detail::check_conv_args(x, kernel, pad);
  const index_t n = x.n(), ci = x.c(), h = x.h(), w = x.w();
  const index_t co = kernel.n();
  const int k = static_cast<int>(kernel.h());
  Tensor<S> out(n, co, h, w);
  for (index_t in = 0; in < n; ++in)
    for (index_t oc = 0; oc < co; ++oc)
      for (index_t y = 0; y < h; ++y)
        for (index_t x0 = 0; x0 < w; ++x0) {
          S acc = bias ? bias[oc] : S(0);
          for (index_t ic = 0; ic < ci; ++ic)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const index_t sy = y + ky - pad, sx = x0 + kx - pad;
                if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                acc += kernel(oc, ic, ky, kx) * x(in, ic, sy, sx);
              }
          out(in, oc, y, x0) = acc;
        }
  return out;
}

/// Fast path: im2col + matrix multiply, per image. 1x1 kernels skip the
/// patch gather and multiply the channel matrix directly.
template <typename S>
Tensor<S> conv2d_im2col(const Tensor<S>& x, const Tensor<S>& kernel,
                        const S* bias, int pad) {
  detail::check_conv_args(x, kernel, pad);
  const index_t n = x.n(), ci = x.c(), h = x.h(), w = x.w();
  const index_t co = kernel.n();
  const int k = static_cast<int>(kernel.h());
  Tensor<S> out(n, co, h, w);

  Eigen::Map<const MatrixRM<S>> wmat(kernel.data(), co, ci * k * k);
  MatrixRM<S> cols;
  for (index_t in = 0; in < n; ++in) {
    Eigen::Map<MatrixRM<S>> omat(out.data() + out.offset(in, 0, 0, 0), co,
                                 h * w);
    if (k == 1) {
      Eigen::Map<const MatrixRM<S>> xmat(x.data() + x.offset(in, 0, 0, 0), ci,
                                         h * w);
      omat.noalias() = wmat * xmat;
    } else {
      detail::im2col(x, in, k, pad, cols);
      omat.noalias() = wmat * cols;
    }
    if (bias) {
      Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> bvec(bias, co);
      omat.colwise() += bvec;
    }
  }
  return out;
}

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& kernel, const S* bias,
                 int pad) {
  return conv2d_im2col(x, kernel, bias, pad);
}

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const ConvWeights<S>& w, int pad) {
  return conv2d(x, w.kernel, w.bias.data(), pad);
}

template <typename S>
Tensor<S> conv2d_same(const Tensor<S>& x, const ConvWeights<S>& w) {
  return conv2d(x, w.kernel, w.bias.data(), (w.k() - 1) / 2);
}

/// Reverse-mode rules for conv2d. Accumulates into gx/gkernel/gbias, any of
/// which may be null.
template <typename S>
void conv2d_backward(const Tensor<S>& x, const Tensor<S>& kernel, int pad,
                     const Tensor<S>& gout, Tensor<S>* gx, Tensor<S>* gkernel,
                     S* gbias) {
  const index_t n = x.n(), ci = x.c(), h = x.h(), w = x.w();
  const index_t co = kernel.n();
  const int k = static_cast<int>(kernel.h());

  Eigen::Map<const MatrixRM<S>> wmat(kernel.data(), co, ci * k * k);
  MatrixRM<S> cols, gcols;
  for (index_t in = 0; in < n; ++in) {
    Eigen::Map<const MatrixRM<S>> gmat(gout.data() + gout.offset(in, 0, 0, 0),
                                       co, h * w);
    if (gkernel) {
      Eigen::Map<MatrixRM<S>> gwmat(gkernel->data(), co, ci * k * k);
      if (k == 1) {
        Eigen::Map<const MatrixRM<S>> xmat(x.data() + x.offset(in, 0, 0, 0),
                                           ci, h * w);
        gwmat.noalias() += gmat * xmat.transpose();
      } else {
        detail::im2col(x, in, k, pad, cols);
        gwmat.noalias() += gmat * cols.transpose();
      }
    }
    if (gx) {
      if (k == 1) {
        Eigen::Map<MatrixRM<S>> gxmat(gx->data() + gx->offset(in, 0, 0, 0), ci,
                                      h * w);
        gxmat.noalias() += wmat.transpose() * gmat;
      } else {
        gcols.resize(ci * k * k, h * w);
        gcols.noalias() = wmat.transpose() * gmat;
        detail::col2im_add(gcols, in, k, pad, *gx);
      }
    }
    if (gbias)
      for (index_t oc = 0; oc < co; ++oc) {
        // Fixed-order summation: Eigen's vectorized redux groups terms by
        // pointer alignment, which is not stable across allocations.
        const S* row = gout.data() + gout.offset(in, oc, 0, 0);
        S acc = S(0);
        for (index_t i = 0; i < h * w; ++i) acc += row[i];
        gbias[oc] += acc;
      }
  }
}

template <typename S>
Tensor<S> leaky_relu(const Tensor<S>& x, S slope) {
  if (slope < S(0) || slope >= S(1))
    throw ConfigError("leaky_relu slope out of [0,1)");
  Tensor<S> out(x.shape());
  for (index_t i = 0; i < x.numel(); ++i)
    out[i] = x[i] > S(0) ? x[i] : slope * x[i];
  return out;
}

/// Sub-pixel rearrangement: input channel c*r*r + dy*r + dx lands on output
/// channel c at spatial offset (dy, dx).
template <typename S>
Tensor<S> pixel_shuffle(const Tensor<S>& x, int r) {
  if (r <= 0 || x.c() % (static_cast<index_t>(r) * r) != 0)
    throw ConfigError("pixel_shuffle: channels " + std::to_string(x.c()) +
                      " not divisible by r^2 with r=" + std::to_string(r));
  const index_t n = x.n(), co = x.c() / (r * r), h = x.h(), w = x.w();
  Tensor<S> out(n, co, h * r, w * r);
  for (index_t in = 0; in < n; ++in)
    for (index_t c = 0; c < co; ++c)
      for (int dy = 0; dy < r; ++dy)
        for (int dx = 0; dx < r; ++dx) {
          const index_t ic = c * r * r + dy * r + dx;
          for (index_t y = 0; y < h; ++y)
            for (index_t x0 = 0; x0 < w; ++x0)
              out(in, c, y * r + dy, x0 * r + dx) = x(in, ic, y, x0);
        }
  return out;
}

/// Exact inverse of pixel_shuffle.
template <typename S>
Tensor<S> pixel_unshuffle(const Tensor<S>& x, int r) {
  if (r <= 0 || x.h() % r != 0 || x.w() % r != 0)
    throw ConfigError("pixel_unshuffle: spatial size not divisible by r");
  const index_t n = x.n(), ci = x.c(), h = x.h() / r, w = x.w() / r;
  Tensor<S> out(n, ci * r * r, h, w);
  for (index_t in = 0; in < n; ++in)
    for (index_t c = 0; c < ci; ++c)
      for (int dy = 0; dy < r; ++dy)
        for (int dx = 0; dx < r; ++dx) {
          const index_t oc = c * r * r + dy * r + dx;
          for (index_t y = 0; y < h; ++y)
            for (index_t x0 = 0; x0 < w; ++x0)
              out(in, oc, y, x0) = x(in, c, y * r + dy, x0 * r + dx);
        }
  return out;
}

template <typename S>
Tensor<S> concat_channels(const std::vector<const Tensor<S>*>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: empty input list");
  const Shape& s0 = xs.front()->shape();
  index_t ctotal = 0;
  for (const Tensor<S>* t : xs) {
    if (t->n() != s0.n || t->h() != s0.h || t->w() != s0.w)
      throw ShapeError("concat_channels: spatial mismatch " +
                       t->shape().str() + " vs " + s0.str());
    ctotal += t->c();
  }
  Tensor<S> out(s0.n, ctotal, s0.h, s0.w);
  for (index_t in = 0; in < s0.n; ++in) {
    index_t coff = 0;
    for (const Tensor<S>* t : xs) {
      const index_t block = t->c() * s0.h * s0.w;
      std::copy(t->data() + t->offset(in, 0, 0, 0),
                t->data() + t->offset(in, 0, 0, 0) + block,
                out.data() + out.offset(in, coff, 0, 0));
      coff += t->c();
    }
  }
  return out;
}

template <typename S>
Tensor<S> concat_channels(const std::vector<Tensor<S>>& xs) {
  std::vector<const Tensor<S>*> ptrs;
  ptrs.reserve(xs.size());
  for (const auto& t : xs) ptrs.push_back(&t);
  return concat_channels(ptrs);
}

/// Channels [c0, c1) of x as a new tensor.
template <typename S>
Tensor<S> slice_channels(const Tensor<S>& x, index_t c0, index_t c1) {
  if (c0 < 0 || c1 > x.c() || c0 >= c1)
    throw ShapeError("slice_channels: bad range [" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") for c=" + std::to_string(x.c()));
  Tensor<S> out(x.n(), c1 - c0, x.h(), x.w());
  const index_t block = (c1 - c0) * x.h() * x.w();
  for (index_t in = 0; in < x.n(); ++in)
    std::copy(x.data() + x.offset(in, c0, 0, 0),
              x.data() + x.offset(in, c0, 0, 0) + block,
              out.data() + out.offset(in, 0, 0, 0));
  return out;
}

template <typename S>
Tensor<S> add(const Tensor<S>& x, const Tensor<S>& y) {
  if (!(x.shape() == y.shape()))
    throw ShapeError("add: shape mismatch " + x.shape().str() + " vs " +
                     y.shape().str());
  Tensor<S> out(x.shape());
  for (index_t i = 0; i < x.numel(); ++i) out[i] = x[i] + y[i];
  return out;
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
  Tensor<S> out(x.shape());
  for (index_t i = 0; i < x.numel(); ++i) {
    const S v = x[i];
    if (v >= S(0)) {
      out[i] = S(1) / (S(1) + std::exp(-v));
    } else {
      const S e = std::exp(v);
      out[i] = e / (S(1) + e);
    }
  }
  return out;
}

/// Per-(n,c) spatial mean and population standard deviation.
/// Accumulation runs in double regardless of Scalar.
template <typename S>
std::pair<std::vector<S>, std::vector<S>> channel_stats_pool(
    const Tensor<S>& x) {
  const index_t n = x.n(), c = x.c(), hw = x.h() * x.w();
  if (hw < 1) throw ShapeError("channel_stats_pool: empty spatial extent");
  std::vector<S> means(static_cast<std::size_t>(n * c));
  std::vector<S> stds(static_cast<std::size_t>(n * c));
  for (index_t nc = 0; nc < n * c; ++nc) {
    const S* p = x.data() + nc * hw;
    double sum = 0;
    for (index_t i = 0; i < hw; ++i) sum += static_cast<double>(p[i]);
    const double mean = sum / static_cast<double>(hw);
    double sq = 0;
    for (index_t i = 0; i < hw; ++i) {
      const double d = static_cast<double>(p[i]) - mean;
      sq += d * d;
    }
    means[nc] = static_cast<S>(mean);
    stds[nc] = static_cast<S>(std::sqrt(sq / static_cast<double>(hw)));
  }
  return {std::move(means), std::move(stds)};
}

/// Mean + standard deviation per channel as an (n,c,1,1) tensor; the input
/// to the contrast-aware attention gate.
template <typename S>
Tensor<S> contrast_pool(const Tensor<S>& x) {
  auto [means, stds] = channel_stats_pool(x);
  Tensor<S> out(x.n(), x.c(), 1, 1);
  for (index_t i = 0; i < x.n() * x.c(); ++i) out[i] = means[i] + stds[i];
  return out;
}

/// x scaled per channel by gate s of shape (n,c,1,1).
template <typename S>
Tensor<S> scale_channels(const Tensor<S>& x, const Tensor<S>& s) {
  if (s.n() != x.n() || s.c() != x.c() || s.h() != 1 || s.w() != 1)
    throw ShapeError("scale_channels: gate shape " + s.shape().str() +
                     " incompatible with " + x.shape().str());
  Tensor<S> out(x.shape());
  const index_t hw = x.h() * x.w();
  for (index_t nc = 0; nc < x.n() * x.c(); ++nc) {
    const S g = s[nc];
    const S* p = x.data() + nc * hw;
    S* q = out.data() + nc * hw;
    for (index_t i = 0; i < hw; ++i) q[i] = p[i] * g;
  }
  return out;
}

}  // namespace rfdn
