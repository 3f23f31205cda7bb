#pragma once

#include <cmath>
#include <vector>

#include "rfdn/tensor.hpp"

namespace rfdn {

namespace detail {

// Keys cubic convolution kernel with a = -0.5, support [-2, 2].
inline double cubic_kernel(double x) {
  const double ax = std::abs(x);
  if (ax <= 1.0) return (1.5 * ax - 2.5) * ax * ax + 1.0;
  if (ax < 2.0) return ((-0.5 * ax + 2.5) * ax - 4.0) * ax + 2.0;
  return 0.0;
}

// One output row's worth of taps along a single dimension.
struct ResizeRow {
  index_t first = 0;            // clamped source index of tap 0
  std::vector<double> weights;  // normalized to sum 1
  std::vector<index_t> taps;    // clamped source indices
};

// Contribution table for resizing a dimension of length `in` by `scale`.
// When shrinking with antialias the kernel is stretched by 1/scale. Weights
// are normalized so every output site sums to one; source indices are
// clamped to the edge. Rows in the mirrored half are built as mirror images
// of their partners so geometric symmetries hold without float drift.
class ResizePlan {
 public:
  ResizePlan(index_t in, double scale, bool antialias) {
    out_ = static_cast<index_t>(std::ceil(in * scale));
    const bool shrink = antialias && scale < 1.0;
    const double support = shrink ? 4.0 / scale : 4.0;
    const index_t ntaps = static_cast<index_t>(std::ceil(support)) + 2;
    // The mirror construction needs the output grid to be geometrically
    // symmetric, which holds only when in*scale is an integer.
    const bool symmetric = std::abs(in * scale - static_cast<double>(out_)) <
                           1e-9 * static_cast<double>(out_);
    rows_.resize(static_cast<std::size_t>(out_));
    for (index_t i = 0; i < out_; ++i) {
      ResizeRow& row = rows_[static_cast<std::size_t>(i)];
      const index_t mirror = out_ - 1 - i;
      if (symmetric && mirror < i) {
        const ResizeRow& src = rows_[static_cast<std::size_t>(mirror)];
        row.weights.assign(src.weights.rbegin(), src.weights.rend());
        row.taps.resize(src.taps.size());
        for (std::size_t t = 0; t < src.taps.size(); ++t)
          row.taps[t] = in - 1 - src.taps[src.taps.size() - 1 - t];
        continue;
      }
      const double u = (static_cast<double>(i) + 0.5) / scale - 0.5;
      const index_t left =
          static_cast<index_t>(std::floor(u - support / 2.0));
      row.weights.resize(static_cast<std::size_t>(ntaps));
      row.taps.resize(static_cast<std::size_t>(ntaps));
      double wsum = 0.0;
      for (index_t t = 0; t < ntaps; ++t) {
        const index_t src = left + t;
        const double d = u - static_cast<double>(src);
        const double wgt = shrink ? cubic_kernel(d * scale) : cubic_kernel(d);
        row.weights[static_cast<std::size_t>(t)] = wgt;
        row.taps[static_cast<std::size_t>(t)] =
            std::clamp<index_t>(src, 0, in - 1);
        wsum += wgt;
      }
      for (double& wgt : row.weights) wgt /= wsum;
    }
  }

  index_t out_size() const { return out_; }
  const ResizeRow& row(index_t i) const {
    return rows_[static_cast<std::size_t>(i)];
  }

 private:
  index_t out_ = 0;
  std::vector<ResizeRow> rows_;
};

}  // namespace detail

/// Separable cubic-convolution resize (a = -0.5), rows then columns.
/// Antialiasing widens the kernel by 1/scale when shrinking; edges are
/// handled by clamping source coordinates. Arithmetic is double throughout.
template <typename S>
Tensor<S> bicubic_resize(const Tensor<S>& img, double scale, bool antialias) {
  if (!(scale > 0.0)) throw ConfigError("bicubic_resize: non-positive scale");
  const index_t n = img.n(), c = img.c(), h = img.h(), w = img.w();
  const detail::ResizePlan rplan(h, scale, antialias);
  const detail::ResizePlan cplan(w, scale, antialias);
  const index_t oh = rplan.out_size(), ow = cplan.out_size();

  // Pass 1: resize rows (vertical), full input width.
  std::vector<double> mid(static_cast<std::size_t>(n * c * oh * w));
  for (index_t nc = 0; nc < n * c; ++nc) {
    const S* src = img.data() + nc * h * w;
    double* dst = mid.data() + nc * oh * w;
    for (index_t y = 0; y < oh; ++y) {
      const auto& row = rplan.row(y);
      double* out_row = dst + y * w;
      std::fill(out_row, out_row + w, 0.0);
      for (std::size_t t = 0; t < row.taps.size(); ++t) {
        const double wgt = row.weights[t];
        const S* in_row = src + row.taps[t] * w;
        for (index_t x = 0; x < w; ++x)
          out_row[x] += wgt * static_cast<double>(in_row[x]);
      }
    }
  }

  // Pass 2: resize columns (horizontal).
  Tensor<S> out(n, c, oh, ow);
  for (index_t nc = 0; nc < n * c; ++nc) {
    const double* src = mid.data() + nc * oh * w;
    S* dst = out.data() + nc * oh * ow;
    for (index_t y = 0; y < oh; ++y) {
      const double* in_row = src + y * w;
      S* out_row = dst + y * ow;
      for (index_t x = 0; x < ow; ++x) {
        const auto& col = cplan.row(x);
        double acc = 0.0;
        for (std::size_t t = 0; t < col.taps.size(); ++t)
          acc += col.weights[t] * in_row[col.taps[t]];
        out_row[x] = static_cast<S>(acc);
      }
    }
  }
  return out;
}

}  // namespace rfdn
