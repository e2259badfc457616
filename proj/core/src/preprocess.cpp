// SPDX-License-Identifier: Apache-2.0
#include "viptt/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "viptt/error.hpp"

namespace viptt {

namespace {

/// Precomputed resampler for one axis: the tridiagonal factorization of the
/// natural-spline system and the segment/offset of every query.
class AxisResampler {
 public:
  AxisResampler(std::size_t source, std::span<const double> queries, SplineOrder order)
      : source_(source), order_(order) {
    const std::size_t min_nodes = order == SplineOrder::Cubic ? 2 : 1;
    if (source < min_nodes) {
      throw Error(ErrorCode::TooFewSamples, "spline needs at least " + std::to_string(min_nodes) + " samples, got " +
                                                std::to_string(source));
    }
    const double last = static_cast<double>(source - 1);
    segment_.reserve(queries.size());
    offset_.reserve(queries.size());
    for (double q : queries) {
      if (!(q >= 0.0 && q <= last)) {
        throw Error(ErrorCode::QueryOutOfRange, "query " + std::to_string(q) + " outside [0, " + std::to_string(last) + "]");
      }
      std::size_t seg = source < 2 ? 0 : std::min(static_cast<std::size_t>(q), source - 2);
      segment_.push_back(seg);
      offset_.push_back(q - static_cast<double>(seg));
    }
    if (order_ == SplineOrder::Cubic && source_ > 2) factorize();
  }

  std::size_t query_count() const noexcept { return segment_.size(); }

  /// Reads `source_` samples at y[k * in_stride] and writes every query to
  /// out[k * out_stride]. `scratch` must hold at least 2 * source_ doubles.
  void apply(const double* y, std::size_t in_stride, double* out, std::size_t out_stride,
             std::vector<double>& scratch) const {
    if (source_ == 1) {
      for (std::size_t k = 0; k < segment_.size(); ++k) out[k * out_stride] = y[0];
      return;
    }
    if (order_ == SplineOrder::Linear || source_ == 2) {
      // Natural cubic through two points is the straight line.
      for (std::size_t k = 0; k < segment_.size(); ++k) {
        const double t = offset_[k];
        const std::size_t i = segment_[k];
        out[k * out_stride] = (1.0 - t) * y[i * in_stride] + t * y[(i + 1) * in_stride];
      }
      return;
    }
    double* m = scratch.data();
    solve_second_derivatives(y, in_stride, m, scratch.data() + source_);
    for (std::size_t k = 0; k < segment_.size(); ++k) {
      const double t = offset_[k];
      const double s = 1.0 - t;
      const std::size_t i = segment_[k];
      out[k * out_stride] = s * y[i * in_stride] + t * y[(i + 1) * in_stride] +
                            ((s * s * s - s) * m[i] + (t * t * t - t) * m[i + 1]) / 6.0;
    }
  }

 private:
  // Interior rows of the unit-spacing natural spline system:
  //   m[i-1] + 4 m[i] + m[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1]),  m[0] = m[S-1] = 0.
  void factorize() {
    const std::size_t n = source_ - 2;
    upper_.assign(n, 0.0);
    inv_pivot_.assign(n, 0.0);
    double prev_upper = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double pivot = 4.0 - prev_upper;
      inv_pivot_[i] = 1.0 / pivot;
      upper_[i] = inv_pivot_[i];
      prev_upper = upper_[i];
    }
  }

  void solve_second_derivatives(const double* y, std::size_t stride, double* m, double* rhs) const {
    const std::size_t n = source_ - 2;
    m[0] = 0.0;
    m[source_ - 1] = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = 6.0 * (y[(i + 2) * stride] - 2.0 * y[(i + 1) * stride] + y[i * stride]);
      rhs[i] = (r - prev) * inv_pivot_[i];
      prev = rhs[i];
    }
    m[n] = rhs[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
      rhs[i] -= upper_[i] * rhs[i + 1];
      m[i + 1] = rhs[i];
    }
  }

  std::size_t source_;
  SplineOrder order_;
  std::vector<std::size_t> segment_;
  std::vector<double> offset_;
  std::vector<double> upper_;
  std::vector<double> inv_pivot_;
};

std::vector<double> axis_queries(std::size_t source, std::size_t target) {
  std::vector<double> q(target);
  for (std::size_t i = 0; i < target; ++i) q[i] = align_corners_coordinate(i, source, target);
  return q;
}

double sample_bilinear(const double* slice, std::size_t height, std::size_t width, double y, double x) noexcept {
  const double max_y = static_cast<double>(height - 1);
  const double max_x = static_cast<double>(width - 1);
  if (!(y >= 0.0 && y <= max_y && x >= 0.0 && x <= max_x)) return 0.0;
  const auto y0 = std::min(static_cast<std::size_t>(y), height > 1 ? height - 2 : 0);
  const auto x0 = std::min(static_cast<std::size_t>(x), width > 1 ? width - 2 : 0);
  const std::size_t y1 = height > 1 ? y0 + 1 : y0;
  const std::size_t x1 = width > 1 ? x0 + 1 : x0;
  const double ty = y - static_cast<double>(y0);
  const double tx = x - static_cast<double>(x0);
  const double top = (1.0 - tx) * slice[y0 * width + x0] + tx * slice[y0 * width + x1];
  const double bottom = (1.0 - tx) * slice[y1 * width + x0] + tx * slice[y1 * width + x1];
  return (1.0 - ty) * top + ty * bottom;
}

}  // namespace

double align_corners_coordinate(std::size_t index, std::size_t source, std::size_t target) noexcept {
  if (target == 1) return static_cast<double>(source - 1) / 2.0;
  return static_cast<double>(index * (source - 1)) / static_cast<double>(target - 1);
}

std::vector<double> spline_interp_1d(std::span<const double> samples, std::span<const double> queries,
                                     SplineOrder order) {
  if (samples.size() < 2) {
    throw Error(ErrorCode::TooFewSamples, "spline needs at least 2 samples, got " + std::to_string(samples.size()));
  }
  AxisResampler resampler(samples.size(), queries, order);
  std::vector<double> out(queries.size());
  std::vector<double> scratch(2 * samples.size());
  resampler.apply(samples.data(), 1, out.data(), 1, scratch);
  return out;
}

Volume siz_resize(const Volume& vol, const ResizeSpec& spec) {
  vol.validate();
  if (spec.depth == 0 || spec.height == 0 || spec.width == 0) {
    throw Error(ErrorCode::InvalidArgument, "resize target dims must be positive");
  }
  Volume cur = vol;
  std::vector<double> scratch;

  // Depth pass: lines run along d with stride H*W.
  if (spec.depth != cur.depth) {
    const std::vector<double> q = axis_queries(cur.depth, spec.depth);
    AxisResampler r(cur.depth, q, spec.order);
    Volume next(spec.depth, cur.height, cur.width, cur.domain);
    scratch.assign(2 * cur.depth, 0.0);
    const std::size_t plane = cur.slice_size();
    for (std::size_t p = 0; p < plane; ++p) r.apply(cur.data.data() + p, plane, next.data.data() + p, plane, scratch);
    cur = std::move(next);
  }
  if (spec.height != cur.height) {
    const std::vector<double> q = axis_queries(cur.height, spec.height);
    AxisResampler r(cur.height, q, spec.order);
    Volume next(cur.depth, spec.height, cur.width, cur.domain);
    scratch.assign(2 * cur.height, 0.0);
    for (std::size_t d = 0; d < cur.depth; ++d) {
      const double* src = cur.data.data() + d * cur.slice_size();
      double* dst = next.data.data() + d * next.slice_size();
      for (std::size_t w = 0; w < cur.width; ++w) r.apply(src + w, cur.width, dst + w, cur.width, scratch);
    }
    cur = std::move(next);
  }
  if (spec.width != cur.width) {
    const std::vector<double> q = axis_queries(cur.width, spec.width);
    AxisResampler r(cur.width, q, spec.order);
    Volume next(cur.depth, cur.height, spec.width, cur.domain);
    scratch.assign(2 * cur.width, 0.0);
    const std::size_t rows = cur.depth * cur.height;
    for (std::size_t row = 0; row < rows; ++row) {
      r.apply(cur.data.data() + row * cur.width, 1, next.data.data() + row * spec.width, 1, scratch);
    }
    cur = std::move(next);
  }
  if (cur.domain == ValueDomain::UnitNormalized) {
    for (double& v : cur.data) v = std::clamp(v, 0.0, 1.0);
  }
  return cur;
}

Volume hu_normalize(const Volume& vol, HuWindow window) {
  if (vol.domain == ValueDomain::UnitNormalized) {
    throw Error(ErrorCode::AlreadyNormalized, "volume is already unit-normalized");
  }
  if (!(window.lo < window.hi)) throw Error(ErrorCode::InvalidArgument, "HU window needs lo < hi");
  Volume out = vol;
  const double span = window.hi - window.lo;
  for (double& v : out.data) v = (std::clamp(v, window.lo, window.hi) - window.lo) / span;
  out.domain = ValueDomain::UnitNormalized;
  return out;
}

Volume rotate_axial(const Volume& vol, double angle_deg) {
  if (angle_deg == 0.0) return vol;
  Volume out(vol.depth, vol.height, vol.width, vol.domain);
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double cy = static_cast<double>(vol.height - 1) / 2.0;
  const double cx = static_cast<double>(vol.width - 1) / 2.0;
  for (std::size_t d = 0; d < vol.depth; ++d) {
    const double* src = vol.data.data() + d * vol.slice_size();
    double* dst = out.data.data() + d * vol.slice_size();
    for (std::size_t h = 0; h < vol.height; ++h) {
      const double dy = static_cast<double>(h) - cy;
      for (std::size_t w = 0; w < vol.width; ++w) {
        const double dx = static_cast<double>(w) - cx;
        // Inverse map: the output pixel pulls from the source point rotated by -theta.
        const double sx = cx + c * dx + s * dy;
        const double sy = cy - s * dx + c * dy;
        dst[h * vol.width + w] = sample_bilinear(src, vol.height, vol.width, sy, sx);
      }
    }
  }
  return out;
}

Tensor rgb_to_gray(const Tensor& frame) {
  if (frame.rank() != 3 || frame.dim(2) != 3) {
    throw Error(ErrorCode::BadChannelCount, "expected an (H, W, 3) frame, got " + shape_to_string(frame.shape()));
  }
  const std::size_t pixels = frame.dim(0) * frame.dim(1);
  Tensor gray({frame.dim(0), frame.dim(1)});
  for (std::size_t i = 0; i < pixels; ++i) {
    gray[i] = 0.299 * frame[3 * i] + 0.587 * frame[3 * i + 1] + 0.114 * frame[3 * i + 2];
  }
  return gray;
}

}  // namespace viptt
