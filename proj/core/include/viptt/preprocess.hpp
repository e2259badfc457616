// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "viptt/tensor.hpp"
#include "viptt/volume_io.hpp"

namespace viptt {

enum class SplineOrder { Linear = 1, Cubic = 3 };

struct ResizeSpec {
  std::size_t depth = 70;
  std::size_t height = 224;
  std::size_t width = 224;
  SplineOrder order = SplineOrder::Linear;
};

struct HuWindow {
  double lo = -1000.0;
  double hi = 400.0;
};

/// Rotation angles (degrees) sampled by training-time augmentation.
inline constexpr std::array<double, 7> kAugmentAngles = {-20.0, -10.0, -5.0, 0.0, 5.0, 10.0, 20.0};

/// Evaluates the interpolating spline through samples placed at nodes
/// 0..S-1. Cubic is the natural spline (zero second derivative at both ends).
std::vector<double> spline_interp_1d(std::span<const double> samples, std::span<const double> queries,
                                     SplineOrder order);

/// Source coordinate sampled by target index `index` when an axis of extent
/// `source` is resized to `target` (align-corners).
double align_corners_coordinate(std::size_t index, std::size_t source, std::size_t target) noexcept;

/// Separable spline zoom to a fixed grid, applied depth, then height, then
/// width. Axes whose extent is unchanged are copied untouched. Output of a
/// UnitNormalized volume is clamped back into [0, 1].
Volume siz_resize(const Volume& vol, const ResizeSpec& spec);

/// Clips Hounsfield values to the window and maps them affinely onto [0, 1].
Volume hu_normalize(const Volume& vol, HuWindow window = {});

/// Rotates every axial slice about its center with bilinear resampling.
/// Samples that fall outside the slice read as 0.
Volume rotate_axial(const Volume& vol, double angle_deg);

/// (H, W, 3) RGB frame to (H, W) luma with Rec. 601 weights.
Tensor rgb_to_gray(const Tensor& frame);

}  // namespace viptt
