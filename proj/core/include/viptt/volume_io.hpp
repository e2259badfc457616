// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "viptt/tensor.hpp"

namespace viptt {

enum class ValueDomain { Hounsfield, UnitNormalized };

/// 3D scalar grid stored depth-major, then row-major: index (d, h, w) lives at
/// (d * height + h) * width + w. Axial slices are indexed by depth.
struct Volume {
  std::size_t depth = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;
  ValueDomain domain = ValueDomain::Hounsfield;

  Volume() = default;
  Volume(std::size_t d, std::size_t h, std::size_t w, ValueDomain dom, double fill = 0.0)
      : depth(d), height(h), width(w), data(d * h * w, fill), domain(dom) {}

  std::size_t voxel_count() const noexcept { return depth * height * width; }
  std::size_t slice_size() const noexcept { return height * width; }

  double& at(std::size_t d, std::size_t h, std::size_t w) noexcept {
    return data[(d * height + h) * width + w];
  }
  double at(std::size_t d, std::size_t h, std::size_t w) const noexcept {
    return data[(d * height + h) * width + w];
  }

  /// Checks the length invariant and, for UnitNormalized, the [0, 1] range.
  /// Throws DIMENSION_MISMATCH / INVALID_ARGUMENT.
  void validate() const;

  Tensor to_tensor() const;
  /// Rank-3 tensor (D, H, W) to a volume with the given domain tag.
  static Volume from_tensor(const Tensor& t, ValueDomain domain);

  friend bool operator==(const Volume&, const Volume&) = default;
};

/// NIfTI-1 header fields this toolkit reads; everything else is ignored.
struct NiftiHeader {
  std::int32_t sizeof_hdr = 0;
  std::int16_t dim_count = 0;
  std::int16_t dim_x = 0;
  std::int16_t dim_y = 0;
  std::int16_t dim_z = 0;
  std::int16_t datatype = 0;
  float vox_offset = 0.0f;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  char magic[4] = {};
};

namespace nifti {
inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::int16_t kUInt8 = 2;
inline constexpr std::int16_t kInt16 = 4;
inline constexpr std::int16_t kInt32 = 8;
inline constexpr std::int16_t kFloat32 = 16;
inline constexpr std::int16_t kFloat64 = 64;

std::size_t bytes_per_voxel(std::int16_t datatype);
}  // namespace nifti

NiftiHeader parse_nifti_header(std::span<const std::uint8_t> bytes);

/// Decodes a single-file little-endian NIfTI-1 volume into Hounsfield units.
/// The NIfTI x/y/z axes become width/height/depth.
Volume read_nifti(std::span<const std::uint8_t> bytes);
Volume read_nifti_file(const std::filesystem::path& path);

// VPT1 tensor files: "VPT1" | u32 version=1 | u32 rank | rank x u64 dims |
// f32 little-endian payload, last dim fastest.
std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);
void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);

/// Reads a volume from either a `.nii` file (Hounsfield) or a VPT1 rank-3
/// tensor (tagged UnitNormalized if every value lies in [0, 1]).
Volume read_volume_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace viptt
