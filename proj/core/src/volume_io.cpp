// SPDX-License-Identifier: Apache-2.0
#include "viptt/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "viptt/error.hpp"

namespace viptt {

namespace {

template <typename UInt>
UInt load_le(const std::uint8_t* p) noexcept {
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(p[i]) << (8 * i);
  return v;
}

template <typename UInt>
void store_le(std::vector<std::uint8_t>& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::int16_t load_i16(const std::uint8_t* p) noexcept { return std::bit_cast<std::int16_t>(load_le<std::uint16_t>(p)); }
std::int32_t load_i32(const std::uint8_t* p) noexcept { return std::bit_cast<std::int32_t>(load_le<std::uint32_t>(p)); }
float load_f32(const std::uint8_t* p) noexcept { return std::bit_cast<float>(load_le<std::uint32_t>(p)); }
double load_f64(const std::uint8_t* p) noexcept { return std::bit_cast<double>(load_le<std::uint64_t>(p)); }

double load_voxel(const std::uint8_t* p, std::int16_t datatype) noexcept {
  switch (datatype) {
    case nifti::kUInt8: return static_cast<double>(*p);
    case nifti::kInt16: return static_cast<double>(load_i16(p));
    case nifti::kInt32: return static_cast<double>(load_i32(p));
    case nifti::kFloat32: return static_cast<double>(load_f32(p));
    default: return load_f64(p);
  }
}

constexpr char kTensorMagic[4] = {'V', 'P', 'T', '1'};
constexpr std::uint32_t kTensorVersion = 1;
constexpr std::size_t kMaxTensorRank = 4;

}  // namespace

void Volume::validate() const {
  if (depth == 0 || height == 0 || width == 0 || data.size() != depth * height * width) {
    throw Error(ErrorCode::DimensionMismatch, "volume data length does not match its dimensions");
  }
  if (domain == ValueDomain::UnitNormalized) {
    for (double v : data) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidArgument, "normalized volume has value outside [0, 1]");
    }
  }
}

Tensor Volume::to_tensor() const { return Tensor({depth, height, width}, data); }

Volume Volume::from_tensor(const Tensor& t, ValueDomain domain) {
  if (t.rank() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "volume tensor must be rank 3, got " + shape_to_string(t.shape()));
  }
  Volume v;
  v.depth = t.dim(0);
  v.height = t.dim(1);
  v.width = t.dim(2);
  v.data = t.storage();
  v.domain = domain;
  return v;
}

std::size_t nifti::bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case kUInt8: return 1;
    case kInt16: return 2;
    case kInt32: return 4;
    case kFloat32: return 4;
    case kFloat64: return 8;
    default: throw Error(ErrorCode::UnsupportedDatatype, "NIfTI datatype code " + std::to_string(datatype));
  }
}

NiftiHeader parse_nifti_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < nifti::kHeaderSize) {
    throw Error(ErrorCode::MalformedHeader, "need 348 header bytes, got " + std::to_string(bytes.size()));
  }
  const std::uint8_t* p = bytes.data();
  NiftiHeader h;
  h.sizeof_hdr = load_i32(p);
  if (h.sizeof_hdr != static_cast<std::int32_t>(nifti::kHeaderSize)) {
    throw Error(ErrorCode::MalformedHeader, "sizeof_hdr is " + std::to_string(h.sizeof_hdr));
  }
  std::memcpy(h.magic, p + 344, 4);
  if (std::memcmp(h.magic, "n+1\0", 4) != 0) {
    if (std::memcmp(h.magic, "ni1\0", 4) == 0) {
      throw Error(ErrorCode::MalformedHeader, "header/image pair (ni1) files are not supported");
    }
    throw Error(ErrorCode::MalformedHeader, "bad magic");
  }
  h.dim_count = load_i16(p + 40);
  // A byte-swapped file shows up as an absurd dim[0].
  if (h.dim_count < 1 || h.dim_count > 7) {
    throw Error(ErrorCode::MalformedHeader, "dim[0] = " + std::to_string(h.dim_count) + " (big-endian files are not supported)");
  }
  h.dim_x = load_i16(p + 42);
  h.dim_y = load_i16(p + 44);
  h.dim_z = load_i16(p + 46);
  h.datatype = load_i16(p + 70);
  h.vox_offset = load_f32(p + 108);
  h.scl_slope = load_f32(p + 112);
  h.scl_inter = load_f32(p + 116);
  return h;
}

Volume read_nifti(std::span<const std::uint8_t> bytes) {
  const NiftiHeader h = parse_nifti_header(bytes);
  if (h.dim_count != 3) {
    throw Error(ErrorCode::DimensionMismatch, "expected a 3D volume, dim[0] = " + std::to_string(h.dim_count));
  }
  if (h.dim_x < 1 || h.dim_y < 1 || h.dim_z < 1) {
    throw Error(ErrorCode::MalformedHeader, "non-positive volume extent");
  }
  const std::size_t voxel_bytes = nifti::bytes_per_voxel(h.datatype);
  if (!std::isfinite(h.vox_offset) || h.vox_offset < static_cast<float>(nifti::kHeaderSize)) {
    throw Error(ErrorCode::MalformedHeader, "vox_offset must be at least 348");
  }
  const auto offset = static_cast<std::size_t>(h.vox_offset);
  const auto nx = static_cast<std::size_t>(h.dim_x);
  const auto ny = static_cast<std::size_t>(h.dim_y);
  const auto nz = static_cast<std::size_t>(h.dim_z);
  const std::size_t count = nx * ny * nz;
  if (offset > bytes.size() || (bytes.size() - offset) / voxel_bytes < count) {
    throw Error(ErrorCode::TruncatedData, "payload holds fewer than " + std::to_string(count) + " voxels");
  }

  double slope = static_cast<double>(h.scl_slope);
  double inter = static_cast<double>(h.scl_inter);
  if (slope == 0.0 || !std::isfinite(slope)) slope = 1.0;
  if (!std::isfinite(inter)) inter = 0.0;

  // NIfTI stores x fastest, then y, then z, which is exactly (D=z, H=y, W=x)
  // in depth-major row-major order.
  Volume vol(nz, ny, nx, ValueDomain::Hounsfield);
  const std::uint8_t* payload = bytes.data() + offset;
  for (std::size_t i = 0; i < count; ++i) {
    vol.data[i] = load_voxel(payload + i * voxel_bytes, h.datatype) * slope + inter;
  }
  return vol;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed for " + path.string());
  return bytes;
}

Volume read_nifti_file(const std::filesystem::path& path) { return read_nifti(read_file_bytes(path)); }

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
  const Shape& shape = tensor.shape();
  if (shape.empty() || shape.size() > kMaxTensorRank) {
    throw Error(ErrorCode::MalformedTensorFile, "tensor rank must be 1..4, got " + std::to_string(shape.size()));
  }
  for (std::size_t d : shape) {
    if (d == 0) throw Error(ErrorCode::MalformedTensorFile, "zero-length dimension in " + shape_to_string(shape));
  }
  if (!tensor.all_finite()) throw Error(ErrorCode::MalformedTensorFile, "tensor contains non-finite values");

  std::vector<std::uint8_t> out;
  out.reserve(12 + 8 * shape.size() + 4 * tensor.size());
  out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
  store_le<std::uint32_t>(out, kTensorVersion);
  store_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) store_le<std::uint64_t>(out, d);
  for (double v : tensor.data()) store_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kTensorMagic, 4) != 0) {
    throw Error(ErrorCode::MalformedTensorFile, "bad magic");
  }
  if (load_le<std::uint32_t>(bytes.data() + 4) != kTensorVersion) {
    throw Error(ErrorCode::MalformedTensorFile, "unsupported version");
  }
  const std::uint32_t rank = load_le<std::uint32_t>(bytes.data() + 8);
  if (rank == 0 || rank > kMaxTensorRank) throw Error(ErrorCode::MalformedTensorFile, "bad rank " + std::to_string(rank));
  if (bytes.size() < 12 + 8 * std::size_t{rank}) throw Error(ErrorCode::MalformedTensorFile, "truncated dims");

  Shape shape(rank);
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint64_t d = load_le<std::uint64_t>(bytes.data() + 12 + 8 * i);
    if (d == 0 || d > (std::uint64_t{1} << 40) || count > (std::size_t{1} << 40) / d) {
      throw Error(ErrorCode::MalformedTensorFile, "bad dimension");
    }
    shape[i] = static_cast<std::size_t>(d);
    count *= shape[i];
  }
  const std::size_t header = 12 + 8 * std::size_t{rank};
  if (bytes.size() != header + 4 * count) {
    throw Error(ErrorCode::MalformedTensorFile, "payload length does not match dims " + shape_to_string(shape));
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = static_cast<double>(load_f32(bytes.data() + header + 4 * i));
  return Tensor(std::move(shape), std::move(data));
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  const std::vector<std::uint8_t> bytes = encode_tensor(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file_bytes(path)); }

Volume read_volume_file(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".nii") return read_nifti_file(path);
  Volume v = Volume::from_tensor(read_tensor(path), ValueDomain::Hounsfield);
  const bool unit = std::all_of(v.data.begin(), v.data.end(), [](double x) { return x >= 0.0 && x <= 1.0; });
  if (unit) v.domain = ValueDomain::UnitNormalized;
  return v;
}

}  // namespace viptt
