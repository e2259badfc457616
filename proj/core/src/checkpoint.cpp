// SPDX-License-Identifier: Apache-2.0
#include "viptt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include "viptt/error.hpp"
#include "viptt/volume_io.hpp"

namespace viptt {

namespace {

constexpr char kMagic[4] = {'V', 'P', 'T', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename UInt>
void put(std::vector<std::uint8_t>& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename UInt>
  UInt get() {
    need(sizeof(UInt));
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(UInt);
    return v;
  }

  std::string get_string() {
    const std::uint32_t n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::MalformedCheckpoint, "checkpoint is truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(Model& model) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kVersion);
  std::string config;
  for (const auto& [k, v] : model.config().to_key_values()) config += k + "=" + v + "\n";
  put_string(out, config);
  const auto named = model.named_parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& np : named) {
    put_string(out, np.name);
    const Tensor& t = np.param->value;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    for (double v : t.data()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Model decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::MalformedCheckpoint, "bad checkpoint magic");
  }
  Reader r(bytes.subspan(4));
  if (r.get<std::uint32_t>() != kVersion) throw Error(ErrorCode::MalformedCheckpoint, "unsupported checkpoint version");

  std::map<std::string, std::string> kv;
  const std::string config = r.get_string();
  std::size_t start = 0;
  while (start < config.size()) {
    std::size_t end = config.find('\n', start);
    if (end == std::string::npos) end = config.size();
    const std::string line = config.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::MalformedCheckpoint, "bad config line `" + line + "`");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ModelConfig cfg;
  try {
    cfg = ModelConfig::from_key_values(kv);
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedCheckpoint, std::string("bad config block: ") + e.what());
  }

  // Shapes come from the config; the file must match them tensor for tensor.
  Model model = Model::build(cfg, 0);
  auto named = model.named_parameters();
  const std::uint32_t count = r.get<std::uint32_t>();
  if (count != named.size()) {
    throw Error(ErrorCode::MalformedCheckpoint, "expected " + std::to_string(named.size()) + " tensors, found " +
                                                    std::to_string(count));
  }
  for (const auto& np : named) {
    const std::string name = r.get_string();
    if (name != np.name) throw Error(ErrorCode::MalformedCheckpoint, "expected tensor " + np.name + ", found " + name);
    const std::uint32_t rank = r.get<std::uint32_t>();
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    Tensor& t = np.param->value;
    if (shape != t.shape()) {
      throw Error(ErrorCode::MalformedCheckpoint, name + " has shape " + shape_to_string(shape) + ", config implies " +
                                                      shape_to_string(t.shape()));
    }
    for (double& v : t.data()) v = std::bit_cast<double>(r.get<std::uint64_t>());
  }
  if (!r.done()) throw Error(ErrorCode::MalformedCheckpoint, "trailing bytes after last tensor");
  return model;
}

void save_checkpoint(Model& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace viptt
