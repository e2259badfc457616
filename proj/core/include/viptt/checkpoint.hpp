// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "viptt/model.hpp"

namespace viptt {

// Checkpoint layout (all integers little-endian):
//   "VPTC" | u32 version=1
//   | u32 config_len | config_len bytes of UTF-8 `key=value\n` lines
//   | u32 tensor_count
//   | per tensor: u32 name_len | name | u32 rank | rank x u64 dims | f64 payload
std::vector<std::uint8_t> encode_checkpoint(Model& model);
Model decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace viptt
