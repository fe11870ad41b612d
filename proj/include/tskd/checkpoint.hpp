#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tskd/tensor.hpp"

namespace tskd {

// Binary layout, all integers little-endian:
//   "TSKD" | u32 version (=1) | u32 tensor count
//   per tensor: u16 name length | UTF-8 name | u8 rank | rank x u64 extents |
//               product(extents) x f32 (IEEE-754, little-endian)
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ParamSet<float>& tensors);
ParamSet<float> decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Writes through a temporary file and renames, so readers never observe a
/// partial checkpoint.
void save_checkpoint(const ParamSet<float>& tensors, const std::filesystem::path& path);
ParamSet<float> load_checkpoint(const std::filesystem::path& path);

/// FNV-1a of the encoded bytes.
std::uint64_t checkpoint_hash(const ParamSet<float>& tensors);

}  // namespace tskd
