#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vrsa/tensor.hpp"

namespace vrsa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// VRSK container:
//   "VRSK", u32 version, u32 tensor count, then per tensor
//   u16 name length, UTF-8 name, u8 rank, rank x u32 dims, LE float64 payload.
std::vector<std::uint8_t> serialize_checkpoint(const ParamSet& params);
ParamSet parse_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const ParamSet& params, const std::filesystem::path& path);
ParamSet load_checkpoint(const std::filesystem::path& path);

/// FNV-1a 64-bit, lowercase hex.
std::string fnv1a_hex(std::span<const std::uint8_t> bytes);

/// FNV-1a digest of the serialized checkpoint; identifies a trained model.
std::string checkpoint_digest(const ParamSet& params);

}  // namespace vrsa
