#pragma once

#include <cstdint>
#include <string>

#include "sdae/params.hpp"

namespace sdae {

// Named-tensor container:
//   magic "SDAE" | u32 version | u32 tensor count |
//   per tensor: u32 name length, UTF-8 name, u32 rank, u64 dims[rank],
//               little-endian IEEE-754 f32 payload.
// Round-trips are bit-exact. Writes go through a temp file and rename so a
// failed save never leaves a truncated checkpoint behind.

inline constexpr std::uint32_t kTensorFormatVersion = 1;

void save_tensors(const std::string& path, const NamedParams& tensors);
NamedParams load_tensors(const std::string& path);

}  // namespace sdae
