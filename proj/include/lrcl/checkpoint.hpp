#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "lrcl/model.hpp"

namespace lrcl {

/// On-disk layout (all integers little-endian):
///
///   "LRCK" | u32 version (=1) | u64 header length H | H bytes of UTF-8 JSON | payload
///
/// The JSON header holds {"version", "seed", "config", "model", "tensors"}.
/// Each entry of "tensors" is {"name", "shape", "dtype": "f32", "offset",
/// "nbytes"}, with offsets relative to the payload start. The payload is
/// the concatenation of the tensors' little-endian float32 data.
inline constexpr char kCheckpointMagic[4] = {'L', 'R', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws CorruptionError on bad magic or version, truncation, malformed
/// header, overlapping or out-of-bounds tensors, or unknown tensor names.
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lrcl
