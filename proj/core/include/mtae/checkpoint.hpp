#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtae/common.hpp"

namespace mtae {

// Checkpoint container format. Little-endian throughout:
//   "MTAE" | u32 version | u32 meta_len | meta (UTF-8 JSON) | u32 n_groups
//   per group: u32 name_len | name | u32 rank | u64 dims[rank] | f32 payload
// Values are stored as f32 regardless of the training precision.
struct NamedTensorF32 {
  std::string name;
  std::vector<i64> shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::string meta_json;  // architecture, vocabularies, frontend stats
  std::vector<NamedTensorF32> groups;
};

inline constexpr u32 kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::uint8_t* data, std::size_t size);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mtae
