#pragma once

// Flat binary archive: named tensors with little-endian payloads plus a few
// header fields. Layout (all integers little-endian):
//
//   magic     8 bytes  "VITNERF\0"
//   version   u32      kCheckpointVersion
//   elem      u32      payload element width in bytes (4 or 8)
//   step      u64
//   rng       str      serialized generator state
//   n_meta    u32      then n_meta x (str key, str value), sorted by key
//   n_tensor  u32      then n_tensor x (str name, u32 rank, u64 dims[rank],
//                      payload), sorted by name
//
// where str is a u32 byte length followed by the bytes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vitnerf/tensor/tensor.hpp"

namespace vitnerf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ArchiveEntry {
  Shape shape;
  std::vector<double> values;  // widened; narrowed again on write
};

struct Archive {
  std::uint32_t element_bytes = 4;
  std::uint64_t step = 0;
  std::string rng_state;
  std::map<std::string, std::string> metadata;
  std::map<std::string, ArchiveEntry> entries;
};

void save_archive(const std::filesystem::path& path, const Archive& archive);
Archive load_archive(const std::filesystem::path& path);

std::vector<char> serialize_archive(const Archive& archive);
Archive deserialize_archive(const std::vector<char>& bytes, const std::string& origin);

}  // namespace vitnerf
