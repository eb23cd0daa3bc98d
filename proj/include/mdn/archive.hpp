#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mdn/layers.hpp"

namespace mdn {

// Parameter archive: a directory holding
//   manifest.txt  text lines `tensor;<name>;<shape AxBx..>;float32;<byte offset>`
//                 plus `meta;<key>;<value>` lines describing the model spec
//   params.bin    every tensor's values as little-endian float32, back to back
struct ArchiveEntry {
  std::string name;
  Shape shape;
  std::uint64_t byte_offset = 0;
};

struct Archive {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<ArchiveEntry> entries;
  std::vector<float> values;

  // Empty string when absent.
  std::string meta_value(const std::string& key) const;
};

inline constexpr const char* kManifestFile = "manifest.txt";
inline constexpr const char* kBlobFile = "params.bin";

void write_archive(const std::filesystem::path& dir,
                   const std::vector<std::pair<std::string, std::string>>& meta,
                   const ParameterSet<float>& tensors);

// Throws CheckpointError when the manifest is malformed or disagrees with the blob.
Archive read_archive(const std::filesystem::path& dir);

// Copies archived values into `tensors` (matched by position and name).
// Throws CheckpointError naming the first tensor whose name or shape differs.
void restore_tensors(const Archive& archive, ParameterSet<float>& tensors);

}  // namespace mdn
