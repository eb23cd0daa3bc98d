#include "mdn/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mdn/error.hpp"

namespace mdn {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) parts.push_back(cur);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

Shape parse_shape(const std::string& text, int line_no) {
  Shape shape;
  for (const auto& part : split(text, 'x')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(part, &used);
      if (used != part.size() || v <= 0) throw std::invalid_argument(part);
      shape.push_back(static_cast<Index>(v));
    } catch (const std::exception&) {
      throw CheckpointError("manifest line " + std::to_string(line_no) + ": bad shape '" + text +
                            "'");
    }
  }
  if (shape.empty()) {
    throw CheckpointError("manifest line " + std::to_string(line_no) + ": empty shape");
  }
  return shape;
}

std::string format_shape(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

}  // namespace

std::string Archive::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  return {};
}

void write_archive(const std::filesystem::path& dir,
                   const std::vector<std::pair<std::string, std::string>>& meta,
                   const ParameterSet<float>& tensors) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw CheckpointError("cannot create checkpoint directory " + dir.string());

  std::ofstream manifest(dir / kManifestFile, std::ios::binary | std::ios::trunc);
  std::ofstream blob(dir / kBlobFile, std::ios::binary | std::ios::trunc);
  if (!manifest || !blob) throw CheckpointError("cannot write checkpoint into " + dir.string());

  manifest << "mdn-archive;1\n";
  for (const auto& [k, v] : meta) {
    if (k.find_first_of(";\n") != std::string::npos || v.find_first_of(";\n") != std::string::npos) {
      throw CheckpointError("meta entry '" + k + "' contains a delimiter");
    }
    manifest << "meta;" << k << ';' << v << '\n';
  }
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    manifest << "tensor;" << t.name << ';' << format_shape(t.tensor.shape()) << ";float32;"
             << offset << '\n';
    for (float f : t.tensor.data()) {
      const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(f));
      blob.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    offset += static_cast<std::uint64_t>(t.tensor.numel()) * sizeof(float);
  }
  if (!manifest.flush() || !blob.flush()) throw CheckpointError("short write in " + dir.string());
}

Archive read_archive(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / kManifestFile, std::ios::binary);
  if (!manifest) throw CheckpointError("missing " + (dir / kManifestFile).string());
  Archive archive;
  std::string line;
  int line_no = 0;
  std::uint64_t expected_offset = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto parts = split(line, ';');
    if (line_no == 1) {
      if (parts.size() != 2 || parts[0] != "mdn-archive" || parts[1] != "1") {
        throw CheckpointError("not an mdn parameter archive: " + dir.string());
      }
      continue;
    }
    if (parts[0] == "meta" && parts.size() == 3) {
      archive.meta.emplace_back(parts[1], parts[2]);
    } else if (parts[0] == "tensor" && parts.size() == 5) {
      if (parts[3] != "float32") {
        throw CheckpointError("manifest line " + std::to_string(line_no) + ": unsupported dtype " +
                              parts[3]);
      }
      ArchiveEntry e{parts[1], parse_shape(parts[2], line_no), 0};
      try {
        e.byte_offset = std::stoull(parts[4]);
      } catch (const std::exception&) {
        throw CheckpointError("manifest line " + std::to_string(line_no) + ": bad offset");
      }
      if (e.byte_offset != expected_offset) {
        throw CheckpointError("manifest line " + std::to_string(line_no) + ": tensor " + e.name +
                              " offset " + parts[4] + " != expected " +
                              std::to_string(expected_offset));
      }
      expected_offset += static_cast<std::uint64_t>(shape_numel(e.shape)) * sizeof(float);
      archive.entries.push_back(std::move(e));
    } else {
      throw CheckpointError("manifest line " + std::to_string(line_no) + " is malformed");
    }
  }
  if (line_no == 0) throw CheckpointError("empty manifest in " + dir.string());

  std::ifstream blob(dir / kBlobFile, std::ios::binary | std::ios::ate);
  if (!blob) throw CheckpointError("missing " + (dir / kBlobFile).string());
  const auto size = static_cast<std::uint64_t>(blob.tellg());
  if (size != expected_offset) {
    throw CheckpointError("blob holds " + std::to_string(size) + " bytes but manifest describes " +
                          std::to_string(expected_offset));
  }
  blob.seekg(0);
  archive.values.resize(size / sizeof(float));
  std::vector<std::uint32_t> raw(archive.values.size());
  blob.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size));
  if (!blob) throw CheckpointError("short read from " + (dir / kBlobFile).string());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    archive.values[i] = std::bit_cast<float>(to_little_endian(raw[i]));
  }
  return archive;
}

void restore_tensors(const Archive& archive, ParameterSet<float>& tensors) {
  const std::size_t common = std::min(archive.entries.size(), tensors.size());
  for (std::size_t i = 0; i < common; ++i) {
    const auto& e = archive.entries[i];
    auto& t = tensors[i];
    if (e.name != t.name || e.shape != t.tensor.shape()) {
      throw CheckpointError("tensor mismatch at '" + t.name + "': archive has " + e.name + " " +
                            shape_to_string(e.shape) + ", model expects " +
                            shape_to_string(t.tensor.shape()));
    }
  }
  if (archive.entries.size() != tensors.size()) {
    const std::string name = archive.entries.size() > tensors.size()
                                 ? archive.entries[common].name
                                 : tensors[common].name;
    throw CheckpointError("tensor mismatch at '" + name + "': archive has " +
                          std::to_string(archive.entries.size()) + " tensors, model expects " +
                          std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& e = archive.entries[i];
    auto dst = tensors[i].tensor.data();
    const float* src = archive.values.data() + e.byte_offset / sizeof(float);
    std::memcpy(dst.data(), src, dst.size() * sizeof(float));
  }
}

}  // namespace mdn
