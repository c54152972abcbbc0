#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "etkpf/linalg.hpp"

namespace etkpf {

/**
 * @brief Minimal container format for numeric archives: a plain-text
 * header naming metadata and blocks, then the blocks' float64 payloads
 * row-major, little-endian, in header order.
 *
 *   etkpf-archive v1
 *   meta <key> <value>
 *   block <name> <rows> <cols>
 *   ...
 *   end
 *   <payload>
 */
struct BlockFile {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Matrix>> blocks;

  void add_meta(const std::string& key, const std::string& value);
  void add_meta(const std::string& key, std::uint64_t value);
  void add_block(const std::string& name, Matrix m);

  bool has_meta(const std::string& key) const;
  const std::string& meta_at(const std::string& key) const;
  bool has_block(const std::string& name) const;
  const Matrix& block_at(const std::string& name) const;
};

void write_block_file(const std::string& path, const BlockFile& file);
BlockFile read_block_file(const std::string& path);

/// FNV-1a 64-bit hash, hex encoded; used to fingerprint configs in run
/// manifests.
std::string fnv1a_hex(const std::string& text);

}  // namespace etkpf
