#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hsf/tensor.hpp"

namespace hsf {

// One named float tensor inside a checkpoint.
struct CheckpointBlock {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

// Binary container: magic "HSCK", little-endian u32 header length, header
// text (key=value lines, order preserved), u32 block count, then per block
// [u32 name length][name][u32 rank][u64 extents...][f32 payload].
// Order preservation makes save(load(f)) reproduce f byte for byte.
struct CheckpointFile {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<CheckpointBlock> blocks;

  void set(const std::string& key, const std::string& value);
  const std::string* find_header(const std::string& key) const;
  std::string need_header(const std::string& key) const;  // throws when absent
  const CheckpointBlock* find_block(const std::string& name) const;
  const CheckpointBlock& need_block(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const CheckpointFile& file);
CheckpointFile load_checkpoint(const std::string& path);

}  // namespace hsf
