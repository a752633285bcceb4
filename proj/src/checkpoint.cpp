#include "hsf/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hsf {

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  put_u32(os, static_cast<uint32_t>(v));
  put_u32(os, static_cast<uint32_t>(v >> 32));
}

uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error(std::string("checkpoint: truncated ") + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t get_u64(std::istream& is, const char* what) {
  uint64_t lo = get_u32(is, what);
  uint64_t hi = get_u32(is, what);
  return lo | (hi << 32);
}

}  // namespace

void CheckpointFile::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : header)
    if (k == key) {
      v = value;
      return;
    }
  header.emplace_back(key, value);
}

const std::string* CheckpointFile::find_header(const std::string& key) const {
  for (const auto& [k, v] : header)
    if (k == key) return &v;
  return nullptr;
}

std::string CheckpointFile::need_header(const std::string& key) const {
  const std::string* v = find_header(key);
  if (!v) throw std::runtime_error("checkpoint: missing header key " + key);
  return *v;
}

const CheckpointBlock* CheckpointFile::find_block(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return &b;
  return nullptr;
}

const CheckpointBlock& CheckpointFile::need_block(const std::string& name) const {
  const CheckpointBlock* b = find_block(name);
  if (!b) throw std::runtime_error("checkpoint: missing block " + name);
  return *b;
}

void save_checkpoint(const std::string& path, const CheckpointFile& file) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  std::ostringstream hs;
  for (const auto& [k, v] : file.header) hs << k << "=" << v << "\n";
  std::string header = hs.str();
  os.write("HSCK", 4);
  put_u32(os, static_cast<uint32_t>(header.size()));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  put_u32(os, static_cast<uint32_t>(file.blocks.size()));
  for (const auto& b : file.blocks) {
    if (shape_numel(b.shape) != static_cast<int64_t>(b.data.size()))
      throw std::invalid_argument("save_checkpoint: block " + b.name + " payload length " +
                                  std::to_string(b.data.size()) + " does not match shape " +
                                  shape_str(b.shape));
    put_u32(os, static_cast<uint32_t>(b.name.size()));
    os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    put_u32(os, static_cast<uint32_t>(b.shape.size()));
    for (int64_t e : b.shape) put_u64(os, static_cast<uint64_t>(e));
    os.write(reinterpret_cast<const char*>(b.data.data()),
             static_cast<std::streamsize>(b.data.size() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

CheckpointFile load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "HSCK", 4) != 0)
    throw std::runtime_error("load_checkpoint: magic mismatch in " + path);
  CheckpointFile file;
  uint32_t hlen = get_u32(is, "header length");
  std::string header(hlen, '\0');
  is.read(header.data(), hlen);
  if (!is) throw std::runtime_error("load_checkpoint: truncated header");
  std::istringstream hs(header);
  std::string line;
  while (std::getline(hs, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("load_checkpoint: malformed header line '" + line + "'");
    file.header.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  uint32_t count = get_u32(is, "block count");
  file.blocks.resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    CheckpointBlock& b = file.blocks[i];
    uint32_t nlen = get_u32(is, "block name length");
    b.name.resize(nlen);
    is.read(b.name.data(), nlen);
    uint32_t rank = get_u32(is, "block rank");
    b.shape.resize(rank);
    for (uint32_t r = 0; r < rank; ++r)
      b.shape[r] = static_cast<int64_t>(get_u64(is, "block extent"));
    int64_t n = shape_numel(b.shape);
    b.data.resize(static_cast<size_t>(n));
    is.read(reinterpret_cast<char*>(b.data.data()),
            static_cast<std::streamsize>(static_cast<size_t>(n) * sizeof(float)));
    if (static_cast<size_t>(is.gcount()) != static_cast<size_t>(n) * sizeof(float))
      throw std::runtime_error("load_checkpoint: truncated payload in block " + b.name);
  }
  return file;
}

}  // namespace hsf
