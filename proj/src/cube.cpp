#include "hsf/cube.hpp"

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

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("cube file: truncated header length");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (size_t i = 0; i < names.size(); ++i) {
    if (i) out += ',';
    out += names[i];
  }
  return out;
}

}  // namespace

void save_cube(const std::string& path, const HsiCube& cube, const LabelRaster& labels) {
  if (cube.rows != labels.rows || cube.cols != labels.cols)
    throw std::invalid_argument("save_cube: cube and label raster extents differ");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_cube: cannot open " + path);
  std::ostringstream header;
  header << "M=" << cube.rows << "\n"
         << "N=" << cube.cols << "\n"
         << "B=" << cube.bands << "\n"
         << "C=" << labels.class_count << "\n"
         << "dtype=f32\n";
  if (!labels.class_names.empty()) header << "class_names=" << join_names(labels.class_names) << "\n";
  std::string h = header.str();
  os.write("HSC1", 4);
  put_u32(os, static_cast<uint32_t>(h.size()));
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  // f32 and u16 payloads are written byte-for-byte; this code targets
  // little-endian hosts, matching the container definition.
  os.write(reinterpret_cast<const char*>(cube.values.data()),
           static_cast<std::streamsize>(cube.values.size() * sizeof(float)));
  os.write(reinterpret_cast<const char*>(labels.labels.data()),
           static_cast<std::streamsize>(labels.labels.size() * sizeof(uint16_t)));
  if (!os) throw std::runtime_error("save_cube: write failed for " + path);
}

std::pair<HsiCube, LabelRaster> load_cube(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_cube: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "HSC1", 4) != 0)
    throw std::runtime_error("load_cube: magic mismatch in " + path);
  uint32_t hlen = get_u32(is);
  std::string header(hlen, '\0');
  is.read(header.data(), hlen);
  if (!is) throw std::runtime_error("load_cube: truncated header in " + path);

  HsiCube cube;
  LabelRaster raster;
  std::istringstream hs(header);
  std::string line;
  while (std::getline(hs, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("load_cube: malformed header line '" + line + "'");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    if (key == "M") cube.rows = std::stoll(val);
    else if (key == "N") cube.cols = std::stoll(val);
    else if (key == "B") cube.bands = std::stoll(val);
    else if (key == "C") raster.class_count = std::stoi(val);
    else if (key == "dtype") {
      if (val != "f32") throw std::runtime_error("load_cube: unsupported dtype " + val);
    } else if (key == "class_names") {
      std::istringstream names(val);
      std::string name;
      while (std::getline(names, name, ',')) raster.class_names.push_back(name);
    }
    // unknown keys are ignored for forward compatibility
  }
  if (cube.rows < 1 || cube.cols < 1 || cube.bands < 1 || raster.class_count < 0)
    throw std::runtime_error("load_cube: invalid extents in header");
  raster.rows = cube.rows;
  raster.cols = cube.cols;
  size_t nvals = static_cast<size_t>(cube.rows * cube.cols * cube.bands);
  size_t npix = static_cast<size_t>(cube.rows * cube.cols);
  cube.values.resize(nvals);
  is.read(reinterpret_cast<char*>(cube.values.data()),
          static_cast<std::streamsize>(nvals * sizeof(float)));
  if (static_cast<size_t>(is.gcount()) != nvals * sizeof(float))
    throw std::runtime_error("load_cube: truncated value payload in " + path);
  raster.labels.resize(npix);
  is.read(reinterpret_cast<char*>(raster.labels.data()),
          static_cast<std::streamsize>(npix * sizeof(uint16_t)));
  if (static_cast<size_t>(is.gcount()) != npix * sizeof(uint16_t))
    throw std::runtime_error("load_cube: truncated label payload in " + path);
  for (uint16_t l : raster.labels)
    if (l > raster.class_count)
      throw std::runtime_error("load_cube: label " + std::to_string(l) + " out of range [0," +
                               std::to_string(raster.class_count) + "]");
  return {std::move(cube), std::move(raster)};
}

HsiCube normalize_bands(const HsiCube& cube) {
  HsiCube out = cube;
  for (int64_t b = 0; b < cube.bands; ++b) {
    float lo = cube.values[static_cast<size_t>(b)];
    float hi = lo;
    for (int64_t p = 0; p < cube.rows * cube.cols; ++p) {
      float v = cube.values[static_cast<size_t>(p * cube.bands + b)];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    float span = hi - lo;
    for (int64_t p = 0; p < cube.rows * cube.cols; ++p) {
      float& v = out.values[static_cast<size_t>(p * cube.bands + b)];
      v = span > 0.0f ? (v - lo) / span : 0.0f;
    }
  }
  return out;
}

HsiCube select_bands(const HsiCube& cube, const std::vector<int64_t>& mask) {
  for (size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] < 0 || mask[i] >= cube.bands)
      throw std::invalid_argument("select_bands: index out of range");
    if (i > 0 && mask[i] <= mask[i - 1])
      throw std::invalid_argument("select_bands: indices must be strictly increasing");
  }
  if (mask.empty()) return cube;
  HsiCube out;
  out.rows = cube.rows;
  out.cols = cube.cols;
  out.bands = static_cast<int64_t>(mask.size());
  out.band_mask = mask;
  out.values.resize(static_cast<size_t>(out.rows * out.cols * out.bands));
  for (int64_t p = 0; p < cube.rows * cube.cols; ++p)
    for (size_t i = 0; i < mask.size(); ++i)
      out.values[static_cast<size_t>(p * out.bands) + i] =
          cube.values[static_cast<size_t>(p * cube.bands + mask[i])];
  return out;
}

}  // namespace hsf
