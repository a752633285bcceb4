#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hsf {

// M x N x B radiance cube, row-major (row, col, band), 32-bit values.
struct HsiCube {
  int64_t rows = 0;
  int64_t cols = 0;
  int64_t bands = 0;
  std::vector<float> values;
  std::vector<int64_t> band_mask;  // retained band indices; empty = all

  float at(int64_t r, int64_t c, int64_t b) const {
    return values[static_cast<size_t>((r * cols + c) * bands + b)];
  }
  float& at(int64_t r, int64_t c, int64_t b) {
    return values[static_cast<size_t>((r * cols + c) * bands + b)];
  }
};

// Per-pixel class labels; 0 = unlabeled, classes run 1..class_count.
struct LabelRaster {
  int64_t rows = 0;
  int64_t cols = 0;
  int class_count = 0;
  std::vector<uint16_t> labels;
  std::vector<std::string> class_names;  // optional, size class_count when present

  uint16_t at(int64_t r, int64_t c) const { return labels[static_cast<size_t>(r * cols + c)]; }
};

// HSC1 container: magic, little-endian u32 header length, key=value header
// text, M*N*B little-endian f32 payload, M*N little-endian u16 labels.
void save_cube(const std::string& path, const HsiCube& cube, const LabelRaster& labels);
std::pair<HsiCube, LabelRaster> load_cube(const std::string& path);

// Per-band min-max scaling to [0, 1]; constant bands map to 0. Idempotent.
HsiCube normalize_bands(const HsiCube& cube);

// Keeps only the listed bands; indices must be strictly increasing in range.
HsiCube select_bands(const HsiCube& cube, const std::vector<int64_t>& mask);

}  // namespace hsf
