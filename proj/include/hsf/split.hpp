#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hsf/cube.hpp"

namespace hsf {

enum class Role { train = 0, val = 1, test = 2 };

// Disjoint pixel assignment over the labeled portion of a raster. Indices are
// flat row-major pixel positions (r * cols + c). Each labeled, non-border
// pixel appears in exactly one role; everything else appears nowhere.
struct SplitAssignment {
  uint64_t seed = 0;
  std::array<double, 3> fractions{};
  std::vector<int64_t> train;
  std::vector<int64_t> val;
  std::vector<int64_t> test;

  const std::vector<int64_t>& role(Role r) const {
    switch (r) {
      case Role::train: return train;
      case Role::val: return val;
      default: return test;
    }
  }
};

// Per-class counts for (train, val, test) given n labeled pixels. Targets are
// floor(fraction * n) with a small nudge so exactly-representable products do
// not round down, and the remainder goes train, then val, then test. Classes
// with at least 3 pixels always keep at least one training pixel.
std::array<int64_t, 3> role_targets(int64_t n, const std::array<double, 3>& fractions);

// Rows/cols within [lo, rows-1-hi] x [lo, cols-1-hi] survive the border mask
// for a given patch size; everything else is treated as unlabeled.
bool center_in_bounds(int64_t r, int64_t c, int64_t rows, int64_t cols, int64_t patch);

SplitAssignment make_disjoint_split(const LabelRaster& labels, int64_t patch,
                                    const std::array<double, 3>& fractions, uint64_t seed);

// Throws std::runtime_error naming the first offending pixel or class when the
// assignment violates disjointness, bounds, labeling, or the count rule.
void validate_split(const SplitAssignment& split, const LabelRaster& labels, int64_t patch);

void save_split(const std::string& path, const SplitAssignment& split);
SplitAssignment load_split(const std::string& path);

}  // namespace hsf
