#pragma once

#include <cstdint>
#include <vector>

#include "hsf/cube.hpp"
#include "hsf/rng.hpp"
#include "hsf/split.hpp"
#include "hsf/tensor.hpp"

namespace hsf {

// Number of SxS windows that fit fully inside a rows x cols raster.
int64_t candidate_center_count(int64_t rows, int64_t cols, int64_t patch);

// Lightweight view over the labeled patch population of one cube. Centers are
// flat row-major pixel indices whose full SxS window fits in the raster and
// whose pixel carries a label. The cube and raster must outlive the set.
struct PatchSet {
  const HsiCube* cube = nullptr;
  const LabelRaster* labels = nullptr;
  int64_t patch = 0;
  std::vector<int64_t> centers;
};

PatchSet extract_patches(const HsiCube& cube, const LabelRaster& labels, int64_t patch);

// Materialize selected centers as a (count, 1, bands, patch, patch) tensor
// plus 0-based labels. For even patch sizes the center sits at the floor
// position, so the window spans [r-lo, r+hi] with lo = (S-1)/2, hi = S-1-lo.
template <typename T>
struct Batch {
  Tensor<T> input;
  std::vector<int64_t> labels;  // 0-based class ids
  std::vector<int64_t> centers;
};

template <typename T>
Batch<T> materialize_batch(const PatchSet& set, const std::vector<int64_t>& centers);

// Iterates one role of a split in shuffled mini-batches. Every requested
// pixel must be a member of the patch set; the final batch may be short.
class BatchIterator {
 public:
  BatchIterator(const PatchSet& set, const std::vector<int64_t>& role_pixels, int64_t batch_size,
                Rng& rng, bool shuffle);

  bool next(std::vector<int64_t>& centers_out);
  void reset(Rng& rng, bool shuffle);
  int64_t batch_count() const;

 private:
  const PatchSet* set_;
  std::vector<int64_t> order_;
  int64_t batch_size_;
  size_t cursor_ = 0;
};

}  // namespace hsf
