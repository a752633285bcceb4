#include "hsf/patches.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace hsf {

int64_t candidate_center_count(int64_t rows, int64_t cols, int64_t patch) {
  if (patch < 1 || patch > rows || patch > cols) return 0;
  return (rows - patch + 1) * (cols - patch + 1);
}

PatchSet extract_patches(const HsiCube& cube, const LabelRaster& labels, int64_t patch) {
  if (cube.rows != labels.rows || cube.cols != labels.cols)
    throw std::invalid_argument("extract_patches: cube and raster extents differ");
  if (patch < 1) throw std::invalid_argument("extract_patches: patch size must be positive");
  if (patch > cube.rows || patch > cube.cols)
    throw std::invalid_argument("extract_patches: patch size exceeds raster extent");
  PatchSet set;
  set.cube = &cube;
  set.labels = &labels;
  set.patch = patch;
  for (int64_t r = 0; r < labels.rows; ++r)
    for (int64_t c = 0; c < labels.cols; ++c)
      if (labels.at(r, c) != 0 && center_in_bounds(r, c, labels.rows, labels.cols, patch))
        set.centers.push_back(r * labels.cols + c);
  return set;
}

template <typename T>
Batch<T> materialize_batch(const PatchSet& set, const std::vector<int64_t>& centers) {
  const HsiCube& cube = *set.cube;
  const LabelRaster& raster = *set.labels;
  int64_t s = set.patch;
  int64_t lo = (s - 1) / 2;
  int64_t n = static_cast<int64_t>(centers.size());
  Batch<T> batch;
  batch.centers = centers;
  batch.input = Tensor<T>::zeros({n, 1, cube.bands, s, s});
  batch.labels.resize(static_cast<size_t>(n));
  T* dst = batch.input.data().data();
  int64_t plane = s * s;
  for (int64_t i = 0; i < n; ++i) {
    int64_t p = centers[static_cast<size_t>(i)];
    int64_t cr = p / cube.cols, cc = p % cube.cols;
    uint16_t label = raster.at(cr, cc);
    if (label == 0)
      throw std::invalid_argument("materialize_batch: center without label at flat index " +
                                  std::to_string(p));
    batch.labels[static_cast<size_t>(i)] = label - 1;
    int64_t r0 = cr - lo, c0 = cc - lo;
    if (r0 < 0 || c0 < 0 || r0 + s > cube.rows || c0 + s > cube.cols)
      throw std::invalid_argument("materialize_batch: window outside raster at flat index " +
                                  std::to_string(p));
    for (int64_t b = 0; b < cube.bands; ++b)
      for (int64_t dr = 0; dr < s; ++dr)
        for (int64_t dc = 0; dc < s; ++dc)
          dst[((i * cube.bands + b) * s + dr) * s + dc] =
              static_cast<T>(cube.at(r0 + dr, c0 + dc, b));
    (void)plane;
  }
  return batch;
}

template Batch<float> materialize_batch<float>(const PatchSet&, const std::vector<int64_t>&);
template Batch<double> materialize_batch<double>(const PatchSet&, const std::vector<int64_t>&);

BatchIterator::BatchIterator(const PatchSet& set, const std::vector<int64_t>& role_pixels,
                             int64_t batch_size, Rng& rng, bool shuffle)
    : set_(&set), order_(role_pixels), batch_size_(batch_size) {
  if (batch_size < 1) throw std::invalid_argument("BatchIterator: batch size must be positive");
  std::unordered_set<int64_t> members(set.centers.begin(), set.centers.end());
  for (int64_t p : role_pixels)
    if (!members.count(p))
      throw std::invalid_argument("BatchIterator: pixel " + std::to_string(p) +
                                  " is not a patch center");
  if (shuffle) rng.shuffle(order_);
}

bool BatchIterator::next(std::vector<int64_t>& centers_out) {
  if (cursor_ >= order_.size()) return false;
  size_t take = std::min(static_cast<size_t>(batch_size_), order_.size() - cursor_);
  centers_out.assign(order_.begin() + static_cast<int64_t>(cursor_),
                     order_.begin() + static_cast<int64_t>(cursor_ + take));
  cursor_ += take;
  return true;
}

void BatchIterator::reset(Rng& rng, bool shuffle) {
  cursor_ = 0;
  if (shuffle) rng.shuffle(order_);
}

int64_t BatchIterator::batch_count() const {
  return (static_cast<int64_t>(order_.size()) + batch_size_ - 1) / batch_size_;
}

}  // namespace hsf
