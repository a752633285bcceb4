#include "hsf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hsf/rng.hpp"

namespace hsf {

namespace {

// Smallest Chebyshev distance from pixel (r,c) to any pixel of another
// region, capped at `cap` (returns cap + 1 when no foreign pixel is that
// close). Raster edges do not erode; only real foreign pixels do.
int clearance(const std::vector<int>& region, int64_t rows, int64_t cols, int64_t r, int64_t c,
              int cap) {
  int own = region[static_cast<size_t>(r * cols + c)];
  for (int d = 1; d <= cap; ++d) {
    for (int64_t rr = std::max<int64_t>(0, r - d); rr <= std::min(rows - 1, r + d); ++rr)
      for (int64_t cc = std::max<int64_t>(0, c - d); cc <= std::min(cols - 1, c + d); ++cc) {
        if (std::max(std::llabs(rr - r), std::llabs(cc - c)) != d) continue;
        if (region[static_cast<size_t>(rr * cols + cc)] != own) return d;
      }
  }
  return cap + 1;
}

}  // namespace

std::pair<HsiCube, LabelRaster> synth_cube(const SynthConfig& cfg) {
  if (cfg.rows < 2 || cfg.cols < 2 || cfg.bands < 1)
    throw std::invalid_argument("synth_cube: extents too small");
  if (cfg.classes < 1) throw std::invalid_argument("synth_cube: need at least one class");
  if (cfg.classes * 3 > cfg.rows * cfg.cols)
    throw std::invalid_argument("synth_cube: raster too small for the site count");
  Rng rng(cfg.seed);

  // Scene layout: three Voronoi sites per class at distinct pixel positions,
  // classes assigned round-robin so every class owns spatially separated
  // blobs rather than one contiguous patch.
  int sites = cfg.classes * 3;
  std::vector<int64_t> site_r(static_cast<size_t>(sites)), site_c(static_cast<size_t>(sites));
  for (int k = 0; k < sites; ++k) {
    for (;;) {
      int64_t r = static_cast<int64_t>(rng.below(static_cast<uint64_t>(cfg.rows)));
      int64_t c = static_cast<int64_t>(rng.below(static_cast<uint64_t>(cfg.cols)));
      bool clash = false;
      for (int j = 0; j < k; ++j)
        if (site_r[static_cast<size_t>(j)] == r && site_c[static_cast<size_t>(j)] == c) {
          clash = true;
          break;
        }
      if (!clash) {
        site_r[static_cast<size_t>(k)] = r;
        site_c[static_cast<size_t>(k)] = c;
        break;
      }
    }
  }

  std::vector<int> region(static_cast<size_t>(cfg.rows * cfg.cols), 0);
  for (int64_t r = 0; r < cfg.rows; ++r)
    for (int64_t c = 0; c < cfg.cols; ++c) {
      int best = 0;
      int64_t best_d = -1;
      for (int k = 0; k < sites; ++k) {
        int64_t dr = r - site_r[static_cast<size_t>(k)];
        int64_t dc = c - site_c[static_cast<size_t>(k)];
        int64_t d = dr * dr + dc * dc;
        if (best_d < 0 || d < best_d) {  // ties keep the lower site index
          best_d = d;
          best = k;
        }
      }
      region[static_cast<size_t>(r * cfg.cols + c)] = best;
    }

  std::vector<double> gain(static_cast<size_t>(sites));
  for (int k = 0; k < sites; ++k)
    gain[static_cast<size_t>(k)] = 1.0 + cfg.gain_spread * (2.0 * rng.next_double() - 1.0);

  // Class spectra: flat baseline plus two Gaussian bumps whose centers step
  // through the band range, so classes occupy disjoint spectral neighborhoods.
  std::vector<std::vector<double>> signature(static_cast<size_t>(cfg.classes));
  for (int cls = 0; cls < cfg.classes; ++cls) {
    double mu1 = (cls + 0.25) * static_cast<double>(cfg.bands) / cfg.classes;
    double mu2 = (cls + 0.75) * static_cast<double>(cfg.bands) / cfg.classes;
    double s1 = 0.08 * static_cast<double>(cfg.bands);
    double s2 = 0.05 * static_cast<double>(cfg.bands);
    auto& sig = signature[static_cast<size_t>(cls)];
    sig.resize(static_cast<size_t>(cfg.bands));
    for (int64_t b = 0; b < cfg.bands; ++b) {
      double x = static_cast<double>(b);
      sig[static_cast<size_t>(b)] = 0.1 +
                                    0.9 * std::exp(-0.5 * (x - mu1) * (x - mu1) / (s1 * s1)) +
                                    0.6 * std::exp(-0.5 * (x - mu2) * (x - mu2) / (s2 * s2));
    }
  }

  HsiCube cube;
  cube.rows = cfg.rows;
  cube.cols = cfg.cols;
  cube.bands = cfg.bands;
  cube.values.resize(static_cast<size_t>(cfg.rows * cfg.cols * cfg.bands));
  for (int64_t p = 0; p < cfg.rows * cfg.cols; ++p) {
    int k = region[static_cast<size_t>(p)];
    const auto& sig = signature[static_cast<size_t>(k % cfg.classes)];
    double g = gain[static_cast<size_t>(k)];
    for (int64_t b = 0; b < cfg.bands; ++b)
      cube.values[static_cast<size_t>(p * cfg.bands + b)] =
          static_cast<float>(g * sig[static_cast<size_t>(b)] + cfg.noise_sigma * rng.normal());
  }

  // Label only pixels whose full Chebyshev neighborhood stays inside one
  // region; a class whose labels all erode away backs off its own margin.
  LabelRaster raster;
  raster.rows = cfg.rows;
  raster.cols = cfg.cols;
  raster.class_count = cfg.classes;
  raster.labels.assign(static_cast<size_t>(cfg.rows * cfg.cols), 0);
  for (int cls = 0; cls < cfg.classes; ++cls)
    raster.class_names.push_back("class_" + std::to_string(cls + 1));

  std::vector<int> clear(static_cast<size_t>(cfg.rows * cfg.cols));
  for (int64_t r = 0; r < cfg.rows; ++r)
    for (int64_t c = 0; c < cfg.cols; ++c)
      clear[static_cast<size_t>(r * cfg.cols + c)] =
          clearance(region, cfg.rows, cfg.cols, r, c, cfg.erosion_margin);

  std::vector<int> margin(static_cast<size_t>(cfg.classes), cfg.erosion_margin);
  for (;;) {
    std::vector<int64_t> labeled(static_cast<size_t>(cfg.classes), 0);
    for (int64_t p = 0; p < cfg.rows * cfg.cols; ++p) {
      int cls = region[static_cast<size_t>(p)] % cfg.classes;
      if (clear[static_cast<size_t>(p)] > margin[static_cast<size_t>(cls)]) {
        raster.labels[static_cast<size_t>(p)] = static_cast<uint16_t>(cls + 1);
        labeled[static_cast<size_t>(cls)] += 1;
      } else {
        raster.labels[static_cast<size_t>(p)] = 0;
      }
    }
    bool retry = false;
    for (int cls = 0; cls < cfg.classes; ++cls)
      if (labeled[static_cast<size_t>(cls)] == 0 && margin[static_cast<size_t>(cls)] > 0) {
        margin[static_cast<size_t>(cls)] -= 1;
        retry = true;
      }
    if (!retry) break;
  }
  return {std::move(cube), std::move(raster)};
}

}  // namespace hsf
