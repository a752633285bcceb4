#pragma once

#include <cstdint>
#include <utility>

#include "hsf/cube.hpp"

namespace hsf {

struct SynthConfig {
  int64_t rows = 32;
  int64_t cols = 32;
  int64_t bands = 16;
  int classes = 3;
  double noise_sigma = 0.02;
  double gain_spread = 0.1;   // per-region multiplicative gain in [1-s, 1+s]
  int erosion_margin = 2;     // Chebyshev distance to other-region pixels
  uint64_t seed = 0;
};

// Voronoi-blob scene: classes * 3 sites, round-robin class assignment,
// class-specific smooth spectra with per-region gain, additive Gaussian noise.
// Labels are eroded away from region boundaries; every class keeps at least
// one labeled pixel (the margin backs off per class if erosion empties it).
std::pair<HsiCube, LabelRaster> synth_cube(const SynthConfig& cfg);

}  // namespace hsf
