#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "hsf/cube.hpp"
#include "hsf/train.hpp"

namespace hsf {

enum class SweepAxis { patch, fraction, heads };

SweepAxis sweep_axis_from_name(const std::string& name);
const char* sweep_axis_name(SweepAxis axis);

// Figure-matching tick values: patch sizes 2-10 even, training fractions
// 5-25%, head counts 2-12 even.
std::vector<double> default_sweep_values(SweepAxis axis);

struct SweepRow {
  double value = 0;
  double test_oa = 0, test_aa = 0, test_kappa = 0;
  int64_t train_count = 0;
};

struct SweepTable {
  SweepAxis axis;
  std::vector<SweepRow> rows;
};

// One full train+test run per value, everything else held fixed. Patch values
// re-split (the border mask depends on the patch), fraction values re-split
// with (f, 0.5-f, 0.5), head values retrain the token branch only.
SweepTable sweep(SweepAxis axis, std::vector<double> values, const HsiCube& cube,
                 const LabelRaster& labels, const ModelConfig& base_model,
                 const TrainConfig& base, std::ostream* log);

std::string format_sweep(const SweepTable& table);

}  // namespace hsf
