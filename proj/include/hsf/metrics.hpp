#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hsf/cube.hpp"
#include "hsf/split.hpp"

namespace hsf {

// Square confusion matrix over 0-based class ids; counts[t][p] is the number
// of samples with true class t predicted as p.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes);

  void add(int64_t truth, int64_t predicted, uint64_t count = 1);
  void merge(const ConfusionMatrix& other);

  int classes() const { return classes_; }
  uint64_t at(int64_t truth, int64_t predicted) const;
  uint64_t total() const;

 private:
  int classes_;
  std::vector<uint64_t> counts_;
};

struct KappaResult {
  double kappa = 0.0;
  bool degenerate_agreement = false;  // observed equals expected agreement exactly
  bool saturated_marginals = false;   // expected agreement is 1, kappa pinned to 0 or 1
};

// Cohen's kappa with exact integer arithmetic for the observed/expected terms.
KappaResult kappa(const ConfusionMatrix& cm);

struct AccuracyResult {
  double overall = 0.0;
  double average = 0.0;                 // mean recall over classes that appear
  std::vector<double> per_class;        // NaN for absent classes
  std::vector<int> absent_classes;      // 0-based ids with zero true samples
};

AccuracyResult oa_aa(const ConfusionMatrix& cm);

// Human-readable block: OA/AA/kappa plus one recall line per class.
std::string metrics_report(const ConfusionMatrix& cm, const std::vector<std::string>& names);

// Fixed palette for class ids 1..n; id 0 renders black.
std::array<uint8_t, 3> class_color(int id);

// Writes a binary PPM (P6) raster the size of the label map. Pixels listed in
// `pixels` are colored by their prediction (0-based ids); everything else is
// black. `pixels` and `predictions` must be the same length.
void emit_map(const std::string& path, const LabelRaster& labels,
              const std::vector<int64_t>& pixels, const std::vector<int64_t>& predictions);

}  // namespace hsf
