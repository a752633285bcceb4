#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "hsf/tensor.hpp"

namespace hsf {

struct GradCheckEntry {
  size_t leaf;
  size_t index;
  double analytic;
  double numeric;
  double rel;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::vector<GradCheckEntry> flagged;
  bool nan_detected = false;
  bool ok() const { return !nan_detected && flagged.empty(); }
};

// Central finite differences at 64-bit against the analytic backward pass.
// f must rebuild its graph from the given leaves on every call and must be
// pure. Entries where both |analytic| and |numeric| fall below 1e-6
// contribute zero relative error (pure roundoff territory).
inline GradCheckReport grad_check(const std::function<Tensor<double>()>& f,
                                  std::vector<Tensor<double>> leaves, double h = 1e-5,
                                  double tol = 1e-4) {
  GradCheckReport report;
  for (auto& leaf : leaves) leaf.zero_grad();
  Tensor<double> loss = f();
  if (!std::isfinite(loss.item())) {
    report.nan_detected = true;
    return report;
  }
  loss.backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto& leaf : leaves) analytic.push_back(leaf.grad());

  NoGradGuard ng;
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& data = leaves[li].data();
    for (size_t ei = 0; ei < data.size(); ++ei) {
      double keep = data[ei];
      data[ei] = keep + h;
      double up = f().item();
      data[ei] = keep - h;
      double down = f().item();
      data[ei] = keep;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        report.nan_detected = true;
        return report;
      }
      double numeric = (up - down) / (2.0 * h);
      double a = analytic[li][ei];
      double denom = std::max(std::abs(a), std::abs(numeric));
      double rel = denom < 1e-6 ? 0.0 : std::abs(a - numeric) / denom;
      report.max_rel_err = std::max(report.max_rel_err, rel);
      if (rel > tol) report.flagged.push_back({li, ei, a, numeric, rel});
    }
  }
  return report;
}

inline GradCheckReport grad_check(
    const std::function<Tensor<double>(const Tensor<double>&)>& f, Tensor<double> x,
    double h = 1e-5, double tol = 1e-4) {
  return grad_check([&f, &x] { return f(x); }, {x}, h, tol);
}

}  // namespace hsf
