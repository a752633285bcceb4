#include "hsf/split.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hsf/rng.hpp"

namespace hsf {

std::array<int64_t, 3> role_targets(int64_t n, const std::array<double, 3>& fractions) {
  for (double f : fractions)
    if (f < 0.0 || f > 1.0) throw std::invalid_argument("role_targets: fraction outside [0,1]");
  double sum = fractions[0] + fractions[1] + fractions[2];
  if (sum > 1.0 + 1e-9) throw std::invalid_argument("role_targets: fractions sum above 1");
  // The nudge keeps products like 0.50 * 46 from landing just under their
  // exact value in binary and losing a pixel to floor.
  std::array<int64_t, 3> out{};
  for (int i = 0; i < 3; ++i)
    out[static_cast<size_t>(i)] =
        static_cast<int64_t>(fractions[static_cast<size_t>(i)] * static_cast<double>(n) + 1e-7);
  int64_t assigned = static_cast<int64_t>(sum * static_cast<double>(n) + 1e-7);
  // pixels the floors left over go train, then val, then test
  for (int i = 0; assigned > out[0] + out[1] + out[2]; i = (i + 1) % 3)
    out[static_cast<size_t>(i)] += 1;
  if (n >= 3 && out[0] == 0) {
    if (out[2] > 0) { out[0] = 1; out[2] -= 1; }
    else if (out[1] > 0) { out[0] = 1; out[1] -= 1; }
  }
  return out;
}

bool center_in_bounds(int64_t r, int64_t c, int64_t rows, int64_t cols, int64_t patch) {
  int64_t lo = (patch - 1) / 2;
  int64_t hi = patch - 1 - lo;
  return r >= lo && r <= rows - 1 - hi && c >= lo && c <= cols - 1 - hi;
}

SplitAssignment make_disjoint_split(const LabelRaster& labels, int64_t patch,
                                    const std::array<double, 3>& fractions, uint64_t seed) {
  if (patch < 1) throw std::invalid_argument("make_disjoint_split: patch size must be positive");
  SplitAssignment split;
  split.seed = seed;
  split.fractions = fractions;
  Rng rng(seed);
  for (int cls = 1; cls <= labels.class_count; ++cls) {
    std::vector<int64_t> pixels;
    for (int64_t r = 0; r < labels.rows; ++r)
      for (int64_t c = 0; c < labels.cols; ++c)
        if (labels.at(r, c) == cls && center_in_bounds(r, c, labels.rows, labels.cols, patch))
          pixels.push_back(r * labels.cols + c);
    int64_t n = static_cast<int64_t>(pixels.size());
    if (n == 0) continue;
    rng.shuffle(pixels);
    if (n < 3) {
      // too few pixels to split three ways; keep them all for training
      split.train.insert(split.train.end(), pixels.begin(), pixels.end());
      continue;
    }
    auto t = role_targets(n, fractions);
    split.train.insert(split.train.end(), pixels.begin(), pixels.begin() + t[0]);
    split.val.insert(split.val.end(), pixels.begin() + t[0], pixels.begin() + t[0] + t[1]);
    split.test.insert(split.test.end(), pixels.begin() + t[0] + t[1],
                      pixels.begin() + t[0] + t[1] + t[2]);
  }
  return split;
}

namespace {

std::string pixel_str(int64_t flat, int64_t cols) {
  return "pixel (" + std::to_string(flat / cols) + "," + std::to_string(flat % cols) + ")";
}

}  // namespace

void validate_split(const SplitAssignment& split, const LabelRaster& labels, int64_t patch) {
  int64_t npix = labels.rows * labels.cols;
  std::vector<int8_t> seen(static_cast<size_t>(npix), 0);
  const char* role_names[3] = {"train", "val", "test"};
  const std::vector<int64_t>* roles[3] = {&split.train, &split.val, &split.test};
  for (int ri = 0; ri < 3; ++ri) {
    for (int64_t p : *roles[ri]) {
      if (p < 0 || p >= npix)
        throw std::runtime_error(std::string("validate_split: ") + role_names[ri] + " index " +
                                 std::to_string(p) + " outside raster");
      if (seen[static_cast<size_t>(p)])
        throw std::runtime_error("validate_split: " + pixel_str(p, labels.cols) +
                                 " assigned to more than one role");
      seen[static_cast<size_t>(p)] = 1;
      int64_t r = p / labels.cols, c = p % labels.cols;
      if (labels.at(r, c) == 0)
        throw std::runtime_error("validate_split: unlabeled " + pixel_str(p, labels.cols) +
                                 " assigned to " + role_names[ri]);
      if (!center_in_bounds(r, c, labels.rows, labels.cols, patch))
        throw std::runtime_error("validate_split: border " + pixel_str(p, labels.cols) +
                                 " assigned to " + role_names[ri]);
    }
  }
  // coverage and per-class counts
  std::vector<std::array<int64_t, 3>> counts(static_cast<size_t>(labels.class_count) + 1,
                                             {0, 0, 0});
  std::vector<int64_t> eligible(static_cast<size_t>(labels.class_count) + 1, 0);
  for (int ri = 0; ri < 3; ++ri)
    for (int64_t p : *roles[ri])
      counts[labels.labels[static_cast<size_t>(p)]][static_cast<size_t>(ri)] += 1;
  for (int64_t p = 0; p < npix; ++p) {
    uint16_t l = labels.labels[static_cast<size_t>(p)];
    if (l == 0) continue;
    if (!center_in_bounds(p / labels.cols, p % labels.cols, labels.rows, labels.cols, patch))
      continue;
    eligible[l] += 1;
    if (!seen[static_cast<size_t>(p)])
      throw std::runtime_error("validate_split: eligible " + pixel_str(p, labels.cols) +
                               " missing from every role");
  }
  for (int cls = 1; cls <= labels.class_count; ++cls) {
    int64_t n = eligible[static_cast<size_t>(cls)];
    const auto& got = counts[static_cast<size_t>(cls)];
    if (n == 0) {
      if (got[0] + got[1] + got[2] != 0)
        throw std::runtime_error("validate_split: class " + std::to_string(cls) +
                                 " has assignments but no eligible pixels");
      continue;
    }
    if (n < 3) {
      if (got[0] != n || got[1] != 0 || got[2] != 0)
        throw std::runtime_error("validate_split: class " + std::to_string(cls) +
                                 " with under 3 pixels must be all-train");
      continue;
    }
    auto want = role_targets(n, split.fractions);
    for (int ri = 0; ri < 3; ++ri)
      if (got[static_cast<size_t>(ri)] != want[static_cast<size_t>(ri)])
        throw std::runtime_error("validate_split: class " + std::to_string(cls) + " " +
                                 role_names[ri] + " count " + std::to_string(got[ri]) +
                                 " does not match target " + std::to_string(want[ri]));
  }
}

void save_split(const std::string& path, const SplitAssignment& split) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_split: cannot open " + path);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "fractions=%.17g,%.17g,%.17g", split.fractions[0],
                split.fractions[1], split.fractions[2]);
  os << "seed=" << split.seed << "\n" << buf << "\n";
  const char* names[3] = {"train", "val", "test"};
  const std::vector<int64_t>* roles[3] = {&split.train, &split.val, &split.test};
  for (int ri = 0; ri < 3; ++ri) {
    os << names[ri] << "=";
    for (size_t i = 0; i < roles[ri]->size(); ++i) {
      if (i) os << ' ';
      os << (*roles[ri])[i];
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("save_split: write failed for " + path);
}

SplitAssignment load_split(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_split: cannot open " + path);
  SplitAssignment split;
  std::string line;
  bool saw_seed = false, saw_fractions = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("load_split: malformed line '" + line + "'");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    if (key == "seed") {
      split.seed = std::stoull(val);
      saw_seed = true;
    } else if (key == "fractions") {
      std::istringstream fs(val);
      std::string part;
      for (int i = 0; i < 3; ++i) {
        if (!std::getline(fs, part, ','))
          throw std::runtime_error("load_split: fractions line needs three values");
        split.fractions[static_cast<size_t>(i)] = std::stod(part);
      }
      saw_fractions = true;
    } else if (key == "train" || key == "val" || key == "test") {
      std::vector<int64_t>& dst = key == "train" ? split.train
                                : key == "val"  ? split.val
                                                 : split.test;
      std::istringstream ps(val);
      int64_t p;
      while (ps >> p) dst.push_back(p);
    } else {
      throw std::runtime_error("load_split: unknown key '" + key + "'");
    }
  }
  if (!saw_seed || !saw_fractions)
    throw std::runtime_error("load_split: missing seed or fractions in " + path);
  return split;
}

}  // namespace hsf
