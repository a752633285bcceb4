#include "hsf/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace hsf {

ConfusionMatrix::ConfusionMatrix(int classes) : classes_(classes) {
  if (classes < 1) throw std::invalid_argument("ConfusionMatrix: need at least one class");
  counts_.assign(static_cast<size_t>(classes) * static_cast<size_t>(classes), 0);
}

void ConfusionMatrix::add(int64_t truth, int64_t predicted, uint64_t count) {
  if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_)
    throw std::out_of_range("ConfusionMatrix::add: class id outside [0," +
                            std::to_string(classes_ - 1) + "]");
  counts_[static_cast<size_t>(truth * classes_ + predicted)] += count;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_)
    throw std::invalid_argument("ConfusionMatrix::merge: class counts differ");
  for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

uint64_t ConfusionMatrix::at(int64_t truth, int64_t predicted) const {
  if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_)
    throw std::out_of_range("ConfusionMatrix::at: class id outside range");
  return counts_[static_cast<size_t>(truth * classes_ + predicted)];
}

uint64_t ConfusionMatrix::total() const {
  uint64_t t = 0;
  for (uint64_t c : counts_) t += c;
  return t;
}

KappaResult kappa(const ConfusionMatrix& cm) {
  // kappa = (N * trace - sum_k row_k * col_k) / (N^2 - sum_k row_k * col_k).
  // All four terms fit comfortably in 128-bit integers for u64 counts, so the
  // degeneracy checks below are exact rather than tolerance-based.
  int n = cm.classes();
  __int128 total = 0, trace = 0, cross = 0;
  std::vector<uint64_t> row(static_cast<size_t>(n), 0), col(static_cast<size_t>(n), 0);
  for (int t = 0; t < n; ++t)
    for (int p = 0; p < n; ++p) {
      uint64_t c = cm.at(t, p);
      row[static_cast<size_t>(t)] += c;
      col[static_cast<size_t>(p)] += c;
      total += c;
      if (t == p) trace += c;
    }
  for (int k = 0; k < n; ++k)
    cross += static_cast<__int128>(row[static_cast<size_t>(k)]) *
             static_cast<__int128>(col[static_cast<size_t>(k)]);
  KappaResult out;
  if (total == 0) {
    out.saturated_marginals = true;
    return out;
  }
  __int128 num = total * trace - cross;
  __int128 den = total * total - cross;
  if (num == 0) out.degenerate_agreement = true;
  if (den == 0) {
    // expected agreement is already 1; assign the conventional endpoint
    out.saturated_marginals = true;
    out.kappa = trace == total ? 1.0 : 0.0;
    return out;
  }
  out.kappa = static_cast<double>(num) / static_cast<double>(den);
  return out;
}

AccuracyResult oa_aa(const ConfusionMatrix& cm) {
  int n = cm.classes();
  AccuracyResult out;
  out.per_class.assign(static_cast<size_t>(n), std::nan(""));
  uint64_t total = 0, correct = 0;
  double recall_sum = 0.0;
  int present = 0;
  for (int t = 0; t < n; ++t) {
    uint64_t row = 0;
    for (int p = 0; p < n; ++p) row += cm.at(t, p);
    total += row;
    correct += cm.at(t, t);
    if (row == 0) {
      out.absent_classes.push_back(t);
      continue;
    }
    double recall = static_cast<double>(cm.at(t, t)) / static_cast<double>(row);
    out.per_class[static_cast<size_t>(t)] = recall;
    recall_sum += recall;
    present += 1;
  }
  out.overall = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  out.average = present ? recall_sum / present : 0.0;
  return out;
}

std::string metrics_report(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
  auto acc = oa_aa(cm);
  auto k = kappa(cm);
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "oa=%.6f aa=%.6f kappa=%.6f samples=%llu\n", acc.overall,
                acc.average, k.kappa, static_cast<unsigned long long>(cm.total()));
  out += buf;
  if (k.degenerate_agreement) out += "note: observed agreement equals chance agreement\n";
  if (k.saturated_marginals) out += "note: marginals saturated, kappa pinned\n";
  for (int t = 0; t < cm.classes(); ++t) {
    std::string name = t < static_cast<int>(names.size()) ? names[static_cast<size_t>(t)]
                                                          : "class_" + std::to_string(t + 1);
    if (std::isnan(acc.per_class[static_cast<size_t>(t)]))
      std::snprintf(buf, sizeof(buf), "  %-24s absent\n", name.c_str());
    else
      std::snprintf(buf, sizeof(buf), "  %-24s recall=%.6f\n", name.c_str(),
                    acc.per_class[static_cast<size_t>(t)]);
    out += buf;
  }
  return out;
}

std::array<uint8_t, 3> class_color(int id) {
  // Hue-stepped palette; id 0 is reserved for unlabeled/background.
  static const std::array<uint8_t, 3> table[] = {
      {0, 0, 0},       {230, 25, 75},   {60, 180, 75},   {255, 225, 25},  {0, 130, 200},
      {245, 130, 48},  {145, 30, 180},  {70, 240, 240},  {240, 50, 230},  {210, 245, 60},
      {250, 190, 212}, {0, 128, 128},   {220, 190, 255}, {170, 110, 40},  {255, 250, 200},
      {128, 0, 0},     {170, 255, 195}, {128, 128, 0},   {255, 215, 180}, {0, 0, 128},
      {128, 128, 128}, {255, 255, 255}};
  constexpr int table_size = static_cast<int>(sizeof(table) / sizeof(table[0]));
  if (id <= 0) return table[0];
  return table[1 + (id - 1) % (table_size - 1)];
}

void emit_map(const std::string& path, const LabelRaster& labels,
              const std::vector<int64_t>& pixels, const std::vector<int64_t>& predictions) {
  if (pixels.size() != predictions.size())
    throw std::invalid_argument("emit_map: pixel and prediction counts differ (" +
                                std::to_string(pixels.size()) + " vs " +
                                std::to_string(predictions.size()) + ")");
  int64_t npix = labels.rows * labels.cols;
  std::vector<uint8_t> image(static_cast<size_t>(npix) * 3, 0);
  for (size_t i = 0; i < pixels.size(); ++i) {
    int64_t p = pixels[i];
    if (p < 0 || p >= npix)
      throw std::invalid_argument("emit_map: pixel index " + std::to_string(p) +
                                  " outside raster");
    int64_t cls = predictions[i];
    if (cls < 0 || cls >= labels.class_count)
      throw std::invalid_argument("emit_map: prediction " + std::to_string(cls) +
                                  " outside [0," + std::to_string(labels.class_count - 1) + "]");
    auto rgb = class_color(static_cast<int>(cls) + 1);
    image[static_cast<size_t>(p) * 3 + 0] = rgb[0];
    image[static_cast<size_t>(p) * 3 + 1] = rgb[1];
    image[static_cast<size_t>(p) * 3 + 2] = rgb[2];
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("emit_map: cannot open " + path);
  os << "P6\n" << labels.cols << " " << labels.rows << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.data()), static_cast<std::streamsize>(image.size()));
  if (!os) throw std::runtime_error("emit_map: write failed for " + path);
}

}  // namespace hsf
