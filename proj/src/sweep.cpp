#include "hsf/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace hsf {

SweepAxis sweep_axis_from_name(const std::string& name) {
  if (name == "patch") return SweepAxis::patch;
  if (name == "fraction") return SweepAxis::fraction;
  if (name == "heads") return SweepAxis::heads;
  throw std::invalid_argument("sweep: unknown axis '" + name +
                              "' (expected patch, fraction, or heads)");
}

const char* sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::patch: return "patch";
    case SweepAxis::fraction: return "fraction";
    default: return "heads";
  }
}

std::vector<double> default_sweep_values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::patch: return {2, 4, 6, 8, 10};
    case SweepAxis::fraction: return {0.05, 0.10, 0.15, 0.20, 0.25};
    default: return {2, 4, 6, 8, 10, 12};
  }
}

namespace {

void check_values(SweepAxis axis, const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("sweep: no values given");
  for (double v : values) {
    switch (axis) {
      case SweepAxis::patch:
        if (v < 2 || v > 10 || v != std::floor(v))
          throw std::invalid_argument("sweep: patch values must be integers in [2,10]");
        break;
      case SweepAxis::fraction:
        if (v <= 0 || v > 0.5)
          throw std::invalid_argument("sweep: fraction values must lie in (0, 0.5]");
        break;
      case SweepAxis::heads:
        if (v < 2 || v > 12 || v != std::floor(v))
          throw std::invalid_argument("sweep: head counts must be integers in [2,12]");
        break;
    }
  }
}

}  // namespace

SweepTable sweep(SweepAxis axis, std::vector<double> values, const HsiCube& cube,
                 const LabelRaster& labels, const ModelConfig& base_model,
                 const TrainConfig& base, std::ostream* log) {
  check_values(axis, values);
  std::sort(values.begin(), values.end());

  SweepTable table;
  table.axis = axis;
  for (double value : values) {
    TrainConfig cfg = base;
    ModelConfig mc = base_model;
    switch (axis) {
      case SweepAxis::patch:
        cfg.patch_size = static_cast<int64_t>(value);
        break;
      case SweepAxis::fraction:
        cfg.fractions = {value, 0.5 - value, 0.5};
        break;
      case SweepAxis::heads:
        mc.sst_heads = static_cast<int64_t>(value);
        break;
    }
    mc = adapt_model_config(mc, cfg.patch_size);
    auto split = make_disjoint_split(labels, cfg.patch_size, cfg.fractions, cfg.seed);
    auto set = extract_patches(cube, labels, cfg.patch_size);
    FusionModel<float> model(mc, cfg.patch_size, cube.bands, labels.class_count, cfg.seed);
    Adam opt(cfg.learning_rate, cfg.decay);
    if (log) (*log) << "sweep " << sweep_axis_name(axis) << "=" << value << "\n";
    auto outcome = train(model, opt, set, split, cfg, log);
    if (!outcome.best_state.empty()) apply_state(model, outcome.best_state);
    auto cm = evaluate(model, set, split.test, cfg.batch_size);
    auto acc = oa_aa(cm);
    SweepRow row;
    row.value = value;
    row.test_oa = acc.overall;
    row.test_aa = acc.average;
    row.test_kappa = kappa(cm).kappa;
    row.train_count = static_cast<int64_t>(split.train.size());
    table.rows.push_back(row);
  }
  return table;
}

std::string format_sweep(const SweepTable& table) {
  std::string out = std::string(sweep_axis_name(table.axis)) +
                    "        test_oa   test_aa   test_kappa  train_count\n";
  char buf[120];
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof(buf), "%-9.4g %.6f  %.6f  %.6f    %lld\n", r.value, r.test_oa,
                  r.test_aa, r.test_kappa, static_cast<long long>(r.train_count));
    out += buf;
  }
  return out;
}

}  // namespace hsf
