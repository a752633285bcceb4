// Release gate: ten end-to-end checks over the whole toolkit, one line each.
// Budgets and tolerances are pinned here so a regression in accuracy, exact
// arithmetic, determinism, or runtime turns the line red. Exits nonzero when
// any check fails; ctest treats that as failure directly.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "hsf/checkpoint.hpp"
#include "hsf/cube.hpp"
#include "hsf/fusion.hpp"
#include "hsf/gradcheck.hpp"
#include "hsf/metrics.hpp"
#include "hsf/model.hpp"
#include "hsf/ops.hpp"
#include "hsf/patches.hpp"
#include "hsf/rng.hpp"
#include "hsf/split.hpp"
#include "hsf/sweep.hpp"
#include "hsf/swin3d.hpp"
#include "hsf/synth.hpp"
#include "hsf/tensor.hpp"
#include "hsf/train.hpp"

using hsf::BranchMode;
using hsf::ConfusionMatrix;
using hsf::FusionModel;
using hsf::HsiCube;
using hsf::LabelRaster;
using hsf::ModelConfig;
using hsf::Rng;
using hsf::Shape;
using hsf::SplitAssignment;
using hsf::Tensor;
using hsf::TrainConfig;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

Tensor<double> rand_t(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                      bool requires_grad = true) {
  std::vector<double> v(static_cast<size_t>(hsf::shape_numel(shape)));
  for (auto& x : v) x = lo + (hi - lo) * rng.next_double();
  return Tensor<double>::from(std::move(shape), std::move(v), requires_grad);
}

// Magnitudes in [0.25, 1.25] with random sign: keeps finite differences away
// from the relu/max kinks at zero.
Tensor<double> rand_offkink(Shape shape, Rng& rng) {
  std::vector<double> v(static_cast<size_t>(hsf::shape_numel(shape)));
  for (auto& x : v) x = (0.25 + rng.next_double()) * (rng.below(2) ? 1.0 : -1.0);
  return Tensor<double>::from(std::move(shape), std::move(v), true);
}

// ---------------------------------------------------------------------------
// 1. gradient suite: every differentiable op plus tiny end-to-end models

struct GradOutcome {
  int cases = 0;
  int failed = 0;
  double worst = 0.0;
  std::string first_bad;
};

void grad_case(GradOutcome& out, const char* name, std::vector<Tensor<double>> leaves,
               const std::function<Tensor<double>()>& fwd) {
  auto loss = [&]() { return hsf::sum_all(hsf::sigmoid(fwd())); };
  auto rep = hsf::grad_check(loss, std::move(leaves), 1e-5, 1e-4);
  out.cases += 1;
  out.worst = std::max(out.worst, rep.max_rel_err);
  if (!rep.ok()) {
    out.failed += 1;
    if (out.first_bad.empty()) out.first_bad = name;
  }
}

void grad_model_case(GradOutcome& out, BranchMode mode, uint64_t seed) {
  ModelConfig cfg;
  cfg.embed_dim = 4;
  cfg.stage_depths = {1};
  cfg.stage_heads = {2};
  cfg.window = {2, 2, 2};
  cfg.merge_stages = {};
  cfg.mlp_ratio = 2;
  cfg.stem_kernel = {3, 3, 3};
  cfg.token_count = 4;
  cfg.token_dim = 4;
  cfg.sst_layers = 1;
  cfg.sst_heads = 2;
  cfg.fused_dim = 4;
  cfg.mode = mode;

  FusionModel<double> model(cfg, 2, 4, 2, seed);
  Rng rng(seed + 1000);
  std::vector<double> v(2 * 1 * 4 * 2 * 2);
  for (auto& x : v) x = rng.next_double();
  auto input = Tensor<double>::from({2, 1, 4, 2, 2}, std::move(v), true);

  std::vector<Tensor<double>> leaves = {input};
  for (const auto& name : model.params().names()) leaves.push_back(model.params().get(name));

  auto loss = [&]() {
    auto fwd = model.forward(input, true);
    return hsf::cross_entropy(fwd.probs, {0, 1});
  };
  auto rep = hsf::grad_check(loss, std::move(leaves), 1e-5, 1e-4);
  out.cases += 1;
  out.worst = std::max(out.worst, rep.max_rel_err);
  if (!rep.ok()) {
    out.failed += 1;
    if (out.first_bad.empty())
      out.first_bad = std::string("model_") + (mode == BranchMode::fused      ? "fused"
                                               : mode == BranchMode::sst_only ? "sst"
                                                                              : "swin");
  }
}

bool check_gradients(std::string& detail) {
  auto t0 = Clock::now();
  Rng rng(8101);
  GradOutcome out;

  {
    auto a = rand_t({2, 3}, rng), b = rand_t({2, 3}, rng);
    grad_case(out, "add", {a, b}, [=] { return hsf::add(a, b); });
  }
  {
    auto a = rand_t({2, 3}, rng), b = rand_t({2, 3}, rng);
    grad_case(out, "sub", {a, b}, [=] { return hsf::sub(a, b); });
  }
  {
    auto a = rand_t({2, 3}, rng);
    grad_case(out, "neg", {a}, [=] { return hsf::neg(a); });
  }
  {
    auto a = rand_t({2, 3}, rng), b = rand_t({2, 3}, rng);
    grad_case(out, "mul", {a, b}, [=] { return hsf::mul(a, b); });
  }
  {
    auto a = rand_t({2, 3}, rng);
    grad_case(out, "mul_scalar", {a}, [=] { return hsf::mul_scalar(a, 1.7); });
  }
  {
    auto a = rand_offkink({3, 4}, rng);
    grad_case(out, "relu", {a}, [=] { return hsf::relu(a); });
  }
  {
    auto a = rand_t({3, 4}, rng);
    grad_case(out, "sigmoid", {a}, [=] { return hsf::sigmoid(a); });
  }
  {
    auto a = rand_t({3, 4}, rng);
    grad_case(out, "gelu", {a}, [=] { return hsf::gelu(a); });
  }
  {
    auto a = rand_t({2, 6}, rng);
    grad_case(out, "reshape", {a}, [=] { return hsf::reshape(a, {3, 4}); });
  }
  {
    auto a = rand_t({2, 3, 4}, rng);
    grad_case(out, "permute", {a}, [=] { return hsf::permute(a, {2, 0, 1}); });
  }
  {
    auto a = rand_t({2, 3}, rng), b = rand_t({2, 2}, rng);
    grad_case(out, "concat", {a, b},
              [=] { return hsf::concat(std::vector<Tensor<double>>{a, b}, 1); });
  }
  {
    auto a = rand_t({2, 3, 4}, rng);
    grad_case(out, "roll", {a}, [=] { return hsf::roll(a, {1, -2, 2}); });
  }
  {
    auto a = rand_t({2, 3}, rng);
    grad_case(out, "pad_end", {a}, [=] { return hsf::pad_end(a, {1, 2}); });
  }
  {
    auto a = rand_t({3, 4}, rng);
    grad_case(out, "crop_end", {a}, [=] { return hsf::crop_end(a, {2, 3}); });
  }
  {
    auto a = rand_t({2, 5, 3}, rng);
    grad_case(out, "gather_rows", {a}, [=] { return hsf::gather_rows(a, {4, 0, 2, 2}); });
  }
  {
    auto a = rand_t({2, 3}, rng);
    grad_case(out, "sum_all", {a}, [=] { return hsf::sum_all(a); });
  }
  {
    auto a = rand_t({2, 3, 4}, rng);
    grad_case(out, "mean_axis", {a}, [=] { return hsf::mean_axis(a, 1); });
  }
  {
    auto a = rand_t({2, 3}, rng), b = rand_t({3, 2}, rng);
    grad_case(out, "matmul", {a, b}, [=] { return hsf::matmul(a, b); });
  }
  {
    auto a = rand_t({2, 2, 3}, rng), b = rand_t({2, 3, 2}, rng);
    grad_case(out, "matmul_batched", {a, b}, [=] { return hsf::matmul(a, b); });
  }
  {
    auto a = rand_t({2, 2, 3}, rng), b = rand_t({3, 2}, rng);
    grad_case(out, "matmul_broadcast", {a, b}, [=] { return hsf::matmul(a, b); });
  }
  {
    auto x = rand_t({2, 3}, rng), w = rand_t({3, 4}, rng), b = rand_t({4}, rng);
    grad_case(out, "linear", {x, w, b}, [=] { return hsf::linear(x, w, b); });
  }
  {
    auto x = rand_t({2, 5}, rng);
    grad_case(out, "softmax", {x}, [=] { return hsf::softmax(x, 1); });
  }
  {
    auto x = rand_t({2, 6}, rng), g = rand_t({6}, rng, 0.5, 1.5), b = rand_t({6}, rng);
    grad_case(out, "layer_norm", {x, g, b}, [=] { return hsf::layer_norm(x, g, b); });
  }
  {
    auto x = rand_t({2, 3, 2, 2, 2}, rng), g = rand_t({3}, rng, 0.5, 1.5), b = rand_t({3}, rng);
    auto rm = std::make_shared<std::vector<double>>(3, 0.0);
    auto rv = std::make_shared<std::vector<double>>(3, 1.0);
    grad_case(out, "batch_norm_3d", {x, g, b},
              [=] { return hsf::batch_norm_3d(x, g, b, *rm, *rv, true); });
  }
  {
    auto x = rand_t({1, 2, 3, 3, 3}, rng), w = rand_t({2, 2, 3, 3, 3}, rng),
         b = rand_t({2}, rng);
    grad_case(out, "conv3d_raw", {x, w, b}, [=] { return hsf::conv3d_raw(x, w, b); });
  }
  {
    // bias keeps every pre-activation positive, so the relu inside conv3d
    // stays off its kink under the probe steps
    auto x = rand_t({1, 1, 2, 3, 3}, rng), w = rand_t({2, 1, 1, 3, 3}, rng);
    auto b = Tensor<double>::from({2}, {10.5, 11.0}, true);
    grad_case(out, "conv3d", {x, w, b}, [=] { return hsf::conv3d(x, w, b); });
  }
  {
    auto x = rand_t({2, 3, 4, 2, 2}, rng);
    grad_case(out, "max_pool_depth", {x}, [=] { return hsf::max_pool_depth(x, 2); });
  }
  {
    auto x = rand_t({2, 3, 4, 4}, rng);
    grad_case(out, "adaptive_avg_pool2d", {x}, [=] { return hsf::adaptive_avg_pool2d(x, 2); });
  }
  {
    auto x = rand_t({2, 3, 4, 4}, rng);
    grad_case(out, "adaptive_avg_pool2d_uneven", {x},
              [=] { return hsf::adaptive_avg_pool2d(x, 3); });
  }
  {
    auto x = rand_t({2, 3}, rng), w = rand_t({3, 4}, rng), b = rand_t({4}, rng);
    grad_case(out, "cross_entropy", {x, w, b}, [=] {
      return hsf::cross_entropy(hsf::softmax(hsf::linear(x, w, b), 1), {0, 2});
    });
  }
  {
    auto scores = rand_t({4, 2, 3, 3}, rng);
    std::vector<double> mv(2 * 3 * 3);
    for (size_t i = 0; i < mv.size(); ++i) mv[i] = (i % 3 == 0) ? -5.0 : 0.0;
    auto mask = Tensor<double>::from({2, 3, 3}, std::move(mv), false);
    grad_case(out, "add_window_mask", {scores},
              [=] { return hsf::add_window_mask(scores, mask); });
  }

  grad_model_case(out, BranchMode::sst_only, 7001);
  grad_model_case(out, BranchMode::swin_only, 7002);
  grad_model_case(out, BranchMode::fused, 7003);

  double wall = seconds_since(t0);
  detail = fmt("%d checks, max rel err %.2e, %.1fs", out.cases, out.worst, wall);
  if (out.failed) detail += fmt(", %d failed (first: %s)", out.failed, out.first_bad.c_str());
  return out.failed == 0 && wall < 60.0;
}

// ---------------------------------------------------------------------------
// 2. metrics against an exact rational brute force

struct RationalMetrics {
  double oa = 0, aa = 0, kappa = 0;
  std::vector<double> recall;
};

double rational_div(uint64_t num, uint64_t den) {
  // reduce first; both operands stay below 2^53 so each conversion is exact
  // and the division is the correctly rounded value of the fraction
  uint64_t g = std::gcd(num, den);
  if (g > 1) num /= g, den /= g;
  return static_cast<double>(num) / static_cast<double>(den);
}

RationalMetrics rational_oracle(const ConfusionMatrix& cm) {
  int n = cm.classes();
  std::vector<uint64_t> row(static_cast<size_t>(n), 0), col(static_cast<size_t>(n), 0);
  uint64_t total = 0, trace = 0;
  // prediction-major traversal, the transpose of the library's loop order
  for (int p = 0; p < n; ++p)
    for (int t = 0; t < n; ++t) {
      uint64_t c = cm.at(t, p);
      row[static_cast<size_t>(t)] += c;
      col[static_cast<size_t>(p)] += c;
      total += c;
      if (t == p) trace += c;
    }

  RationalMetrics out;
  out.recall.assign(static_cast<size_t>(n), std::nan(""));
  out.oa = total ? rational_div(trace, total) : 0.0;

  double recall_sum = 0.0;
  int present = 0;
  for (int t = 0; t < n; ++t) {
    if (row[static_cast<size_t>(t)] == 0) continue;
    double r = rational_div(cm.at(t, t), row[static_cast<size_t>(t)]);
    out.recall[static_cast<size_t>(t)] = r;
    recall_sum += r;
    present += 1;
  }
  out.aa = present ? recall_sum / present : 0.0;

  // kappa = (N*trace - sum_k row_k*col_k) / (N^2 - sum_k row_k*col_k),
  // accumulated high class first to differ from the library's order
  if (total == 0) return out;  // empty matrix pins kappa to zero
  __int128 cross = 0;
  for (int k = n - 1; k >= 0; --k)
    cross += static_cast<__int128>(row[static_cast<size_t>(k)]) *
             static_cast<__int128>(col[static_cast<size_t>(k)]);
  __int128 num = static_cast<__int128>(total) * static_cast<__int128>(trace) - cross;
  __int128 den = static_cast<__int128>(total) * static_cast<__int128>(total) - cross;
  if (den == 0) {
    out.kappa = trace == total ? 1.0 : 0.0;
    return out;
  }
  bool negative = num < 0;
  uint64_t unum = static_cast<uint64_t>(negative ? -num : num);
  uint64_t uden = static_cast<uint64_t>(den);
  out.kappa = rational_div(unum, uden) * (negative ? -1.0 : 1.0);
  return out;
}

bool same_value(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

bool check_metrics(std::string& detail) {
  Rng rng(424242);
  int mismatches = 0;
  const int trials = 1000;
  for (int iter = 0; iter < trials; ++iter) {
    int k = 1 + static_cast<int>(rng.below(12));
    ConfusionMatrix cm(k);
    if (rng.below(20) == 0) {
      int64_t t = static_cast<int64_t>(rng.below(static_cast<uint64_t>(k)));
      int64_t p = static_cast<int64_t>(rng.below(static_cast<uint64_t>(k)));
      cm.add(t, p, 1 + rng.below(4000));
    } else {
      for (int64_t t = 0; t < k; ++t) {
        if (rng.below(100) < 15) continue;  // absent class
        for (int64_t p = 0; p < k; ++p)
          if (rng.below(100) >= 40) cm.add(t, p, rng.below(4000));
      }
    }

    auto got_acc = hsf::oa_aa(cm);
    auto got_kappa = hsf::kappa(cm);
    auto want = rational_oracle(cm);
    bool ok = same_value(got_acc.overall, want.oa) && same_value(got_acc.average, want.aa) &&
              same_value(got_kappa.kappa, want.kappa);
    for (int t = 0; ok && t < k; ++t)
      ok = same_value(got_acc.per_class[static_cast<size_t>(t)],
                      want.recall[static_cast<size_t>(t)]);
    if (!ok) {
      mismatches += 1;
      if (mismatches == 1)
        std::fprintf(stderr,
                     "metrics mismatch at iter %d (k=%d): oa %.17g/%.17g aa %.17g/%.17g "
                     "kappa %.17g/%.17g\n",
                     iter, k, got_acc.overall, want.oa, got_acc.average, want.aa,
                     got_kappa.kappa, want.kappa);
    }
  }

  // worked two-class case: kappa is exactly 34/49
  ConfusionMatrix cm(2);
  cm.add(0, 0, 50);
  cm.add(0, 1, 10);
  cm.add(1, 0, 5);
  cm.add(1, 1, 35);
  double k2 = hsf::kappa(cm).kappa;
  bool worked = k2 == 34.0 / 49.0 && std::fabs(k2 - 0.693877551020408) < 1e-12 &&
                hsf::oa_aa(cm).overall == 0.85;

  detail = fmt("%d fuzzed matrices, %d mismatches, worked case kappa=%.9f", trials, mismatches,
               k2);
  return mismatches == 0 && worked;
}

// ---------------------------------------------------------------------------
// 3. split protocol fuzz

bool check_splits(std::string& detail) {
  Rng rng(990001);
  const int trials = 500;
  int valid = 0, injected = 0, detected = 0;
  for (int iter = 0; iter < trials; ++iter) {
    LabelRaster labels;
    labels.rows = 12 + static_cast<int64_t>(rng.below(29));
    labels.cols = 12 + static_cast<int64_t>(rng.below(29));
    labels.class_count = 2 + static_cast<int>(rng.below(5));
    labels.labels.assign(static_cast<size_t>(labels.rows * labels.cols), 0);
    for (auto& l : labels.labels)
      if (rng.below(100) >= 35)
        l = static_cast<uint16_t>(1 + rng.below(static_cast<uint64_t>(labels.class_count)));

    int64_t patch = 2 + static_cast<int64_t>(rng.below(9));
    patch = std::min(patch, std::min(labels.rows, labels.cols));

    double a = 0.05 + 0.40 * rng.next_double();
    double b = 0.05 + 0.40 * rng.next_double();
    std::array<double, 3> fractions = {a, b, 1.0 - a - b};

    auto split = hsf::make_disjoint_split(labels, patch, fractions, 1000 + iter);
    try {
      hsf::validate_split(split, labels, patch);
      valid += 1;
    } catch (const std::exception&) {
    }

    if (iter % 10 == 0 && !split.test.empty() && !split.train.empty()) {
      auto broken = split;
      broken.train.push_back(split.test[rng.below(split.test.size())]);
      injected += 1;
      try {
        hsf::validate_split(broken, labels, patch);
      } catch (const std::exception&) {
        detected += 1;
      }
    }
  }

  auto targets = hsf::role_targets(46, {0.13, 0.37, 0.50});
  bool counts_ok = targets == std::array<int64_t, 3>{6, 17, 23};

  detail = fmt("%d/%d splits valid, %d/%d injected overlaps caught, 46 @ 13/37/50 -> %lld/%lld/%lld",
               valid, trials, detected, injected, static_cast<long long>(targets[0]),
               static_cast<long long>(targets[1]), static_cast<long long>(targets[2]));
  return valid == trials && detected == injected && counts_ok;
}

// ---------------------------------------------------------------------------
// 4. window geometry roundtrips and patch counting

bool check_window_geometry(std::string& detail) {
  int64_t combos = 0, bad = 0;
  for (int64_t e0 = 1; e0 <= 8; ++e0)
    for (int64_t e1 = 1; e1 <= 8; ++e1)
      for (int64_t e2 = 1; e2 <= 8; ++e2) {
        std::vector<double> base(static_cast<size_t>(2 * e0 * e1 * e2 * 3));
        std::iota(base.begin(), base.end(), 0.0);
        auto x = Tensor<double>::from({2, e0, e1, e2, 3}, std::move(base));
        for (int64_t w = 1; w <= 4; ++w)
          for (bool shifted : {false, true}) {
            auto grid = hsf::make_grid({e0, e1, e2}, {w, w, w}, shifted);
            auto padded = hsf::pad_end(
                x, {0, grid.padded[0] - e0, grid.padded[1] - e1, grid.padded[2] - e2, 0});
            auto wnd = hsf::window_partition_3d(padded, grid);
            auto back = hsf::window_reverse_3d(wnd, grid, 2);
            bool ok = back.shape() == padded.shape() && back.data() == padded.data();
            if (ok) {
              auto cropped = hsf::crop_end(back, {2, e0, e1, e2, 3});
              ok = cropped.data() == x.data();
            }
            if (ok && grid.shifted()) {
              auto rolled = hsf::cyclic_shift(x, grid.shift, false);
              auto restored = hsf::cyclic_shift(rolled, grid.shift, true);
              ok = restored.data() == x.data();
            }
            combos += 1;
            if (!ok) bad += 1;
          }
      }

  int64_t centers = hsf::candidate_center_count(145, 145, 8);
  detail = fmt("%lld roundtrips, %lld broken, 145x145 @ patch 8 -> %lld centers",
               static_cast<long long>(combos), static_cast<long long>(bad),
               static_cast<long long>(centers));
  return bad == 0 && centers == 19044;
}

// ---------------------------------------------------------------------------
// 5. fusion against a scalar-loop oracle

bool check_fusion(std::string& detail) {
  Rng rng(5150);
  const int pairs = 100;
  const int64_t n = 2, t = 5, d = 7;
  int bad = 0;
  double worst = 0.0;
  for (int iter = 0; iter < pairs; ++iter) {
    std::vector<float> hl(static_cast<size_t>(n * t * d)), hp(hl.size());
    for (auto& x : hl) x = static_cast<float>(2.0 * rng.next_double() - 1.0);
    for (auto& x : hp) x = static_cast<float>(2.0 * rng.next_double() - 1.0);
    auto a = Tensor<float>::from({n, t, d}, std::vector<float>(hl));
    auto b = Tensor<float>::from({n, t, d}, std::vector<float>(hp));
    auto fused = hsf::attentional_fuse(a, b);

    double err = 0.0;
    const auto& fv = fused.fused.data();
    const auto& gv = fused.gate.data();
    for (size_t i = 0; i < hl.size(); ++i) {
      double gate = 1.0 / (1.0 + std::exp(-static_cast<double>(hl[i]) * hp[i]));
      size_t row = i / static_cast<size_t>(d), off = i % static_cast<size_t>(d);
      size_t fi = row * static_cast<size_t>(2 * d) + off;
      err = std::max(err, std::fabs(static_cast<double>(gv[i]) - gate));
      err = std::max(err, std::fabs(static_cast<double>(fv[fi]) - hl[i]));
      err = std::max(err,
                     std::fabs(static_cast<double>(fv[fi + static_cast<size_t>(d)]) - gate * hp[i]));
    }
    worst = std::max(worst, err);
    if (err > 1e-6) bad += 1;
  }

  auto z = Tensor<float>::zeros({2, 3, 4});
  auto zero_fused = hsf::attentional_fuse(z, z);
  bool half = true;
  for (float g : zero_fused.gate.data()) half = half && g == 0.5f;

  detail = fmt("%d pairs, worst abs err %.2e, zero-input gate %s", pairs, worst,
               half ? "exactly 0.5" : "NOT 0.5");
  return bad == 0 && half;
}

// ---------------------------------------------------------------------------
// shared synthetic-scene training harness

struct TrainedRun {
  double test_oa = 0;
  double wall = 0;
  int64_t train_count = 0;
};

TrainedRun run_training(const HsiCube& cube, const LabelRaster& labels, const ModelConfig& mc,
                        const TrainConfig& cfg) {
  auto t0 = Clock::now();
  auto split = hsf::make_disjoint_split(labels, cfg.patch_size, cfg.fractions, cfg.seed);
  auto set = hsf::extract_patches(cube, labels, cfg.patch_size);
  FusionModel<float> model(mc, cfg.patch_size, cube.bands, labels.class_count, cfg.seed);
  hsf::Adam opt(cfg.learning_rate, cfg.decay);
  hsf::train(model, opt, set, split, cfg, nullptr);
  auto cm = hsf::evaluate(model, set, split.test, cfg.batch_size);
  TrainedRun run;
  run.test_oa = hsf::oa_aa(cm).overall;
  run.wall = seconds_since(t0);
  run.train_count = static_cast<int64_t>(split.train.size());
  return run;
}

// 6. headline accuracy at stock settings

bool check_headline_accuracy(std::string& detail) {
  hsf::SynthConfig sc;
  sc.rows = 32;
  sc.cols = 32;
  sc.bands = 16;
  sc.classes = 3;
  sc.seed = 7;
  auto scene = hsf::synth_cube(sc);
  auto cube = hsf::normalize_bands(scene.first);

  TrainConfig cfg;  // stock: batch 56, lr 1e-4, decay 1e-6, patch 8, 5/45/50
  cfg.epochs = 30;
  auto mc = hsf::adapt_model_config(hsf::default_model_config(), cfg.patch_size);

  auto run = run_training(cube, scene.second, mc, cfg);
  detail = fmt("test OA %.4f after 30 epochs (%lld train samples), %.0fs", run.test_oa,
               static_cast<long long>(run.train_count), run.wall);
  return run.test_oa >= 0.95 && run.wall < 600.0;
}

// ---------------------------------------------------------------------------
// 7. fused branch versus each branch alone

ModelConfig compact_config(BranchMode mode) {
  ModelConfig cfg;
  cfg.embed_dim = 8;
  cfg.stage_depths = {2, 1};
  cfg.stage_heads = {2, 4};
  cfg.window = {2, 2, 2};
  cfg.merge_stages = {1};
  cfg.mlp_ratio = 2;
  cfg.stem_kernel = {3, 3, 3};
  cfg.token_count = 16;
  cfg.token_dim = 8;
  cfg.sst_layers = 2;
  cfg.sst_heads = 2;
  cfg.fused_dim = 8;
  cfg.mode = mode;
  return cfg;
}

bool check_fusion_benefit(std::string& detail) {
  hsf::SynthConfig sc;  // regions give spatial structure, gains give spectra
  sc.rows = 24;
  sc.cols = 24;
  sc.bands = 12;
  sc.classes = 3;
  sc.seed = 11;
  auto scene = hsf::synth_cube(sc);
  auto cube = hsf::normalize_bands(scene.first);

  TrainConfig cfg;
  cfg.patch_size = 4;
  cfg.fractions = {0.10, 0.40, 0.50};
  cfg.learning_rate = 1e-2;
  cfg.epochs = 25;
  cfg.seed = 5;

  double oa_fused = run_training(cube, scene.second, compact_config(BranchMode::fused), cfg).test_oa;
  double oa_sst = run_training(cube, scene.second, compact_config(BranchMode::sst_only), cfg).test_oa;
  double oa_swin =
      run_training(cube, scene.second, compact_config(BranchMode::swin_only), cfg).test_oa;

  detail = fmt("test OA fused %.4f, token branch %.4f, windowed branch %.4f", oa_fused, oa_sst,
               oa_swin);
  return oa_fused >= std::max(oa_sst, oa_swin) - 0.01;
}

// ---------------------------------------------------------------------------
// 8. overfit a 20-sample fixture

bool check_overfit(std::string& detail) {
  hsf::SynthConfig sc;
  sc.rows = 16;
  sc.cols = 16;
  sc.bands = 4;
  sc.classes = 2;
  sc.seed = 91;
  auto scene = hsf::synth_cube(sc);
  auto cube = hsf::normalize_bands(scene.first);

  auto split = hsf::make_disjoint_split(scene.second, 2, {0.3, 0.3, 0.4}, 11);
  auto set = hsf::extract_patches(cube, scene.second, 2);
  if (split.train.size() < 20) {
    detail = fmt("fixture too small: %zu train pixels", split.train.size());
    return false;
  }
  std::vector<int64_t> centers(split.train.begin(), split.train.begin() + 20);
  auto batch = hsf::materialize_batch<float>(set, centers);

  ModelConfig mc = compact_config(BranchMode::fused);
  mc.token_count = 4;  // a 2x2 patch only pools to a 2x2 token grid
  FusionModel<float> model(mc, 2, cube.bands, scene.second.class_count, 33);
  hsf::Adam opt(1e-2, 1e-6);

  int steps = 0, correct = 0;
  while (steps < 200) {
    model.params().zero_grads();
    auto fwd = model.forward(batch.input, true);
    auto loss = hsf::cross_entropy(fwd.probs, batch.labels);
    loss.backward();
    opt.step(model.params());
    steps += 1;

    hsf::NoGradGuard guard;
    auto probs = model.forward(batch.input, false).probs;
    correct = 0;
    for (size_t i = 0; i < batch.labels.size(); ++i) {
      const float* row = probs.data().data() + i * 2;
      int64_t arg = row[1] > row[0] ? 1 : 0;
      if (arg == batch.labels[i]) correct += 1;
    }
    if (correct == 20) break;
  }

  detail = fmt("%d/20 correct after %d steps", correct, steps);
  return correct == 20 && steps <= 200;
}

// ---------------------------------------------------------------------------
// 9. bitwise determinism of seeded runs

struct SeededArtifacts {
  std::string log;
  std::string checkpoint_bytes;
};

SeededArtifacts run_seeded(const HsiCube& cube, const LabelRaster& labels,
                           const std::string& name) {
  TrainConfig cfg;
  cfg.patch_size = 2;
  cfg.fractions = {0.3, 0.3, 0.4};
  cfg.learning_rate = 1e-3;
  cfg.epochs = 3;
  cfg.seed = 9;
  cfg.deterministic = true;

  auto split = hsf::make_disjoint_split(labels, cfg.patch_size, cfg.fractions, cfg.seed);
  auto set = hsf::extract_patches(cube, labels, cfg.patch_size);
  ModelConfig mc = compact_config(BranchMode::fused);
  mc.token_count = 4;
  FusionModel<float> model(mc, cfg.patch_size, cube.bands, labels.class_count, cfg.seed);
  hsf::Adam opt(cfg.learning_rate, cfg.decay);
  auto outcome = hsf::train(model, opt, set, split, cfg, nullptr);

  auto path = std::filesystem::temp_directory_path() / name;
  hsf::save_checkpoint(path.string(), hsf::build_checkpoint(model, opt, cfg, outcome));
  std::ifstream in(path, std::ios::binary);
  SeededArtifacts art;
  art.checkpoint_bytes.assign(std::istreambuf_iterator<char>(in),
                              std::istreambuf_iterator<char>());
  std::filesystem::remove(path);
  for (const auto& record : outcome.log) art.log += hsf::format_epoch(record) + "\n";
  return art;
}

bool check_determinism(std::string& detail) {
  hsf::SynthConfig sc;
  sc.rows = 16;
  sc.cols = 16;
  sc.bands = 4;
  sc.classes = 2;
  sc.seed = 91;
  auto scene = hsf::synth_cube(sc);
  auto cube = hsf::normalize_bands(scene.first);

  auto first = run_seeded(cube, scene.second, "hsf_gate_run_a.ckpt");
  auto second = run_seeded(cube, scene.second, "hsf_gate_run_b.ckpt");

  bool logs_equal = first.log == second.log;
  bool bytes_equal = first.checkpoint_bytes == second.checkpoint_bytes;
  detail = fmt("logs %s, checkpoints %s (%zu bytes)", logs_equal ? "identical" : "DIFFER",
               bytes_equal ? "identical" : "DIFFER", first.checkpoint_bytes.size());
  return logs_equal && bytes_equal;
}

// ---------------------------------------------------------------------------
// 10. sweep tables carry the stock tick values

bool check_sweep_axes(std::string& detail) {
  hsf::SynthConfig sc;
  sc.rows = 20;
  sc.cols = 20;
  sc.bands = 8;
  sc.classes = 3;
  sc.seed = 17;
  auto scene = hsf::synth_cube(sc);
  auto cube = hsf::normalize_bands(scene.first);

  ModelConfig mc = hsf::default_model_config();
  mc.embed_dim = 8;
  mc.stage_heads = {2, 2, 2};
  mc.token_dim = 8;
  mc.fused_dim = 8;
  mc.sst_layers = 1;
  mc.mlp_ratio = 2;

  TrainConfig cfg;
  cfg.fractions = {0.10, 0.40, 0.50};
  cfg.learning_rate = 1e-3;
  cfg.epochs = 1;
  cfg.seed = 13;

  auto check_axis = [&](hsf::SweepAxis axis, const std::vector<double>& want,
                        std::vector<double>& got) {
    auto values = hsf::default_sweep_values(axis);
    auto table = hsf::sweep(axis, values, cube, scene.second, mc, cfg, nullptr);
    got.clear();
    for (const auto& row : table.rows) got.push_back(row.value);
    auto text = hsf::format_sweep(table);
    size_t lines = static_cast<size_t>(std::count(text.begin(), text.end(), '\n'));
    return got == want && lines == want.size() + 1 &&
           text.find(hsf::sweep_axis_name(axis)) != std::string::npos;
  };

  std::vector<double> patch_got, heads_got;
  bool patch_ok = check_axis(hsf::SweepAxis::patch, {2, 4, 6, 8, 10}, patch_got);
  bool heads_ok = check_axis(hsf::SweepAxis::heads, {2, 4, 6, 8, 10, 12}, heads_got);

  auto join = [](const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += fmt("%g ", x);
    if (!s.empty()) s.pop_back();
    return s;
  };
  detail = fmt("patch ticks {%s}, head ticks {%s}", join(patch_got).c_str(),
               join(heads_got).c_str());
  return patch_ok && heads_ok;
}

struct GateCheck {
  const char* label;
  bool (*run)(std::string&);
};

}  // namespace

int main(int argc, char** argv) {
  const GateCheck checks[] = {
      {"gradient suite", check_gradients},
      {"metrics vs rational brute force", check_metrics},
      {"split protocol fuzz", check_splits},
      {"window geometry", check_window_geometry},
      {"fusion oracle", check_fusion},
      {"headline accuracy", check_headline_accuracy},
      {"fusion benefit", check_fusion_benefit},
      {"overfit fixture", check_overfit},
      {"seeded determinism", check_determinism},
      {"sweep axes", check_sweep_axes},
  };

  // optional arguments select a subset by 1-based index
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0, ran = 0, index = 0;
  auto t0 = Clock::now();
  for (const auto& check : checks) {
    index += 1;
    if (!selected.empty() && !selected.count(index)) continue;
    ran += 1;
    std::string detail;
    bool ok = false;
    try {
      ok = check.run(detail);
    } catch (const std::exception& e) {
      detail = fmt("exception: %s", e.what());
    }
    if (!ok) failures += 1;
    std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", index, check.label, detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d checks passed in %.0fs\n", ran - failures, ran, seconds_since(t0));
  return failures ? 1 : 0;
}
