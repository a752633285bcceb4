#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "hsf/checkpoint.hpp"
#include "hsf/metrics.hpp"
#include "hsf/model.hpp"
#include "hsf/patches.hpp"
#include "hsf/split.hpp"

namespace hsf {

struct TrainConfig {
  int64_t batch_size = 56;
  double learning_rate = 1e-4;
  double decay = 1e-6;  // per-step multiplicative learning-rate decay
  int64_t epochs = 50;
  int64_t patch_size = 8;
  std::array<double, 3> fractions = {0.05, 0.45, 0.50};
  uint64_t seed = 0;
  bool deterministic = false;  // zero wall-clock fields so logs compare bytewise
};

// Bias-corrected Adam with a 1/(1 + decay*step) learning-rate schedule; the
// schedule reads the step count before it increments, so the first update
// applies the base rate.
class Adam {
 public:
  Adam(double learning_rate, double decay)
      : lr_(learning_rate), decay_(decay) {
    if (learning_rate <= 0 || decay < 0)
      throw std::invalid_argument("Adam: rates must be positive");
  }

  // One update from the gradients currently stored on the parameters.
  // Throws on NaN gradients, naming the parameter.
  void step(ParamStore<float>& params);

  double current_rate() const { return lr_ / (1.0 + decay_ * static_cast<double>(steps_)); }
  int64_t steps() const { return steps_; }

  // checkpoint plumbing
  struct Slot {
    std::vector<float> m, v;
  };
  const std::map<std::string, Slot>& slots() const { return slots_; }
  void restore(int64_t steps, std::map<std::string, Slot> slots) {
    steps_ = steps;
    slots_ = std::move(slots);
  }
  double learning_rate() const { return lr_; }
  double decay() const { return decay_; }

 private:
  double lr_, decay_;
  int64_t steps_ = 0;
  std::map<std::string, Slot> slots_;
};

struct EpochRecord {
  int64_t epoch = 0;
  double loss = 0;
  double val_oa = 0, val_aa = 0, val_kappa = 0;
  double wall_seconds = 0;
};

std::string format_epoch(const EpochRecord& r);

struct TrainOutcome {
  std::vector<EpochRecord> log;
  int64_t best_epoch = -1;
  double best_kappa = -2.0;
  bool aborted = false;  // loss went non-finite; state restored to last good epoch
  // Snapshot (params and buffers, keys "param/..."/"buffer/...") at the best
  // validation-kappa epoch.
  std::map<std::string, std::vector<float>> best_state;
  uint64_t rng_state_end = 0;
  int64_t epochs_done = 0;
};

// Deterministic forward over one role; parameters and batch-norm statistics
// stay frozen.
ConfusionMatrix evaluate(FusionModel<float>& model, const PatchSet& set,
                         const std::vector<int64_t>& role_pixels, int64_t batch_size);

// Per-sample predictions in role order (0-based class ids), for map emission.
std::vector<int64_t> predict(FusionModel<float>& model, const PatchSet& set,
                             const std::vector<int64_t>& role_pixels, int64_t batch_size);

// Epoch loop: shuffled mini-batches, cross-entropy on the fused softmax
// output, Adam updates, validation metrics per epoch. `start_epoch` and
// `rng_state` support resuming; pass 0/nullptr for a fresh run.
TrainOutcome train(FusionModel<float>& model, Adam& opt, const PatchSet& set,
                   const SplitAssignment& split, const TrainConfig& cfg, std::ostream* log,
                   int64_t start_epoch = 0, const uint64_t* rng_state = nullptr);

// Current model/optimizer/RNG state as a self-describing checkpoint. The
// config snapshot lets model_from_checkpoint rebuild the exact architecture.
CheckpointFile build_checkpoint(FusionModel<float>& model, const Adam& opt,
                                const TrainConfig& cfg, const TrainOutcome& outcome);

FusionModel<float> model_from_checkpoint(const CheckpointFile& file);
TrainConfig train_config_from_checkpoint(const CheckpointFile& file);
void restore_model_state(FusionModel<float>& model, const CheckpointFile& file,
                         bool best = false);
void restore_adam(Adam& opt, const CheckpointFile& file);

// Copies a best_state snapshot back onto the live model.
void apply_state(FusionModel<float>& model,
                 const std::map<std::string, std::vector<float>>& state);

}  // namespace hsf
