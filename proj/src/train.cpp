#include "hsf/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace hsf {

void Adam::step(ParamStore<float>& params) {
  double lr_t = current_rate();
  double t = static_cast<double>(steps_ + 1);
  double bc1 = 1.0 - std::pow(0.9, t);
  double bc2 = 1.0 - std::pow(0.999, t);
  for (const auto& name : params.names()) {
    Tensor<float>& p = params.get(name);
    const std::vector<float>& g = p.grad();
    Slot& slot = slots_[name];
    if (slot.m.empty()) {
      slot.m.assign(g.size(), 0.0f);
      slot.v.assign(g.size(), 0.0f);
    }
    std::vector<float>& value = p.data();
    for (size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw std::runtime_error("adam_step: non-finite gradient in " + name);
      double gd = g[i];
      double m = 0.9 * slot.m[i] + 0.1 * gd;
      double v = 0.999 * slot.v[i] + 0.001 * gd * gd;
      slot.m[i] = static_cast<float>(m);
      slot.v[i] = static_cast<float>(v);
      double update = lr_t * (m / bc1) / (std::sqrt(v / bc2) + 1e-8);
      value[i] = static_cast<float>(value[i] - update);
    }
  }
  steps_ += 1;
}

namespace {

void accumulate_predictions(FusionModel<float>& model, const PatchSet& set,
                            const std::vector<int64_t>& role_pixels, int64_t batch_size,
                            std::vector<int64_t>* preds, ConfusionMatrix* cm) {
  if (role_pixels.empty()) throw std::invalid_argument("evaluate: empty role");
  NoGradGuard no_grad;
  for (size_t start = 0; start < role_pixels.size(); start += static_cast<size_t>(batch_size)) {
    size_t take = std::min(static_cast<size_t>(batch_size), role_pixels.size() - start);
    std::vector<int64_t> centers(role_pixels.begin() + static_cast<int64_t>(start),
                                 role_pixels.begin() + static_cast<int64_t>(start + take));
    auto batch = materialize_batch<float>(set, centers);
    auto out = model.forward(batch.input, false);
    const auto& probs = out.probs.data();
    int64_t classes = out.probs.shape()[1];
    for (size_t i = 0; i < take; ++i) {
      int64_t arg = 0;
      for (int64_t c = 1; c < classes; ++c)
        if (probs[i * static_cast<size_t>(classes) + static_cast<size_t>(c)] >
            probs[i * static_cast<size_t>(classes) + static_cast<size_t>(arg)])
          arg = c;
      if (preds) preds->push_back(arg);
      if (cm) cm->add(batch.labels[i], arg);
    }
  }
}

std::map<std::string, std::vector<float>> snapshot_state(FusionModel<float>& model) {
  std::map<std::string, std::vector<float>> state;
  auto& store = model.params();
  for (const auto& name : store.names()) state["param/" + name] = store.get(name).data();
  for (const auto& name : store.buffer_names())
    state["buffer/" + name] = store.get_buffer(name).data();
  return state;
}

}  // namespace

ConfusionMatrix evaluate(FusionModel<float>& model, const PatchSet& set,
                         const std::vector<int64_t>& role_pixels, int64_t batch_size) {
  ConfusionMatrix cm(static_cast<int>(model.classes()));
  accumulate_predictions(model, set, role_pixels, batch_size, nullptr, &cm);
  return cm;
}

std::vector<int64_t> predict(FusionModel<float>& model, const PatchSet& set,
                             const std::vector<int64_t>& role_pixels, int64_t batch_size) {
  std::vector<int64_t> preds;
  preds.reserve(role_pixels.size());
  accumulate_predictions(model, set, role_pixels, batch_size, &preds, nullptr);
  return preds;
}

std::string format_epoch(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "epoch=%lld loss=%.6f val_oa=%.6f val_aa=%.6f val_kappa=%.6f wall_seconds=%.3f",
                static_cast<long long>(r.epoch), r.loss, r.val_oa, r.val_aa, r.val_kappa,
                r.wall_seconds);
  return buf;
}

void apply_state(FusionModel<float>& model,
                 const std::map<std::string, std::vector<float>>& state) {
  auto& store = model.params();
  for (const auto& [key, values] : state) {
    Tensor<float>* dst = nullptr;
    if (key.rfind("param/", 0) == 0) dst = &store.get(key.substr(6));
    else if (key.rfind("buffer/", 0) == 0) dst = &store.get_buffer(key.substr(7));
    else throw std::invalid_argument("apply_state: unrecognized key " + key);
    if (dst->data().size() != values.size())
      throw std::invalid_argument("apply_state: size mismatch for " + key);
    dst->data() = values;
  }
}

TrainOutcome train(FusionModel<float>& model, Adam& opt, const PatchSet& set,
                   const SplitAssignment& split, const TrainConfig& cfg, std::ostream* log,
                   int64_t start_epoch, const uint64_t* rng_state) {
  if (split.train.empty()) throw std::invalid_argument("train: empty training role");
  if (split.val.empty()) throw std::invalid_argument("train: empty validation role");
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");

  Rng rng(cfg.seed);
  if (rng_state) rng.set_state(*rng_state);

  TrainOutcome outcome;
  // Last-good snapshot for the non-finite-loss bailout.
  auto good_state = snapshot_state(model);
  auto good_slots = opt.slots();
  int64_t good_steps = opt.steps();
  uint64_t good_rng = rng.state();

  for (int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    BatchIterator batches(set, split.train, cfg.batch_size, rng, true);
    double loss_sum = 0;
    int64_t sample_count = 0;
    std::vector<int64_t> centers;
    bool bad = false;
    while (batches.next(centers)) {
      auto batch = materialize_batch<float>(set, centers);
      auto out = model.forward(batch.input, true);
      auto loss = cross_entropy(out.probs, batch.labels);
      double l = loss.item();
      if (!std::isfinite(l)) {
        bad = true;
        break;
      }
      loss_sum += l * static_cast<double>(centers.size());
      sample_count += static_cast<int64_t>(centers.size());
      model.params().zero_grads();
      loss.backward();
      opt.step(model.params());
    }
    if (bad) {
      apply_state(model, good_state);
      opt.restore(good_steps, good_slots);
      rng.set_state(good_rng);
      outcome.aborted = true;
      if (log) (*log) << "aborted: non-finite loss at epoch " << epoch
                      << "; restored last good state\n";
      break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(sample_count);
    auto cm = evaluate(model, set, split.val, cfg.batch_size);
    auto acc = oa_aa(cm);
    rec.val_oa = acc.overall;
    rec.val_aa = acc.average;
    rec.val_kappa = kappa(cm).kappa;
    auto t1 = std::chrono::steady_clock::now();
    rec.wall_seconds =
        cfg.deterministic ? 0.0 : std::chrono::duration<double>(t1 - t0).count();
    outcome.log.push_back(rec);
    if (log) (*log) << format_epoch(rec) << "\n";

    if (rec.val_kappa > outcome.best_kappa) {
      outcome.best_kappa = rec.val_kappa;
      outcome.best_epoch = epoch;
      outcome.best_state = snapshot_state(model);
    }
    good_state = snapshot_state(model);
    good_slots = opt.slots();
    good_steps = opt.steps();
    good_rng = rng.state();
    outcome.epochs_done = epoch + 1;
  }
  outcome.rng_state_end = rng.state();
  return outcome;
}

namespace {

std::string ints_csv(const std::vector<int64_t>& v) {
  std::ostringstream os;
  for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<int64_t> csv_ints(const std::string& s) {
  std::vector<int64_t> out;
  std::istringstream is(s);
  std::string part;
  while (std::getline(is, part, ','))
    if (!part.empty()) out.push_back(std::stoll(part));
  return out;
}

std::string u64_hex(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string dbl_str(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

CheckpointFile build_checkpoint(FusionModel<float>& model, const Adam& opt,
                                const TrainConfig& cfg, const TrainOutcome& outcome) {
  CheckpointFile file;
  const ModelConfig& mc = model.config();
  file.set("format", "1");
  file.set("mode", branch_mode_name(mc.mode));
  file.set("embed_dim", std::to_string(mc.embed_dim));
  file.set("stage_depths", ints_csv(mc.stage_depths));
  file.set("stage_heads", ints_csv(mc.stage_heads));
  file.set("window", ints_csv({mc.window[0], mc.window[1], mc.window[2]}));
  file.set("merge_stages", ints_csv(mc.merge_stages));
  file.set("mlp_ratio", std::to_string(mc.mlp_ratio));
  file.set("stem_kernel", ints_csv({mc.stem_kernel[0], mc.stem_kernel[1], mc.stem_kernel[2]}));
  file.set("token_count", std::to_string(mc.token_count));
  file.set("token_dim", std::to_string(mc.token_dim));
  file.set("sst_layers", std::to_string(mc.sst_layers));
  file.set("sst_heads", std::to_string(mc.sst_heads));
  file.set("fused_dim", std::to_string(mc.fused_dim));
  file.set("patch", std::to_string(model.patch()));
  file.set("bands", std::to_string(model.bands()));
  file.set("classes", std::to_string(model.classes()));
  file.set("batch_size", std::to_string(cfg.batch_size));
  file.set("learning_rate", dbl_str(cfg.learning_rate));
  file.set("decay", dbl_str(cfg.decay));
  file.set("epochs", std::to_string(cfg.epochs));
  file.set("patch_size", std::to_string(cfg.patch_size));
  file.set("fractions",
           dbl_str(cfg.fractions[0]) + "," + dbl_str(cfg.fractions[1]) + "," +
               dbl_str(cfg.fractions[2]));
  file.set("seed", std::to_string(cfg.seed));
  file.set("epochs_done", std::to_string(outcome.epochs_done));
  file.set("adam_steps", std::to_string(opt.steps()));
  file.set("rng_state", u64_hex(outcome.rng_state_end));
  file.set("best_epoch", std::to_string(outcome.best_epoch));
  file.set("best_kappa", dbl_str(outcome.best_kappa));

  auto& store = model.params();
  for (const auto& name : store.names()) {
    Tensor<float>& p = store.get(name);
    file.blocks.push_back({"param/" + name, p.shape(), p.data()});
  }
  for (const auto& name : store.buffer_names()) {
    Tensor<float>& b = store.get_buffer(name);
    file.blocks.push_back({"buffer/" + name, b.shape(), b.data()});
  }
  for (const auto& name : store.names()) {
    auto it = opt.slots().find(name);
    Tensor<float>& p = store.get(name);
    if (it == opt.slots().end()) {
      std::vector<float> zero(p.data().size(), 0.0f);
      file.blocks.push_back({"adam/m/" + name, p.shape(), zero});
      file.blocks.push_back({"adam/v/" + name, p.shape(), std::move(zero)});
    } else {
      file.blocks.push_back({"adam/m/" + name, p.shape(), it->second.m});
      file.blocks.push_back({"adam/v/" + name, p.shape(), it->second.v});
    }
  }
  for (const auto& [key, values] : outcome.best_state) {
    const CheckpointBlock& live = file.need_block(key);
    file.blocks.push_back({"best/" + key, live.shape, values});
  }
  return file;
}

TrainConfig train_config_from_checkpoint(const CheckpointFile& file) {
  TrainConfig cfg;
  cfg.batch_size = std::stoll(file.need_header("batch_size"));
  cfg.learning_rate = std::stod(file.need_header("learning_rate"));
  cfg.decay = std::stod(file.need_header("decay"));
  cfg.epochs = std::stoll(file.need_header("epochs"));
  cfg.patch_size = std::stoll(file.need_header("patch_size"));
  auto f = file.need_header("fractions");
  std::istringstream fs(f);
  std::string part;
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(fs, part, ','))
      throw std::runtime_error("checkpoint: fractions header needs three values");
    cfg.fractions[static_cast<size_t>(i)] = std::stod(part);
  }
  cfg.seed = std::stoull(file.need_header("seed"));
  return cfg;
}

FusionModel<float> model_from_checkpoint(const CheckpointFile& file) {
  ModelConfig mc;
  std::string mode = file.need_header("mode");
  if (mode == "fused") mc.mode = BranchMode::fused;
  else if (mode == "sst_only") mc.mode = BranchMode::sst_only;
  else if (mode == "swin_only") mc.mode = BranchMode::swin_only;
  else throw std::runtime_error("checkpoint: unknown mode " + mode);
  mc.embed_dim = std::stoll(file.need_header("embed_dim"));
  mc.stage_depths = csv_ints(file.need_header("stage_depths"));
  mc.stage_heads = csv_ints(file.need_header("stage_heads"));
  auto win = csv_ints(file.need_header("window"));
  auto kern = csv_ints(file.need_header("stem_kernel"));
  if (win.size() != 3 || kern.size() != 3)
    throw std::runtime_error("checkpoint: window and stem_kernel need three extents");
  mc.window = {win[0], win[1], win[2]};
  mc.stem_kernel = {kern[0], kern[1], kern[2]};
  mc.merge_stages = csv_ints(file.need_header("merge_stages"));
  mc.mlp_ratio = std::stoll(file.need_header("mlp_ratio"));
  mc.token_count = std::stoll(file.need_header("token_count"));
  mc.token_dim = std::stoll(file.need_header("token_dim"));
  mc.sst_layers = std::stoll(file.need_header("sst_layers"));
  mc.sst_heads = std::stoll(file.need_header("sst_heads"));
  mc.fused_dim = std::stoll(file.need_header("fused_dim"));
  int64_t patch = std::stoll(file.need_header("patch"));
  int64_t bands = std::stoll(file.need_header("bands"));
  int64_t classes = std::stoll(file.need_header("classes"));
  // Seed irrelevant: every tensor is overwritten right below.
  FusionModel<float> model(mc, patch, bands, classes, 0);
  restore_model_state(model, file, false);
  return model;
}

void restore_model_state(FusionModel<float>& model, const CheckpointFile& file, bool best) {
  auto& store = model.params();
  std::string prefix = best ? "best/" : "";
  auto copy = [&](const std::string& key, Tensor<float>& dst) {
    const CheckpointBlock& b = file.need_block(prefix + key);
    if (b.shape != dst.shape())
      throw std::runtime_error("checkpoint: block " + b.name + " shape " + shape_str(b.shape) +
                               " does not match model shape " + shape_str(dst.shape()));
    dst.data() = b.data;
  };
  for (const auto& name : store.names()) copy("param/" + name, store.get(name));
  for (const auto& name : store.buffer_names()) copy("buffer/" + name, store.get_buffer(name));
}

void restore_adam(Adam& opt, const CheckpointFile& file) {
  std::map<std::string, Adam::Slot> slots;
  for (const auto& b : file.blocks) {
    if (b.name.rfind("adam/m/", 0) == 0) slots[b.name.substr(7)].m = b.data;
    else if (b.name.rfind("adam/v/", 0) == 0) slots[b.name.substr(7)].v = b.data;
  }
  opt.restore(std::stoll(file.need_header("adam_steps")), std::move(slots));
}

}  // namespace hsf
