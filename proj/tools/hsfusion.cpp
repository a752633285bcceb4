// Command-line front end: scene synthesis, split management, training,
// evaluation, classification maps, parameter sweeps, and a gradient
// self-check. Every subcommand exits nonzero on failure with a one-line
// diagnostic on stderr.

#include <CLI11.hpp>

#include <array>
#include <cstdint>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "hsf/checkpoint.hpp"
#include "hsf/gradcheck.hpp"
#include "hsf/metrics.hpp"
#include "hsf/model.hpp"
#include "hsf/split.hpp"
#include "hsf/sweep.hpp"
#include "hsf/synth.hpp"
#include "hsf/train.hpp"

namespace {

hsf::BranchMode parse_mode(const std::string& s) {
  if (s == "fused") return hsf::BranchMode::fused;
  if (s == "sst" || s == "sst_only") return hsf::BranchMode::sst_only;
  if (s == "swin" || s == "swin_only") return hsf::BranchMode::swin_only;
  throw CLI::ValidationError("--mode", "expected fused, sst, or swin");
}

hsf::Role parse_role(const std::string& s) {
  if (s == "train") return hsf::Role::train;
  if (s == "val") return hsf::Role::val;
  if (s == "test") return hsf::Role::test;
  throw CLI::ValidationError("--role", "expected train, val, or test");
}

std::array<double, 3> to_fractions(const std::vector<double>& v) {
  if (v.size() != 3)
    throw CLI::ValidationError("--fractions", "expected three comma-separated values");
  return {v[0], v[1], v[2]};
}

std::vector<std::string> class_name_list(const hsf::LabelRaster& labels) {
  if (!labels.class_names.empty()) return labels.class_names;
  std::vector<std::string> names;
  for (int c = 1; c <= labels.class_count; ++c)
    names.push_back("class_" + std::to_string(c));
  return names;
}

// Shared knobs for commands that construct a model from flags.
struct ModelFlags {
  std::string preset = "default";
  std::string mode = "fused";
  int64_t embed_dim = -1;
  int64_t tokens = -1;
  int64_t heads = -1;
  int64_t sst_layers = -1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "architecture preset: default, six-stage, literal-stem")
        ->check(CLI::IsMember({"default", "six-stage", "literal-stem"}));
    cmd->add_option("--mode", mode, "branch selection: fused, sst, swin");
    cmd->add_option("--embed-dim", embed_dim, "stem channel width");
    cmd->add_option("--tokens", tokens, "token count for the attention branch (square number)");
    cmd->add_option("--heads", heads, "attention heads in the token branch");
    cmd->add_option("--sst-layers", sst_layers, "encoder depth of the token branch");
  }

  hsf::ModelConfig build(int64_t patch, int64_t bands) const {
    hsf::ModelConfig mc;
    if (preset == "six-stage") mc = hsf::six_stage_model_config();
    else if (preset == "literal-stem") mc = hsf::literal_stem_model_config(bands);
    else mc = hsf::default_model_config();
    mc = hsf::adapt_model_config(mc, patch);
    if (embed_dim > 0) mc.embed_dim = embed_dim;
    if (tokens > 0) mc.token_count = tokens;
    if (heads > 0) mc.sst_heads = heads;
    if (sst_layers > 0) mc.sst_layers = sst_layers;
    mc.mode = parse_mode(mode);
    return mc;
  }
};

struct LoadedScene {
  hsf::HsiCube cube;
  hsf::LabelRaster labels;
};

LoadedScene load_scene(const std::string& path, bool normalize) {
  auto [cube, labels] = hsf::load_cube(path);
  if (normalize) cube = hsf::normalize_bands(cube);
  return {std::move(cube), std::move(labels)};
}

// The split either comes from a file or derives deterministically from the
// given parameters; both routes are revalidated before use. The caller must
// adopt the returned split's seed and fractions wherever it records them so a
// later run can re-derive the identical split.
hsf::SplitAssignment resolve_split(const std::string& split_path,
                                   const hsf::LabelRaster& labels, int64_t patch,
                                   const std::array<double, 3>& fractions, uint64_t seed) {
  hsf::SplitAssignment split;
  if (!split_path.empty()) split = hsf::load_split(split_path);
  else split = hsf::make_disjoint_split(labels, patch, fractions, seed);
  hsf::validate_split(split, labels, patch);
  return split;
}

int cmd_synth(const hsf::SynthConfig& sc, const std::string& out) {
  auto [cube, labels] = hsf::synth_cube(sc);
  hsf::save_cube(out, cube, labels);
  int64_t labeled = 0;
  for (auto v : labels.labels) labeled += v != 0;
  std::cout << "wrote " << out << ": " << cube.rows << "x" << cube.cols << "x" << cube.bands
            << ", " << labels.class_count << " classes, " << labeled << " labeled pixels\n";
  return 0;
}

int cmd_split(const std::string& cube_path, const std::string& out, int64_t patch,
              const std::array<double, 3>& fractions, uint64_t seed) {
  auto scene = load_scene(cube_path, false);
  auto split = hsf::make_disjoint_split(scene.labels, patch, fractions, seed);
  hsf::validate_split(split, scene.labels, patch);
  hsf::save_split(out, split);
  std::cout << "wrote " << out << ": train=" << split.train.size()
            << " val=" << split.val.size() << " test=" << split.test.size() << "\n";
  return 0;
}

int cmd_train(const std::string& cube_path, const std::string& split_path,
              const std::string& ckpt_out, const std::string& resume_path,
              const ModelFlags& mf, hsf::TrainConfig cfg, bool normalize) {
  auto scene = load_scene(cube_path, normalize);

  if (!resume_path.empty()) {
    auto old = hsf::load_checkpoint(resume_path);
    auto saved_cfg = hsf::train_config_from_checkpoint(old);
    // Continue with the stored schedule; only the epoch target moves.
    int64_t target = cfg.epochs;
    bool deterministic = cfg.deterministic;
    cfg = saved_cfg;
    cfg.epochs = target;
    cfg.deterministic = deterministic;
    int64_t start = std::stoll(old.need_header("epochs_done"));
    if (start >= cfg.epochs) {
      std::cout << "checkpoint already has " << start << " epochs; nothing to do\n";
      return 0;
    }
    if (const std::string* n = old.find_header("normalize"); n && *n == "0" && normalize) {
      scene = load_scene(cube_path, false);
      normalize = false;
    }
    auto model = hsf::model_from_checkpoint(old);
    hsf::Adam opt(cfg.learning_rate, cfg.decay);
    hsf::restore_adam(opt, old);
    uint64_t rng_state = std::stoull(old.need_header("rng_state"), nullptr, 16);

    uint64_t split_seed = cfg.seed;
    if (const std::string* s = old.find_header("split_seed")) split_seed = std::stoull(*s);
    auto split =
        resolve_split(split_path, scene.labels, model.patch(), cfg.fractions, split_seed);
    cfg.fractions = split.fractions;
    auto set = hsf::extract_patches(scene.cube, scene.labels, model.patch());
    auto outcome =
        hsf::train(model, opt, set, split, cfg, &std::cout, start, &rng_state);

    auto file = hsf::build_checkpoint(model, opt, cfg, outcome);
    file.set("normalize", normalize ? "1" : "0");
    file.set("split_seed", std::to_string(split.seed));
    // Keep the better of the stored and freshly tracked best states.
    double old_best = std::stod(old.need_header("best_kappa"));
    if (old_best > outcome.best_kappa) {
      file.set("best_epoch", old.need_header("best_epoch"));
      file.set("best_kappa", old.need_header("best_kappa"));
      for (auto& block : file.blocks)
        if (block.name.rfind("best/", 0) == 0) block.data = old.need_block(block.name).data;
    }
    hsf::save_checkpoint(ckpt_out, file);
    std::cout << "wrote " << ckpt_out << " (epochs_done=" << outcome.epochs_done + start
              << ")\n";
    return outcome.aborted ? 1 : 0;
  }

  auto split = resolve_split(split_path, scene.labels, cfg.patch_size, cfg.fractions, cfg.seed);
  cfg.fractions = split.fractions;
  auto set = hsf::extract_patches(scene.cube, scene.labels, cfg.patch_size);
  auto mc = mf.build(cfg.patch_size, scene.cube.bands);
  hsf::FusionModel<float> model(mc, cfg.patch_size, scene.cube.bands, scene.labels.class_count,
                                cfg.seed);
  hsf::Adam opt(cfg.learning_rate, cfg.decay);
  auto outcome = hsf::train(model, opt, set, split, cfg, &std::cout);

  auto file = hsf::build_checkpoint(model, opt, cfg, outcome);
  file.set("normalize", normalize ? "1" : "0");
  file.set("split_seed", std::to_string(split.seed));
  hsf::save_checkpoint(ckpt_out, file);
  std::cout << "wrote " << ckpt_out << " (best_epoch=" << outcome.best_epoch << ")\n";
  return outcome.aborted ? 1 : 0;
}

// Loads a checkpoint plus the scene it references and rebuilds the exact
// evaluation context. The split file wins over the derived split when given.
// The scene lives on the heap because the patch set points into it.
struct EvalContext {
  std::unique_ptr<LoadedScene> scene;
  hsf::FusionModel<float> model;
  hsf::SplitAssignment split;
  hsf::TrainConfig cfg;
  hsf::PatchSet set;
};

EvalContext make_eval_context(const std::string& ckpt_path, const std::string& cube_path,
                              const std::string& split_path, bool best) {
  auto file = hsf::load_checkpoint(ckpt_path);
  auto cfg = hsf::train_config_from_checkpoint(file);
  bool normalize = true;
  if (const std::string* n = file.find_header("normalize")) normalize = *n != "0";
  auto scene = std::make_unique<LoadedScene>(load_scene(cube_path, normalize));
  auto model = hsf::model_from_checkpoint(file);
  if (best) hsf::restore_model_state(model, file, true);
  uint64_t split_seed = cfg.seed;
  if (const std::string* s = file.find_header("split_seed")) split_seed = std::stoull(*s);
  auto split =
      resolve_split(split_path, scene->labels, model.patch(), cfg.fractions, split_seed);
  auto set = hsf::extract_patches(scene->cube, scene->labels, model.patch());
  return {std::move(scene), std::move(model), std::move(split), cfg, std::move(set)};
}

int cmd_eval(const std::string& ckpt_path, const std::string& cube_path,
             const std::string& split_path, const std::string& role_name, int64_t batch,
             bool best) {
  auto ctx = make_eval_context(ckpt_path, cube_path, split_path, best);
  const auto& pixels = ctx.split.role(parse_role(role_name));
  if (batch <= 0) batch = ctx.cfg.batch_size;
  auto cm = hsf::evaluate(ctx.model, ctx.set, pixels, batch);
  std::cout << "role=" << role_name << (best ? " state=best" : " state=final") << "\n"
            << hsf::metrics_report(cm, class_name_list(ctx.scene->labels));
  return 0;
}

int cmd_map(const std::string& ckpt_path, const std::string& cube_path,
            const std::string& split_path, const std::string& out, int64_t batch, bool best) {
  auto ctx = make_eval_context(ckpt_path, cube_path, split_path, best);
  if (batch <= 0) batch = ctx.cfg.batch_size;
  auto preds = hsf::predict(ctx.model, ctx.set, ctx.set.centers, batch);
  hsf::emit_map(out, ctx.scene->labels, ctx.set.centers, preds);
  std::cout << "wrote " << out << ": " << ctx.set.centers.size() << " classified pixels\n";
  return 0;
}

int cmd_sweep(const std::string& cube_path, const std::string& axis_name,
              std::vector<double> values, const ModelFlags& mf, const hsf::TrainConfig& cfg,
              bool normalize) {
  auto scene = load_scene(cube_path, normalize);
  auto axis = hsf::sweep_axis_from_name(axis_name);
  if (values.empty()) values = hsf::default_sweep_values(axis);
  auto base = mf.build(cfg.patch_size, scene.cube.bands);
  auto table = hsf::sweep(axis, values, scene.cube, scene.labels, base, cfg, &std::cout);
  std::cout << hsf::format_sweep(table);
  return 0;
}

// Finite-difference check of the full model at 64-bit; small geometry, every
// parameter perturbed.
int cmd_gradcheck(const std::string& mode_name, uint64_t seed) {
  hsf::ModelConfig mc;
  mc.embed_dim = 4;
  mc.stage_depths = {1};
  mc.stage_heads = {2};
  mc.window = {2, 2, 2};
  mc.merge_stages = {};
  mc.mlp_ratio = 2;
  mc.token_count = 4;
  mc.token_dim = 4;
  mc.sst_layers = 1;
  mc.sst_heads = 2;
  mc.fused_dim = 4;
  mc.mode = parse_mode(mode_name);

  hsf::FusionModel<double> model(mc, 2, 4, 2, seed);
  hsf::Rng rng(seed + 1);
  std::vector<double> xv(2 * 4 * 2 * 2);
  for (auto& v : xv) v = rng.next_double();
  auto x = hsf::Tensor<double>::from({2, 1, 4, 2, 2}, std::move(xv), true);
  std::vector<hsf::Tensor<double>> leaves = {x};
  for (const auto& name : model.params().names()) leaves.push_back(model.params().get(name));

  auto report = hsf::grad_check(
      [&] {
        auto out = model.forward(x, true);
        return hsf::cross_entropy(out.probs, {0, 1});
      },
      leaves, 1e-5, 1e-4);
  std::cout << "mode=" << mode_name << " leaves=" << leaves.size()
            << " max_rel_err=" << report.max_rel_err << " flagged=" << report.flagged.size()
            << (report.nan_detected ? " nan=1" : "") << "\n";
  return report.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperspectral patch classifier: two-branch transformer with gated fusion"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled scene");
  hsf::SynthConfig sc;
  std::string synth_out;
  synth->add_option("--out", synth_out, "output cube path")->required();
  synth->add_option("--rows", sc.rows, "scene rows");
  synth->add_option("--cols", sc.cols, "scene columns");
  synth->add_option("--bands", sc.bands, "spectral bands");
  synth->add_option("--classes", sc.classes, "class count");
  synth->add_option("--noise", sc.noise_sigma, "additive noise sigma");
  synth->add_option("--gain-spread", sc.gain_spread, "per-region gain spread");
  synth->add_option("--margin", sc.erosion_margin, "label erosion margin in pixels");
  synth->add_option("--seed", sc.seed, "generator seed");

  // split
  auto* split = app.add_subcommand("split", "build and store a disjoint pixel split");
  std::string split_cube, split_out;
  int64_t split_patch = 8;
  std::vector<double> split_fracs = {0.05, 0.45, 0.50};
  uint64_t split_seed = 0;
  split->add_option("--cube", split_cube, "input cube")->required();
  split->add_option("--out", split_out, "output split path")->required();
  split->add_option("--patch-size", split_patch, "patch size the border mask uses");
  split->add_option("--fractions", split_fracs, "train,val,test fractions")->delimiter(',');
  split->add_option("--seed", split_seed, "shuffle seed");

  // shared training knobs
  hsf::TrainConfig tc;
  std::vector<double> train_fracs = {tc.fractions[0], tc.fractions[1], tc.fractions[2]};
  bool no_normalize = false;
  ModelFlags mf;

  auto add_train_options = [&](CLI::App* cmd) {
    cmd->add_option("--patch-size", tc.patch_size, "square patch size");
    cmd->add_option("--epochs", tc.epochs, "training epochs");
    cmd->add_option("--batch", tc.batch_size, "batch size");
    cmd->add_option("--lr", tc.learning_rate, "Adam learning rate");
    cmd->add_option("--decay", tc.decay, "per-step learning-rate decay");
    cmd->add_option("--fractions", train_fracs, "train,val,test fractions")->delimiter(',');
    cmd->add_option("--seed", tc.seed, "run seed");
    cmd->add_flag("--deterministic", tc.deterministic,
                  "zero wall-clock fields so repeated logs compare equal");
    cmd->add_flag("--no-normalize", no_normalize, "skip per-band min-max normalization");
  };

  // train
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  std::string train_cube, train_split, train_ckpt, train_resume;
  train->add_option("--cube", train_cube, "input cube")->required();
  train->add_option("--split", train_split, "split file (derived from flags when absent)");
  train->add_option("--checkpoint", train_ckpt, "output checkpoint path")->required();
  train->add_option("--resume", train_resume, "continue from this checkpoint");
  add_train_options(train);
  mf.attach(train);

  // eval
  auto* eval = app.add_subcommand("eval", "score a checkpoint on one split role");
  std::string eval_cube, eval_split, eval_ckpt, eval_role = "test";
  int64_t eval_batch = 0;
  bool eval_best = false;
  eval->add_option("--cube", eval_cube, "input cube")->required();
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint to score")->required();
  eval->add_option("--split", eval_split, "split file (derived from checkpoint when absent)");
  eval->add_option("--role", eval_role, "role to score: train, val, test");
  eval->add_option("--batch", eval_batch, "evaluation batch size");
  eval->add_flag("--best", eval_best, "use the best-validation state");

  // map
  auto* mapc = app.add_subcommand("map", "render a classification map as PPM");
  std::string map_cube, map_split, map_ckpt, map_out;
  int64_t map_batch = 0;
  bool map_best = false;
  mapc->add_option("--cube", map_cube, "input cube")->required();
  mapc->add_option("--checkpoint", map_ckpt, "checkpoint to apply")->required();
  mapc->add_option("--out", map_out, "output PPM path")->required();
  mapc->add_option("--split", map_split, "split file (derived from checkpoint when absent)");
  mapc->add_option("--batch", map_batch, "prediction batch size");
  mapc->add_flag("--best", map_best, "use the best-validation state");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "train across one axis and tabulate test metrics");
  std::string sweep_cube, sweep_axis;
  std::vector<double> sweep_values;
  sweep->add_option("--cube", sweep_cube, "input cube")->required();
  sweep->add_option("--axis", sweep_axis, "patch, fraction, or heads")->required();
  sweep->add_option("--values", sweep_values, "axis values (defaults per axis)")
      ->delimiter(',');
  add_train_options(sweep);
  mf.attach(sweep);

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the full model");
  std::string gc_mode = "fused";
  uint64_t gc_seed = 7003;
  gc->add_option("--mode", gc_mode, "branch selection: fused, sst, swin");
  gc->add_option("--seed", gc_seed, "initialization seed");

  CLI11_PARSE(app, argc, argv);

  try {
    tc.fractions = to_fractions(train_fracs);
    if (synth->parsed()) return cmd_synth(sc, synth_out);
    if (split->parsed())
      return cmd_split(split_cube, split_out, split_patch, to_fractions(split_fracs),
                       split_seed);
    if (train->parsed())
      return cmd_train(train_cube, train_split, train_ckpt, train_resume, mf, tc,
                       !no_normalize);
    if (eval->parsed())
      return cmd_eval(eval_ckpt, eval_cube, eval_split, eval_role, eval_batch, eval_best);
    if (mapc->parsed())
      return cmd_map(map_ckpt, map_cube, map_split, map_out, map_batch, map_best);
    if (sweep->parsed())
      return cmd_sweep(sweep_cube, sweep_axis, sweep_values, mf, tc, !no_normalize);
    if (gc->parsed()) return cmd_gradcheck(gc_mode, gc_seed);
  } catch (const std::exception& e) {
    std::cerr << "hsfusion: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
