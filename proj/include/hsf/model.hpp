#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "hsf/fusion.hpp"
#include "hsf/ops.hpp"
#include "hsf/params.hpp"
#include "hsf/sst.hpp"
#include "hsf/swin3d.hpp"
#include "hsf/tensor.hpp"

namespace hsf {

enum class BranchMode { fused, sst_only, swin_only };

inline const char* branch_mode_name(BranchMode m) {
  switch (m) {
    case BranchMode::fused: return "fused";
    case BranchMode::sst_only: return "sst_only";
    default: return "swin_only";
  }
}

struct ModelConfig {
  // windowed branch
  int64_t embed_dim = 96;
  std::vector<int64_t> stage_depths = {2, 2, 2};
  std::vector<int64_t> stage_heads = {4, 8, 8};
  std::array<int64_t, 3> window = {4, 4, 4};  // (H, W, spectral)
  std::vector<int64_t> merge_stages = {1, 2};  // merge runs before these stages
  int64_t mlp_ratio = 4;
  std::array<int64_t, 3> stem_kernel = {3, 3, 3};
  // token branch
  int64_t token_count = 64;
  int64_t token_dim = 96;
  int64_t sst_layers = 4;
  int64_t sst_heads = 8;
  // fusion
  int64_t fused_dim = 96;
  BranchMode mode = BranchMode::fused;
};

inline ModelConfig default_model_config() { return ModelConfig{}; }

// Deeper preset for inputs large enough to survive five spatial halvings.
inline ModelConfig six_stage_model_config() {
  ModelConfig cfg;
  cfg.stage_depths = {2, 2, 2, 2, 2, 2};
  cfg.stage_heads = {4, 4, 8, 8, 8, 8};
  cfg.merge_stages = {1, 2, 3, 4, 5};
  return cfg;
}

// Near-literal stem preset: full spectral extent, small spatial footprint.
// Extents round down to odd so same padding stays centered.
inline ModelConfig literal_stem_model_config(int64_t bands) {
  ModelConfig cfg;
  int64_t kd = bands - (bands % 2 == 0 ? 1 : 0);
  cfg.stem_kernel = {kd, 3, 3};
  return cfg;
}

// Fits the default architecture to a patch size: the token grid shrinks to
// the patch and merges drop once the spatial extent cannot halve again.
inline ModelConfig adapt_model_config(ModelConfig cfg, int64_t patch) {
  int64_t g = std::min<int64_t>(8, patch);
  cfg.token_count = g * g;
  std::vector<int64_t> merges;
  int64_t extent = patch;
  for (size_t i = 0; i < cfg.stage_depths.size(); ++i) {
    bool wants_merge =
        std::find(cfg.merge_stages.begin(), cfg.merge_stages.end(), static_cast<int64_t>(i)) !=
        cfg.merge_stages.end();
    if (wants_merge && extent >= 2 && extent % 2 == 0) {
      merges.push_back(static_cast<int64_t>(i));
      extent /= 2;
    }
  }
  cfg.merge_stages = std::move(merges);
  return cfg;
}

template <typename T>
struct StemParams {
  Tensor<T> w, b;
  NormParams<T> bn;
  Tensor<T> running_mean, running_var;

  static StemParams create(ParamStore<T>& store, int64_t embed,
                           const std::array<int64_t, 3>& kernel, Rng& rng) {
    StemParams p;
    p.w = store.param("stem.conv.w", {embed, 1, kernel[0], kernel[1], kernel[2]},
                      Init::trunc_normal, rng);
    p.b = store.param("stem.conv.b", {embed}, Init::zeros, rng);
    p.bn = NormParams<T>::create(store, "stem.bn", embed, rng);
    p.running_mean = store.buffer("stem.bn.running_mean", {embed}, Init::zeros, rng);
    p.running_var = store.buffer("stem.bn.running_var", {embed}, Init::ones, rng);
    return p;
  }
};

// Shared front end: same-padded 3D conv with ReLU, batch norm, then a
// spectral max-pool with window 2.
template <typename T>
Tensor<T> conv_stem(const Tensor<T>& x, StemParams<T>& p, bool training) {
  const Shape& s = x.shape();
  if (s.size() != 5)
    throw std::invalid_argument("conv_stem: expected (batch,1,bands,S,S), got " + shape_str(s));
  if (s[2] < 2)
    throw std::invalid_argument("conv_stem: need at least 2 spectral bands, got " +
                                std::to_string(s[2]));
  auto y = conv3d(x, p.w, p.b);
  y = batch_norm_3d(y, p.bn.gamma, p.bn.beta, p.running_mean.data(), p.running_var.data(),
                    training);
  return max_pool_depth(y, 2);
}

template <typename T>
struct ModelOutput {
  Tensor<T> probs;  // (batch, classes)
  Tensor<T> gate;   // (batch, T, D_f); undefined outside fused mode
};

// The full classifier: shared stem, windowed branch, token branch, gated
// fusion, softmax head. Geometry is fixed per (patch, bands) at construction,
// which lets window grids and attention masks build once.
template <typename T>
class FusionModel {
 public:
  FusionModel(const ModelConfig& cfg, int64_t patch, int64_t bands, int64_t classes,
              uint64_t init_seed)
      : cfg_(cfg), patch_(patch), bands_(bands), classes_(classes) {
    if (classes < 2) throw std::invalid_argument("FusionModel: need at least 2 classes");
    if (bands < 2) throw std::invalid_argument("FusionModel: need at least 2 spectral bands");
    if (cfg.stage_depths.size() != cfg.stage_heads.size())
      throw std::invalid_argument("FusionModel: per-stage depth and head lists differ in length");
    for (int64_t k : cfg.stem_kernel)
      if (k % 2 == 0)
        throw std::invalid_argument("FusionModel: stem kernel extents must be odd");

    Rng rng(init_seed);
    stem_ = StemParams<T>::create(store_, cfg.embed_dim, cfg.stem_kernel, rng);
    spectral_ = bands / 2;

    if (cfg.mode != BranchMode::sst_only) build_swin(rng);
    if (cfg.mode != BranchMode::swin_only) build_sst(rng);
    build_fusion(rng);
  }

  ModelOutput<T> forward(const Tensor<T>& x, bool training) {
    auto stem = conv_stem(x, stem_, training);
    Tensor<T> h_sst, h_swin;
    if (cfg_.mode != BranchMode::swin_only) h_sst = sst_branch(stem);
    if (cfg_.mode != BranchMode::sst_only) h_swin = swin_branch(stem);

    ModelOutput<T> out;
    switch (cfg_.mode) {
      case BranchMode::fused: {
        auto fused = attentional_fuse(h_sst, h_swin);
        out.gate = fused.gate;
        out.probs = classify(fused.fused, head_w_, head_b_);
        break;
      }
      case BranchMode::sst_only:
        out.probs = classify(h_sst, head_w_, head_b_);
        break;
      case BranchMode::swin_only:
        out.probs = classify(h_swin, head_w_, head_b_);
        break;
    }
    return out;
  }

  // Both branches projected onto the shared (T, D_f) interface.
  Tensor<T> sst_branch(const Tensor<T>& stem) {
    auto tokens = patch_embed(stem, token_grid_, sst_embed_w_, sst_embed_b_);
    tokens = positional_encode(tokens, pe_);
    int64_t hd = sst_head_dim(cfg_.token_dim, cfg_.sst_heads);
    for (auto& layer : sst_layers_)
      tokens = sst_encoder_layer(tokens, layer, cfg_.sst_heads, hd);
    tokens = layer_norm(tokens, sst_norm_.gamma, sst_norm_.beta);
    if (sst_proj_w_.defined()) tokens = linear(tokens, sst_proj_w_, sst_proj_b_);
    return tokens;
  }

  Tensor<T> swin_branch(const Tensor<T>& stem) {
    auto t = permute(stem, {0, 3, 4, 2, 1});  // (N, H, W, spectral, C)
    for (size_t i = 0; i < stages_.size(); ++i) {
      auto& stage = stages_[i];
      if (stage.merge_w.defined()) t = patch_merge(t, stage.merge_w, stage.merge_b);
      for (size_t j = 0; j < stage.blocks.size(); ++j) {
        bool shifted = j % 2 == 1;
        t = swin_block(t, stage.blocks[j], shifted ? stage.grid_shifted : stage.grid,
                       shifted ? stage.mask_shifted : stage.mask, stage.heads);
      }
    }
    const Shape& s = t.shape();
    auto flat = reshape(t, {s[0], s[1] * s[2], s[3] * s[4]});
    auto up = align_token_grid(flat, cfg_.token_count);
    return linear(up, swin_proj_w_, swin_proj_b_);
  }

  ParamStore<T>& params() { return store_; }
  const ModelConfig& config() const { return cfg_; }
  int64_t patch() const { return patch_; }
  int64_t bands() const { return bands_; }
  int64_t classes() const { return classes_; }

  // Grid/mask accessors for geometry tests: stage index, shifted or not.
  const WindowGrid& grid(size_t stage, bool shifted) const {
    return shifted ? stages_.at(stage).grid_shifted : stages_.at(stage).grid;
  }
  const Tensor<T>& mask(size_t stage, bool shifted) const {
    return shifted ? stages_.at(stage).mask_shifted : stages_.at(stage).mask;
  }

 private:
  struct Stage {
    int64_t heads = 0;
    Tensor<T> merge_w, merge_b;  // undefined when the stage keeps its extent
    std::vector<SwinBlockParams<T>> blocks;
    WindowGrid grid, grid_shifted;
    Tensor<T> mask, mask_shifted;  // undefined when no mask is needed
  };

  void build_swin(Rng& rng) {
    int64_t h = patch_, w = patch_, c = cfg_.embed_dim;
    for (size_t i = 0; i < cfg_.stage_depths.size(); ++i) {
      Stage stage;
      stage.heads = cfg_.stage_heads[i];
      bool merge = std::find(cfg_.merge_stages.begin(), cfg_.merge_stages.end(),
                             static_cast<int64_t>(i)) != cfg_.merge_stages.end();
      if (merge) {
        if (h < 2 || w < 2 || h % 2 || w % 2)
          throw std::invalid_argument(
              "FusionModel: spatial extent exhausted before merge at stage " + std::to_string(i) +
              " (" + std::to_string(h) + "x" + std::to_string(w) + ")");
        std::string prefix = "swin.merge" + std::to_string(i);
        stage.merge_w = store_.param(prefix + ".w", {4 * c, 2 * c}, Init::trunc_normal, rng);
        stage.merge_b = store_.param(prefix + ".b", {2 * c}, Init::zeros, rng);
        h /= 2;
        w /= 2;
        c *= 2;
      }
      if (c % stage.heads != 0)
        throw std::invalid_argument("FusionModel: stage " + std::to_string(i) + " width " +
                                    std::to_string(c) + " not divisible by " +
                                    std::to_string(stage.heads) + " heads");
      stage.grid = make_grid({h, w, spectral_}, cfg_.window, false);
      stage.grid_shifted = make_grid({h, w, spectral_}, cfg_.window, true);
      if (stage.grid.needs_mask()) stage.mask = make_window_mask<T>(stage.grid);
      if (stage.grid_shifted.needs_mask())
        stage.mask_shifted = make_window_mask<T>(stage.grid_shifted);
      for (int64_t j = 0; j < cfg_.stage_depths[i]; ++j) {
        std::string prefix = "swin.s" + std::to_string(i) + ".b" + std::to_string(j);
        stage.blocks.push_back(SwinBlockParams<T>::create(store_, prefix, c, cfg_.mlp_ratio, rng));
      }
      stages_.push_back(std::move(stage));
    }
    swin_out_tokens_ = h * w;
    swin_out_dim_ = spectral_ * c;
  }

  void build_sst(Rng& rng) {
    auto g = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(cfg_.token_count))));
    if (g * g != cfg_.token_count)
      throw std::invalid_argument("FusionModel: token count " +
                                  std::to_string(cfg_.token_count) + " is not a square grid");
    if (g > patch_)
      throw std::invalid_argument("FusionModel: token grid " + std::to_string(g) +
                                  " exceeds patch size " + std::to_string(patch_));
    token_grid_ = g;
    int64_t in_dim = cfg_.embed_dim * spectral_;
    sst_embed_w_ = store_.param("sst.embed.w", {in_dim, cfg_.token_dim}, Init::trunc_normal, rng);
    sst_embed_b_ = store_.param("sst.embed.b", {cfg_.token_dim}, Init::zeros, rng);
    pe_ = store_.buffer("sst.pe", {cfg_.token_count, cfg_.token_dim}, Init::zeros, rng);
    pe_.data() = sinusoidal_table<T>(cfg_.token_count, cfg_.token_dim);
    int64_t inner = cfg_.sst_heads * sst_head_dim(cfg_.token_dim, cfg_.sst_heads);
    for (int64_t j = 0; j < cfg_.sst_layers; ++j)
      sst_layers_.push_back(SstLayerParams<T>::create(store_, "sst.l" + std::to_string(j),
                                                      cfg_.token_dim, inner, cfg_.mlp_ratio, rng));
    sst_norm_ = NormParams<T>::create(store_, "sst.norm", cfg_.token_dim, rng);
    if (cfg_.token_dim != cfg_.fused_dim) {
      sst_proj_w_ =
          store_.param("fuse.sst_proj.w", {cfg_.token_dim, cfg_.fused_dim}, Init::trunc_normal, rng);
      sst_proj_b_ = store_.param("fuse.sst_proj.b", {cfg_.fused_dim}, Init::zeros, rng);
    }
  }

  void build_fusion(Rng& rng) {
    if (cfg_.mode != BranchMode::sst_only) {
      auto g = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(swin_out_tokens_))));
      if (g * g != swin_out_tokens_)
        throw std::invalid_argument("FusionModel: windowed branch emits " +
                                    std::to_string(swin_out_tokens_) +
                                    " tokens, which is not a square grid");
      if (swin_out_tokens_ > cfg_.token_count)
        throw std::invalid_argument("FusionModel: windowed branch emits more tokens (" +
                                    std::to_string(swin_out_tokens_) + ") than the target " +
                                    std::to_string(cfg_.token_count));
      swin_proj_w_ =
          store_.param("fuse.swin_proj.w", {swin_out_dim_, cfg_.fused_dim}, Init::trunc_normal, rng);
      swin_proj_b_ = store_.param("fuse.swin_proj.b", {cfg_.fused_dim}, Init::zeros, rng);
    }
    int64_t head_in = cfg_.mode == BranchMode::fused ? 2 * cfg_.fused_dim : cfg_.fused_dim;
    head_w_ = store_.param("head.w", {head_in, classes_}, Init::trunc_normal, rng);
    head_b_ = store_.param("head.b", {classes_}, Init::zeros, rng);
  }

  ModelConfig cfg_;
  int64_t patch_, bands_, classes_;
  int64_t spectral_ = 0;        // bands after the stem pool
  int64_t token_grid_ = 0;      // g with T = g*g
  int64_t swin_out_tokens_ = 0;
  int64_t swin_out_dim_ = 0;
  ParamStore<T> store_;

  StemParams<T> stem_;
  std::vector<Stage> stages_;
  Tensor<T> sst_embed_w_, sst_embed_b_, pe_;
  std::vector<SstLayerParams<T>> sst_layers_;
  NormParams<T> sst_norm_;
  Tensor<T> sst_proj_w_, sst_proj_b_;
  Tensor<T> swin_proj_w_, swin_proj_b_;
  Tensor<T> head_w_, head_b_;
};

}  // namespace hsf
