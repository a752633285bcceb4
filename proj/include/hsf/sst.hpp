#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hsf/ops.hpp"
#include "hsf/params.hpp"
#include "hsf/swin3d.hpp"
#include "hsf/tensor.hpp"

namespace hsf {

// Fixed sinusoidal table: pe[pos, 2i] = sin(pos / 10000^(2i/dim)),
// pe[pos, 2i+1] = cos(same). Row 0 alternates 0 and 1.
template <typename T>
std::vector<T> sinusoidal_table(int64_t tokens, int64_t dim) {
  std::vector<T> pe(static_cast<size_t>(tokens * dim));
  for (int64_t pos = 0; pos < tokens; ++pos)
    for (int64_t i = 0; i < dim; ++i) {
      double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(dim);
      double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
      pe[static_cast<size_t>(pos * dim + i)] =
          static_cast<T>((i % 2 == 0) ? std::sin(angle) : std::cos(angle));
    }
  return pe;
}

// Broadcast add of the (T, D) table over the batch axis.
template <typename T>
Tensor<T> positional_encode(const Tensor<T>& x, const Tensor<T>& pe) {
  const Shape& s = x.shape();
  if (s.size() != 3 || pe.rank() != 2 || s[1] != pe.shape()[0] || s[2] != pe.shape()[1])
    throw std::invalid_argument("positional_encode: tokens " + shape_str(s) +
                                " incompatible with table " + shape_str(pe.shape()));
  return add(x, pe);
}

// Stem features (N, C, B', S, S) -> tokens (N, g*g, token_dim): spectral axis
// folds into channels, the spatial map pools to a g x g grid, and each site
// projects linearly.
template <typename T>
Tensor<T> patch_embed(const Tensor<T>& stem, int64_t grid, const Tensor<T>& w,
                      const Tensor<T>& b) {
  const Shape& s = stem.shape();
  if (s.size() != 5)
    throw std::invalid_argument("patch_embed: expected rank-5 stem features, got " +
                                shape_str(s));
  int64_t n = s[0], c = s[1], depth = s[2], h = s[3], ww = s[4];
  if (grid < 1 || grid > h || grid > ww)
    throw std::invalid_argument("patch_embed: token grid " + std::to_string(grid) +
                                " exceeds spatial extent " + std::to_string(std::min(h, ww)));
  auto folded = reshape(stem, {n, c * depth, h, ww});
  auto pooled = adaptive_avg_pool2d(folded, grid);
  auto sites = reshape(permute(pooled, {0, 2, 3, 1}), {n, grid * grid, c * depth});
  return linear(sites, w, b);
}

template <typename T>
struct SstLayerParams {
  NormParams<T> ln1, ln2;
  AttnParams<T> attn;
  MlpParams<T> mlp;

  static SstLayerParams create(ParamStore<T>& store, const std::string& prefix, int64_t dim,
                               int64_t inner, int64_t mlp_ratio, Rng& rng) {
    SstLayerParams p;
    p.ln1 = NormParams<T>::create(store, prefix + ".ln1", dim, rng);
    p.attn = AttnParams<T>::create(store, prefix + ".attn", dim, inner, rng);
    p.ln2 = NormParams<T>::create(store, prefix + ".ln2", dim, rng);
    p.mlp = MlpParams<T>::create(store, prefix + ".mlp", dim, dim * mlp_ratio, rng);
    return p;
  }
};

// Pre-norm encoder layer with full attention over all tokens. head_dim floors
// to dim/heads (minimum 1) so head counts that do not divide the width still
// run; the output projection restores the width.
template <typename T>
Tensor<T> sst_encoder_layer(const Tensor<T>& x, const SstLayerParams<T>& p, int64_t heads,
                            int64_t head_dim) {
  Tensor<T> no_mask;
  auto h = layer_norm(x, p.ln1.gamma, p.ln1.beta);
  auto y = add(x, multi_head_attention(h, p.attn, heads, head_dim, no_mask));
  auto m = layer_norm(y, p.ln2.gamma, p.ln2.beta);
  m = linear(m, p.mlp.w1, p.mlp.b1);
  m = gelu(m);
  m = linear(m, p.mlp.w2, p.mlp.b2);
  return add(y, m);
}

inline int64_t sst_head_dim(int64_t dim, int64_t heads) {
  return std::max<int64_t>(1, dim / heads);
}

}  // namespace hsf
