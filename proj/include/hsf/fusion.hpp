#pragma once

#include <cmath>
#include <utility>

#include "hsf/ops.hpp"
#include "hsf/tensor.hpp"

namespace hsf {

// Row-gather map that scales a g_src x g_src token grid up to g_dst x g_dst
// by nearest assignment.
inline std::vector<int64_t> nearest_grid_map(int64_t g_src, int64_t g_dst) {
  std::vector<int64_t> idx(static_cast<size_t>(g_dst * g_dst));
  for (int64_t r = 0; r < g_dst; ++r)
    for (int64_t c = 0; c < g_dst; ++c)
      idx[static_cast<size_t>(r * g_dst + c)] =
          (r * g_src / g_dst) * g_src + (c * g_src / g_dst);
  return idx;
}

// Brings the coarse branch token map onto the fine branch grid before any
// projection. Both maps must sit on square grids; only upsampling (or equal
// counts) is supported.
template <typename T>
Tensor<T> align_token_grid(const Tensor<T>& coarse, int64_t target_tokens) {
  const Shape& s = coarse.shape();
  if (s.size() != 3)
    throw std::invalid_argument("align_token_grid: expected (batch, tokens, dim), got " +
                                shape_str(s));
  int64_t t_src = s[1];
  auto g_src = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(t_src))));
  auto g_dst = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(target_tokens))));
  if (g_src * g_src != t_src || g_dst * g_dst != target_tokens)
    throw std::invalid_argument("align_token_grid: token counts " + std::to_string(t_src) +
                                " and " + std::to_string(target_tokens) +
                                " must both be square grids");
  if (t_src > target_tokens)
    throw std::invalid_argument("align_token_grid: cannot reduce " + std::to_string(t_src) +
                                " tokens to " + std::to_string(target_tokens));
  if (t_src == target_tokens) return reshape(coarse, s);
  return gather_rows(coarse, nearest_grid_map(g_src, g_dst));
}

template <typename T>
struct FuseResult {
  Tensor<T> fused;  // (batch, T, 2*D_f): [hL | gate * hLp]
  Tensor<T> gate;   // (batch, T, D_f)
};

// Gated fusion: the first branch passes through unchanged, the second is
// scaled by sigmoid(hL * hLp) elementwise, and the two concatenate.
template <typename T>
FuseResult<T> attentional_fuse(const Tensor<T>& h_l, const Tensor<T>& h_lp) {
  detail::check_same_shape(h_l.shape(), h_lp.shape(), "attentional_fuse");
  FuseResult<T> out;
  out.gate = sigmoid(mul(h_l, h_lp));
  out.fused = concat<T>({h_l, mul(out.gate, h_lp)}, 2);
  return out;
}

// Token mean pool, linear head, softmax over classes.
template <typename T>
Tensor<T> classify(const Tensor<T>& tokens, const Tensor<T>& w, const Tensor<T>& b) {
  if (tokens.rank() != 3)
    throw std::invalid_argument("classify: expected (batch, tokens, dim), got " +
                                shape_str(tokens.shape()));
  auto pooled = mean_axis(tokens, 1);
  return softmax(linear(pooled, w, b), 1);
}

}  // namespace hsf
