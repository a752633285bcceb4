#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "hsf/ops.hpp"
#include "hsf/params.hpp"
#include "hsf/tensor.hpp"

namespace hsf {

// Window geometry for one token raster (H, W, D). Windows clamp to the
// extent, extents pad up to a window multiple, and the half-window shift
// switches off along axes with a single window (a wrap inside one window
// would only permute tokens).
struct WindowGrid {
  std::array<int64_t, 3> orig{};
  std::array<int64_t, 3> padded{};
  std::array<int64_t, 3> win{};
  std::array<int64_t, 3> counts{};
  std::array<int64_t, 3> shift{};

  int64_t window_count() const { return counts[0] * counts[1] * counts[2]; }
  int64_t tokens() const { return win[0] * win[1] * win[2]; }
  bool shifted() const { return shift[0] || shift[1] || shift[2]; }
  bool padded_any() const {
    return padded[0] != orig[0] || padded[1] != orig[1] || padded[2] != orig[2];
  }
  bool needs_mask() const { return shifted() || padded_any(); }
};

inline WindowGrid make_grid(std::array<int64_t, 3> extents, std::array<int64_t, 3> window,
                            bool shifted) {
  WindowGrid g;
  g.orig = extents;
  for (int a = 0; a < 3; ++a) {
    if (extents[static_cast<size_t>(a)] < 1)
      throw std::invalid_argument("make_grid: non-positive extent");
    if (window[static_cast<size_t>(a)] < 1)
      throw std::invalid_argument("make_grid: non-positive window");
    int64_t w = std::min(window[static_cast<size_t>(a)], extents[static_cast<size_t>(a)]);
    int64_t padded = ((extents[static_cast<size_t>(a)] + w - 1) / w) * w;
    g.win[static_cast<size_t>(a)] = w;
    g.padded[static_cast<size_t>(a)] = padded;
    g.counts[static_cast<size_t>(a)] = padded / w;
    g.shift[static_cast<size_t>(a)] = (shifted && padded > w) ? w / 2 : 0;
  }
  return g;
}

// (N, H, W, D, C) with padded extents -> (N*nW, T, C), windows batch-major:
// output row index = sample * nW + window.
template <typename T>
Tensor<T> window_partition_3d(const Tensor<T>& x, const WindowGrid& g) {
  const Shape& s = x.shape();
  if (s.size() != 5)
    throw std::invalid_argument("window_partition_3d: expected rank-5 tokens, got " +
                                shape_str(s));
  for (int a = 0; a < 3; ++a)
    if (s[static_cast<size_t>(a) + 1] != g.padded[static_cast<size_t>(a)])
      throw std::invalid_argument("window_partition_3d: extent " +
                                  std::to_string(s[static_cast<size_t>(a) + 1]) +
                                  " does not match grid axis " + std::to_string(a));
  int64_t n = s[0], c = s[4];
  auto split = reshape(x, {n, g.counts[0], g.win[0], g.counts[1], g.win[1], g.counts[2], g.win[2], c});
  auto grouped = permute(split, {0, 1, 3, 5, 2, 4, 6, 7});
  return reshape(grouped, {n * g.window_count(), g.tokens(), c});
}

template <typename T>
Tensor<T> window_reverse_3d(const Tensor<T>& wnd, const WindowGrid& g, int64_t batch) {
  const Shape& s = wnd.shape();
  if (s.size() != 3 || s[0] != batch * g.window_count() || s[1] != g.tokens())
    throw std::invalid_argument("window_reverse_3d: window tensor " + shape_str(s) +
                                " inconsistent with grid (" + std::to_string(g.window_count()) +
                                " windows of " + std::to_string(g.tokens()) + " tokens)");
  int64_t c = s[2];
  auto grouped = reshape(wnd, {batch, g.counts[0], g.counts[1], g.counts[2], g.win[0], g.win[1],
                               g.win[2], c});
  auto split = permute(grouped, {0, 1, 4, 2, 5, 3, 6, 7});
  return reshape(split, {batch, g.padded[0], g.padded[1], g.padded[2], c});
}

// Circular roll of the three token axes; `reverse` undoes a forward shift.
template <typename T>
Tensor<T> cyclic_shift(const Tensor<T>& x, const std::array<int64_t, 3>& offsets, bool reverse) {
  int64_t sgn = reverse ? 1 : -1;
  return roll(x, {0, sgn * offsets[0], sgn * offsets[1], sgn * offsets[2], 0});
}

namespace detail {

// Slice ids along one rolled axis. With a shift the tail window mixes tokens
// from both sides of the wrap, so the standard three-segment labeling marks
// them; positions that came from padding get -1 and match nothing.
inline std::vector<int> axis_slice_ids(int64_t padded, int64_t orig, int64_t win, int64_t shift) {
  std::vector<int> ids(static_cast<size_t>(padded));
  for (int64_t p = 0; p < padded; ++p) {
    int64_t o = (p + shift) % padded;  // original coordinate before the roll
    if (o >= orig) {
      ids[static_cast<size_t>(p)] = -1;
      continue;
    }
    int id = 0;
    if (shift > 0) {
      if (p >= padded - shift) id = 2;
      else if (p >= padded - win) id = 1;
    }
    ids[static_cast<size_t>(p)] = id;
  }
  return ids;
}

}  // namespace detail

// Attention mask (nW, T, T): 0 where a token pair may attend, -1e9 where the
// pair crosses a roll boundary or touches padding. Never requires grad.
template <typename T>
Tensor<T> make_window_mask(const WindowGrid& g) {
  auto ih = detail::axis_slice_ids(g.padded[0], g.orig[0], g.win[0], g.shift[0]);
  auto iw = detail::axis_slice_ids(g.padded[1], g.orig[1], g.win[1], g.shift[1]);
  auto id = detail::axis_slice_ids(g.padded[2], g.orig[2], g.win[2], g.shift[2]);
  int64_t nw = g.window_count();
  int64_t t = g.tokens();
  std::vector<int> token_id(static_cast<size_t>(nw * t));
  int64_t wi = 0;
  for (int64_t c0 = 0; c0 < g.counts[0]; ++c0)
    for (int64_t c1 = 0; c1 < g.counts[1]; ++c1)
      for (int64_t c2 = 0; c2 < g.counts[2]; ++c2, ++wi) {
        int64_t ti = 0;
        for (int64_t a = 0; a < g.win[0]; ++a)
          for (int64_t b = 0; b < g.win[1]; ++b)
            for (int64_t c = 0; c < g.win[2]; ++c, ++ti) {
              int h = ih[static_cast<size_t>(c0 * g.win[0] + a)];
              int w = iw[static_cast<size_t>(c1 * g.win[1] + b)];
              int d = id[static_cast<size_t>(c2 * g.win[2] + c)];
              token_id[static_cast<size_t>(wi * t + ti)] =
                  (h < 0 || w < 0 || d < 0) ? -1 : (h * 3 + w) * 3 + d;
            }
      }
  std::vector<T> mask(static_cast<size_t>(nw * t * t));
  for (int64_t w = 0; w < nw; ++w)
    for (int64_t i = 0; i < t; ++i)
      for (int64_t j = 0; j < t; ++j) {
        int a = token_id[static_cast<size_t>(w * t + i)];
        int b = token_id[static_cast<size_t>(w * t + j)];
        mask[static_cast<size_t>((w * t + i) * t + j)] =
            (a >= 0 && a == b) ? T(0) : T(-1e9);
      }
  return Tensor<T>::from({nw, t, t}, std::move(mask));
}

// Multi-head scaled dot-product attention over (G, T, width) token groups.
// head_dim need not equal width/heads; the output projection restores width.
// An undefined mask means full attention.
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const AttnParams<T>& p, int64_t heads,
                               int64_t head_dim, const Tensor<T>& mask) {
  const Shape& s = x.shape();
  if (s.size() != 3)
    throw std::invalid_argument("multi_head_attention: expected (groups, tokens, width), got " +
                                shape_str(s));
  int64_t g = s[0], t = s[1];
  int64_t inner = heads * head_dim;
  auto heads_first = [&](const Tensor<T>& proj) {
    return permute(reshape(proj, {g, t, heads, head_dim}), {0, 2, 1, 3});
  };
  T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim)));
  auto q = heads_first(mul_scalar(linear(x, p.wq, p.bq), scale));
  auto k = heads_first(linear(x, p.wk, p.bk));
  auto v = heads_first(linear(x, p.wv, p.bv));
  auto scores = matmul(q, permute(k, {0, 1, 3, 2}));  // (g, heads, t, t)
  if (mask.defined()) scores = add_window_mask(scores, mask);
  auto attn = softmax(scores, 3);
  auto ctx = matmul(attn, v);  // (g, heads, t, head_dim)
  auto merged = reshape(permute(ctx, {0, 2, 1, 3}), {g, t, inner});
  return linear(merged, p.wo, p.bo);
}

// Windowed attention per the strict contract: channel width must split evenly
// across heads.
template <typename T>
Tensor<T> wmsa_3d(const Tensor<T>& windows, const AttnParams<T>& p, int64_t heads,
                  const Tensor<T>& mask) {
  int64_t c = windows.shape().back();
  if (c % heads != 0)
    throw std::invalid_argument("wmsa_3d: " + std::to_string(heads) +
                                " heads do not divide channel width " + std::to_string(c));
  return multi_head_attention(windows, p, heads, c / heads, mask);
}

// 2x2 spatial concatenation followed by a 4C -> 2C projection; the spectral
// axis passes through untouched.
template <typename T>
Tensor<T> patch_merge(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const Shape& s = x.shape();
  if (s.size() != 5)
    throw std::invalid_argument("patch_merge: expected rank-5 tokens, got " + shape_str(s));
  int64_t n = s[0], h = s[1], ww = s[2], d = s[3], c = s[4];
  if (h % 2 || ww % 2)
    throw std::invalid_argument("patch_merge: spatial extents must be even, got " + shape_str(s));
  auto split = reshape(x, {n, h / 2, 2, ww / 2, 2, d, c});
  auto grouped = permute(split, {0, 1, 3, 5, 2, 4, 6});
  auto cat = reshape(grouped, {n, h / 2, ww / 2, d, 4 * c});
  return linear(cat, w, b);
}

template <typename T>
struct SwinBlockParams {
  NormParams<T> ln1, ln2;
  AttnParams<T> attn;
  MlpParams<T> mlp;

  static SwinBlockParams create(ParamStore<T>& store, const std::string& prefix, int64_t width,
                                int64_t mlp_ratio, Rng& rng) {
    SwinBlockParams p;
    p.ln1 = NormParams<T>::create(store, prefix + ".ln1", width, rng);
    p.attn = AttnParams<T>::create(store, prefix + ".attn", width, width, rng);
    p.ln2 = NormParams<T>::create(store, prefix + ".ln2", width, rng);
    p.mlp = MlpParams<T>::create(store, prefix + ".mlp", width, width * mlp_ratio, rng);
    return p;
  }
};

// One pre-norm block: x + WMSA(LN(x)) with optional shift/pad plumbing, then
// y + MLP(LN(y)).
template <typename T>
Tensor<T> swin_block(const Tensor<T>& x, const SwinBlockParams<T>& p, const WindowGrid& grid,
                     const Tensor<T>& mask, int64_t heads) {
  const Shape& s = x.shape();
  int64_t batch = s[0];
  auto h = layer_norm(x, p.ln1.gamma, p.ln1.beta);
  h = pad_end(h, {0, grid.padded[0] - grid.orig[0], grid.padded[1] - grid.orig[1],
                  grid.padded[2] - grid.orig[2], 0});
  if (grid.shifted()) h = cyclic_shift(h, grid.shift, false);
  auto wnd = window_partition_3d(h, grid);
  auto attn = wmsa_3d(wnd, p.attn, heads, mask);
  auto back = window_reverse_3d(attn, grid, batch);
  if (grid.shifted()) back = cyclic_shift(back, grid.shift, true);
  back = crop_end(back, s);
  auto y = add(x, back);
  auto m = layer_norm(y, p.ln2.gamma, p.ln2.beta);
  m = linear(m, p.mlp.w1, p.mlp.b1);
  m = gelu(m);
  m = linear(m, p.mlp.w2, p.mlp.b2);
  return add(y, m);
}

}  // namespace hsf
