#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "hsf/gemm.hpp"
#include "hsf/tensor.hpp"

namespace hsf {

// ---- matmul ----
// Supported batching: rank-2 × rank-2, batched × rank-2 (one flattened gemm),
// and equal leading batch extents (per-batch gemms). Nothing broader: keeps
// every backward rule a plain gemm.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  auto fail = [&] {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
  };
  if (sa.size() < 2 || sb.size() < 2) fail();
  int64_t m = sa[sa.size() - 2], k = sa[sa.size() - 1];
  int64_t kb = sb[sb.size() - 2], n = sb[sb.size() - 1];
  if (k != kb) fail();

  if (sb.size() == 2) {
    int64_t batch = 1;
    for (size_t i = 0; i + 2 < sa.size(); ++i) batch *= sa[i];
    Shape os = sa;
    os[os.size() - 1] = n;
    std::vector<T> v(static_cast<size_t>(batch * m * n));
    gemm<T>(false, false, batch * m, n, k, a.data().data(), b.data().data(), T(0), v.data());
    Tensor<T> out = detail::make_result<T>(std::move(os), std::move(v), {a, b});
    auto an = a.node(), bn = b.node();
    auto* self = out.node().get();
    int64_t rows = batch * m;
    detail::attach(out, [an, bn, self, rows, n, k] {
      const auto& g = self->grad;
      if (an->requires_grad) {
        an->ensure_grad();
        gemm<T>(false, true, rows, k, n, g.data(), bn->value.data(), T(1), an->grad.data());
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        gemm<T>(true, false, k, n, rows, an->value.data(), g.data(), T(1), bn->grad.data());
      }
    });
    return out;
  }

  if (sa.size() != sb.size()) fail();
  for (size_t i = 0; i + 2 < sa.size(); ++i)
    if (sa[i] != sb[i]) fail();
  int64_t batch = 1;
  for (size_t i = 0; i + 2 < sa.size(); ++i) batch *= sa[i];
  Shape os = sa;
  os[os.size() - 1] = n;
  std::vector<T> v(static_cast<size_t>(batch * m * n));
  for (int64_t i = 0; i < batch; ++i)
    gemm<T>(false, false, m, n, k, a.data().data() + i * m * k, b.data().data() + i * k * n, T(0),
            v.data() + i * m * n);
  Tensor<T> out = detail::make_result<T>(std::move(os), std::move(v), {a, b});
  auto an = a.node(), bn = b.node();
  auto* self = out.node().get();
  detail::attach(out, [an, bn, self, batch, m, n, k] {
    const auto& g = self->grad;
    if (an->requires_grad) {
      an->ensure_grad();
      for (int64_t i = 0; i < batch; ++i)
        gemm<T>(false, true, m, k, n, g.data() + i * m * n, bn->value.data() + i * k * n, T(1),
                an->grad.data() + i * m * k);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int64_t i = 0; i < batch; ++i)
        gemm<T>(true, false, k, n, m, an->value.data() + i * m * k, g.data() + i * m * n, T(1),
                bn->grad.data() + i * k * n);
    }
  });
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return add(matmul(x, w), b);
}

// ---- softmax ----
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int64_t axis) {
  const Shape& s = x.shape();
  if (axis < 0 || axis >= x.rank()) throw std::invalid_argument("softmax: invalid axis");
  int64_t ext = s[static_cast<size_t>(axis)];
  int64_t inner = 1;
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
  int64_t outer = x.size() / (ext * inner);
  std::vector<T> v(static_cast<size_t>(x.size()));
  const auto& xv = x.data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < inner; ++i) {
      int64_t base = o * ext * inner + i;
      T mx = xv[base];
      for (int64_t e = 1; e < ext; ++e) mx = std::max(mx, xv[base + e * inner]);
      T denom = T(0);
      for (int64_t e = 0; e < ext; ++e) {
        T ev = std::exp(xv[base + e * inner] - mx);
        v[base + e * inner] = ev;
        denom += ev;
      }
      T inv = T(1) / denom;
      for (int64_t e = 0; e < ext; ++e) v[base + e * inner] *= inv;
    }
  Tensor<T> out = detail::make_result<T>(s, std::move(v), {x});
  auto xn = x.node();
  auto* self = out.node().get();
  detail::attach(out, [xn, self, outer, ext, inner] {
    xn->ensure_grad();
    const auto& g = self->grad;
    const auto& y = self->value;
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t i = 0; i < inner; ++i) {
        int64_t base = o * ext * inner + i;
        T dot = T(0);
        for (int64_t e = 0; e < ext; ++e) dot += g[base + e * inner] * y[base + e * inner];
        for (int64_t e = 0; e < ext; ++e)
          xn->grad[base + e * inner] += y[base + e * inner] * (g[base + e * inner] - dot);
      }
  });
  return out;
}

// ---- layer norm over the last axis ----
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5)) {
  const Shape& s = x.shape();
  if (s.empty() || s.back() < 1) throw std::invalid_argument("layer_norm: zero-length axis");
  int64_t D = s.back();
  if (gamma.size() != D || beta.size() != D)
    throw std::invalid_argument("layer_norm: affine extents " + shape_str(gamma.shape()) + "/" +
                                shape_str(beta.shape()) + " do not match axis extent " + std::to_string(D));
  int64_t rows = x.size() / D;
  std::vector<T> v(static_cast<size_t>(x.size()));
  std::vector<T> mean(static_cast<size_t>(rows)), inv_std(static_cast<size_t>(rows));
  const auto& xv = x.data();
  const auto& gv = gamma.data();
  const auto& bv = beta.data();
  for (int64_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * D;
    T mu = T(0);
    for (int64_t j = 0; j < D; ++j) mu += row[j];
    mu /= static_cast<T>(D);
    T var = T(0);
    for (int64_t j = 0; j < D; ++j) {
      T d = row[j] - mu;
      var += d * d;
    }
    var /= static_cast<T>(D);
    T inv = T(1) / std::sqrt(var + eps);
    mean[static_cast<size_t>(r)] = mu;
    inv_std[static_cast<size_t>(r)] = inv;
    for (int64_t j = 0; j < D; ++j) v[r * D + j] = (row[j] - mu) * inv * gv[j] + bv[j];
  }
  Tensor<T> out = detail::make_result<T>(s, std::move(v), {x, gamma, beta});
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  auto* self = out.node().get();
  detail::attach(out, [xn, gn, bn, self, rows, D, mean, inv_std] {
    const auto& g = self->grad;
    for (int64_t r = 0; r < rows; ++r) {
      const T* row = xn->value.data() + r * D;
      const T* gr = g.data() + r * D;
      T mu = mean[static_cast<size_t>(r)];
      T inv = inv_std[static_cast<size_t>(r)];
      if (gn->requires_grad) {
        gn->ensure_grad();
        for (int64_t j = 0; j < D; ++j) gn->grad[j] += gr[j] * (row[j] - mu) * inv;
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int64_t j = 0; j < D; ++j) bn->grad[j] += gr[j];
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        // dxhat = g*gamma; dx = inv*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
        T m1 = T(0), m2 = T(0);
        for (int64_t j = 0; j < D; ++j) {
          T dxh = gr[j] * gn->value[j];
          T xh = (row[j] - mu) * inv;
          m1 += dxh;
          m2 += dxh * xh;
        }
        m1 /= static_cast<T>(D);
        m2 /= static_cast<T>(D);
        for (int64_t j = 0; j < D; ++j) {
          T dxh = gr[j] * gn->value[j];
          T xh = (row[j] - mu) * inv;
          xn->grad[r * D + j] += inv * (dxh - m1 - xh * m2);
        }
      }
    }
  });
  return out;
}

// ---- batch norm over (N, D, H, W) per channel of a (N, C, D, H, W) tensor ----
// Training mode normalizes by biased batch statistics and updates the running
// buffers in place; eval mode normalizes by the frozen running statistics.
template <typename T>
Tensor<T> batch_norm_3d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                        std::vector<T>& running_mean, std::vector<T>& running_var, bool training,
                        T momentum = T(0.9), T eps = T(1e-5)) {
  const Shape& s = x.shape();
  if (s.size() != 5) throw std::invalid_argument("batch_norm_3d: expected rank-5 input, got " + shape_str(s));
  int64_t N = s[0], C = s[1], spatial = s[2] * s[3] * s[4];
  if (gamma.size() != C || beta.size() != C ||
      static_cast<int64_t>(running_mean.size()) != C || static_cast<int64_t>(running_var.size()) != C)
    throw std::invalid_argument("batch_norm_3d: per-channel buffer extent mismatch");
  int64_t count = N * spatial;
  std::vector<T> mean(static_cast<size_t>(C)), inv_std(static_cast<size_t>(C));
  const auto& xv = x.data();
  if (training) {
    for (int64_t c = 0; c < C; ++c) {
      T mu = T(0);
      for (int64_t nn = 0; nn < N; ++nn) {
        const T* p = xv.data() + (nn * C + c) * spatial;
        for (int64_t i = 0; i < spatial; ++i) mu += p[i];
      }
      mu /= static_cast<T>(count);
      T var = T(0);
      for (int64_t nn = 0; nn < N; ++nn) {
        const T* p = xv.data() + (nn * C + c) * spatial;
        for (int64_t i = 0; i < spatial; ++i) {
          T d = p[i] - mu;
          var += d * d;
        }
      }
      var /= static_cast<T>(count);
      mean[static_cast<size_t>(c)] = mu;
      inv_std[static_cast<size_t>(c)] = T(1) / std::sqrt(var + eps);
      running_mean[static_cast<size_t>(c)] = momentum * running_mean[static_cast<size_t>(c)] + (T(1) - momentum) * mu;
      running_var[static_cast<size_t>(c)] = momentum * running_var[static_cast<size_t>(c)] + (T(1) - momentum) * var;
    }
  } else {
    for (int64_t c = 0; c < C; ++c) {
      mean[static_cast<size_t>(c)] = running_mean[static_cast<size_t>(c)];
      inv_std[static_cast<size_t>(c)] = T(1) / std::sqrt(running_var[static_cast<size_t>(c)] + eps);
    }
  }
  std::vector<T> v(static_cast<size_t>(x.size()));
  const auto& gv = gamma.data();
  const auto& bv = beta.data();
  for (int64_t nn = 0; nn < N; ++nn)
    for (int64_t c = 0; c < C; ++c) {
      const T* p = xv.data() + (nn * C + c) * spatial;
      T* q = v.data() + (nn * C + c) * spatial;
      T mu = mean[static_cast<size_t>(c)], inv = inv_std[static_cast<size_t>(c)];
      T gsc = gv[c], bsc = bv[c];
      for (int64_t i = 0; i < spatial; ++i) q[i] = (p[i] - mu) * inv * gsc + bsc;
    }
  Tensor<T> out = detail::make_result<T>(s, std::move(v), {x, gamma, beta});
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  auto* self = out.node().get();
  detail::attach(out, [xn, gn, bn, self, N, C, spatial, count, mean, inv_std, training] {
    const auto& g = self->grad;
    for (int64_t c = 0; c < C; ++c) {
      T mu = mean[static_cast<size_t>(c)], inv = inv_std[static_cast<size_t>(c)];
      T sum_g = T(0), sum_gx = T(0);
      for (int64_t nn = 0; nn < N; ++nn) {
        const T* gp = g.data() + (nn * C + c) * spatial;
        const T* xp = xn->value.data() + (nn * C + c) * spatial;
        for (int64_t i = 0; i < spatial; ++i) {
          sum_g += gp[i];
          sum_gx += gp[i] * (xp[i] - mu) * inv;
        }
      }
      if (gn->requires_grad) {
        gn->ensure_grad();
        gn->grad[c] += sum_gx;
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        bn->grad[c] += sum_g;
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        T gsc = gn->value[c];
        if (training) {
          T inv_count = T(1) / static_cast<T>(count);
          for (int64_t nn = 0; nn < N; ++nn) {
            const T* gp = g.data() + (nn * C + c) * spatial;
            const T* xp = xn->value.data() + (nn * C + c) * spatial;
            T* dp = xn->grad.data() + (nn * C + c) * spatial;
            for (int64_t i = 0; i < spatial; ++i) {
              T xh = (xp[i] - mu) * inv;
              dp[i] += gsc * inv * (gp[i] - sum_g * inv_count - xh * sum_gx * inv_count);
            }
          }
        } else {
          // frozen statistics are constants
          for (int64_t nn = 0; nn < N; ++nn) {
            const T* gp = g.data() + (nn * C + c) * spatial;
            T* dp = xn->grad.data() + (nn * C + c) * spatial;
            for (int64_t i = 0; i < spatial; ++i) dp[i] += gp[i] * gsc * inv;
          }
        }
      }
    }
  });
  return out;
}

// ---- conv3d ----

namespace detail {

// col is (D*H*W, Cin*kd*kh*kw) for one sample; zero "same" padding.
template <typename T>
void im2col_3d(const T* x, int64_t Cin, int64_t D, int64_t H, int64_t W, int64_t kd, int64_t kh,
               int64_t kw, T* col) {
  int64_t pd = kd / 2, ph = kh / 2, pw = kw / 2;
  int64_t K = Cin * kd * kh * kw;
  for (int64_t d = 0; d < D; ++d)
    for (int64_t h = 0; h < H; ++h)
      for (int64_t w = 0; w < W; ++w) {
        T* row = col + ((d * H + h) * W + w) * K;
        int64_t t = 0;
        for (int64_t ci = 0; ci < Cin; ++ci)
          for (int64_t td = 0; td < kd; ++td) {
            int64_t sd = d + td - pd;
            for (int64_t th = 0; th < kh; ++th) {
              int64_t sh = h + th - ph;
              for (int64_t tw = 0; tw < kw; ++tw, ++t) {
                int64_t sw = w + tw - pw;
                row[t] = (sd >= 0 && sd < D && sh >= 0 && sh < H && sw >= 0 && sw < W)
                             ? x[((ci * D + sd) * H + sh) * W + sw]
                             : T(0);
              }
            }
          }
      }
}

template <typename T>
void col2im_3d_add(const T* col, int64_t Cin, int64_t D, int64_t H, int64_t W, int64_t kd,
                   int64_t kh, int64_t kw, T* x) {
  int64_t pd = kd / 2, ph = kh / 2, pw = kw / 2;
  int64_t K = Cin * kd * kh * kw;
  for (int64_t d = 0; d < D; ++d)
    for (int64_t h = 0; h < H; ++h)
      for (int64_t w = 0; w < W; ++w) {
        const T* row = col + ((d * H + h) * W + w) * K;
        int64_t t = 0;
        for (int64_t ci = 0; ci < Cin; ++ci)
          for (int64_t td = 0; td < kd; ++td) {
            int64_t sd = d + td - pd;
            for (int64_t th = 0; th < kh; ++th) {
              int64_t sh = h + th - ph;
              for (int64_t tw = 0; tw < kw; ++tw, ++t) {
                int64_t sw = w + tw - pw;
                if (sd >= 0 && sd < D && sh >= 0 && sh < H && sw >= 0 && sw < W)
                  x[((ci * D + sd) * H + sh) * W + sw] += row[t];
              }
            }
          }
      }
}

}  // namespace detail

// Linear part of the stem convolution: zero "same" padding, stride 1.
// Kernel extents must be odd so the padding is symmetric.
template <typename T>
Tensor<T> conv3d_raw(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const Shape& sx = x.shape();
  const Shape& sw = w.shape();
  if (sx.size() != 5) throw std::invalid_argument("conv3d: expected rank-5 input, got " + shape_str(sx));
  if (sw.size() != 5) throw std::invalid_argument("conv3d: expected rank-5 kernel, got " + shape_str(sw));
  int64_t N = sx[0], Cin = sx[1], D = sx[2], H = sx[3], W = sx[4];
  int64_t Cout = sw[0], kd = sw[2], kh = sw[3], kw = sw[4];
  if (sw[1] != Cin)
    throw std::invalid_argument("conv3d: channel mismatch, input " + shape_str(sx) + " kernel " + shape_str(sw));
  if (kd % 2 == 0 || kh % 2 == 0 || kw % 2 == 0)
    throw std::invalid_argument("conv3d: even kernel extent in " + shape_str(sw));
  if (b.size() != Cout) throw std::invalid_argument("conv3d: bias extent mismatch");
  int64_t spatial = D * H * W;
  int64_t K = Cin * kd * kh * kw;
  std::vector<T> v(static_cast<size_t>(N * Cout * spatial));
  std::vector<T> col(static_cast<size_t>(spatial * K));
  const auto& bv = b.data();
  for (int64_t nn = 0; nn < N; ++nn) {
    detail::im2col_3d(x.data().data() + nn * Cin * spatial, Cin, D, H, W, kd, kh, kw, col.data());
    T* out_n = v.data() + nn * Cout * spatial;
    gemm<T>(false, true, Cout, spatial, K, w.data().data(), col.data(), T(0), out_n);
    for (int64_t co = 0; co < Cout; ++co) {
      T bias = bv[co];
      T* p = out_n + co * spatial;
      for (int64_t i = 0; i < spatial; ++i) p[i] += bias;
    }
  }
  Tensor<T> out = detail::make_result<T>({N, Cout, D, H, W}, std::move(v), {x, w, b});
  auto xn = x.node(), wn = w.node(), bn = b.node();
  auto* self = out.node().get();
  detail::attach(out, [xn, wn, bn, self, N, Cin, Cout, D, H, W, kd, kh, kw, spatial, K] {
    const auto& g = self->grad;
    std::vector<T> col(static_cast<size_t>(spatial * K));
    std::vector<T> dcol(static_cast<size_t>(spatial * K));
    for (int64_t nn = 0; nn < N; ++nn) {
      const T* g_n = g.data() + nn * Cout * spatial;
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int64_t co = 0; co < Cout; ++co) {
          T acc = T(0);
          const T* p = g_n + co * spatial;
          for (int64_t i = 0; i < spatial; ++i) acc += p[i];
          bn->grad[co] += acc;
        }
      }
      if (wn->requires_grad || xn->requires_grad)
        detail::im2col_3d(xn->value.data() + nn * Cin * spatial, Cin, D, H, W, kd, kh, kw, col.data());
      if (wn->requires_grad) {
        wn->ensure_grad();
        gemm<T>(false, false, Cout, K, spatial, g_n, col.data(), T(1), wn->grad.data());
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        gemm<T>(true, false, spatial, K, Cout, g_n, wn->value.data(), T(0), dcol.data());
        detail::col2im_3d_add(dcol.data(), Cin, D, H, W, kd, kh, kw,
                              xn->grad.data() + nn * Cin * spatial);
      }
    }
  });
  return out;
}

// Full stem convolution per the model equations: ReLU(conv + b).
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return relu(conv3d_raw(x, w, b));
}

// ---- pooling ----

// Max over non-overlapping windows along the depth (spectral) axis; ties go
// to the first element. Output depth is floor(D / window); the tail is dropped.
template <typename T>
Tensor<T> max_pool_depth(const Tensor<T>& x, int64_t window) {
  const Shape& s = x.shape();
  if (s.size() != 5) throw std::invalid_argument("max_pool_depth: expected rank-5 input, got " + shape_str(s));
  if (window < 1) throw std::invalid_argument("max_pool_depth: window must be >= 1");
  int64_t N = s[0], C = s[1], D = s[2], H = s[3], W = s[4];
  int64_t Do = D / window;
  if (Do < 1) throw std::invalid_argument("max_pool_depth: depth " + std::to_string(D) +
                                          " smaller than window " + std::to_string(window));
  int64_t hw = H * W;
  std::vector<T> v(static_cast<size_t>(N * C * Do * hw));
  std::vector<int64_t> arg(v.size());
  const auto& xv = x.data();
  for (int64_t nc = 0; nc < N * C; ++nc)
    for (int64_t d = 0; d < Do; ++d)
      for (int64_t i = 0; i < hw; ++i) {
        int64_t best = (nc * D + d * window) * hw + i;
        T bv = xv[static_cast<size_t>(best)];
        for (int64_t t = 1; t < window; ++t) {
          int64_t cand = (nc * D + d * window + t) * hw + i;
          if (xv[static_cast<size_t>(cand)] > bv) {
            bv = xv[static_cast<size_t>(cand)];
            best = cand;
          }
        }
        int64_t oi = (nc * Do + d) * hw + i;
        v[static_cast<size_t>(oi)] = bv;
        arg[static_cast<size_t>(oi)] = best;
      }
  Tensor<T> out = detail::make_result<T>({N, C, Do, H, W}, std::move(v), {x});
  auto xn = x.node();
  auto* self = out.node().get();
  detail::attach(out, [xn, self, arg] {
    xn->ensure_grad();
    const auto& g = self->grad;
    for (size_t i = 0; i < g.size(); ++i) xn->grad[static_cast<size_t>(arg[i])] += g[i];
  });
  return out;
}

// Adaptive average pooling of (N, C, H, W) to (N, C, g, g); window boundaries
// are floor(i·H/g) .. ceil((i+1)·H/g) so unions cover every input pixel.
template <typename T>
Tensor<T> adaptive_avg_pool2d(const Tensor<T>& x, int64_t g) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw std::invalid_argument("adaptive_avg_pool2d: expected rank-4 input, got " + shape_str(s));
  int64_t N = s[0], C = s[1], H = s[2], W = s[3];
  if (g < 1 || g > H || g > W)
    throw std::invalid_argument("adaptive_avg_pool2d: grid " + std::to_string(g) + " invalid for " + shape_str(s));
  auto lo = [](int64_t i, int64_t e, int64_t gg) { return (i * e) / gg; };
  auto hi = [](int64_t i, int64_t e, int64_t gg) { return ((i + 1) * e + gg - 1) / gg; };
  std::vector<T> v(static_cast<size_t>(N * C * g * g));
  const auto& xv = x.data();
  for (int64_t nc = 0; nc < N * C; ++nc)
    for (int64_t i = 0; i < g; ++i)
      for (int64_t j = 0; j < g; ++j) {
        int64_t r0 = lo(i, H, g), r1 = hi(i, H, g), c0 = lo(j, W, g), c1 = hi(j, W, g);
        T acc = T(0);
        for (int64_t r = r0; r < r1; ++r)
          for (int64_t c = c0; c < c1; ++c) acc += xv[(nc * H + r) * W + c];
        v[(nc * g + i) * g + j] = acc / static_cast<T>((r1 - r0) * (c1 - c0));
      }
  Tensor<T> out = detail::make_result<T>({N, C, g, g}, std::move(v), {x});
  auto xn = x.node();
  auto* self = out.node().get();
  detail::attach(out, [xn, self, N, C, H, W, g, lo, hi] {
    xn->ensure_grad();
    const auto& gr = self->grad;
    for (int64_t nc = 0; nc < N * C; ++nc)
      for (int64_t i = 0; i < g; ++i)
        for (int64_t j = 0; j < g; ++j) {
          int64_t r0 = lo(i, H, g), r1 = hi(i, H, g), c0 = lo(j, W, g), c1 = hi(j, W, g);
          T share = gr[(nc * g + i) * g + j] / static_cast<T>((r1 - r0) * (c1 - c0));
          for (int64_t r = r0; r < r1; ++r)
            for (int64_t c = c0; c < c1; ++c) xn->grad[(nc * H + r) * W + c] += share;
        }
  });
  return out;
}

// ---- loss ----

// Mean over the batch of -log(probs[i, label_i]); probabilities clamped at
// 1e-12 before the log (zero slope inside the clamp).
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& probs, const std::vector<int64_t>& labels) {
  const Shape& s = probs.shape();
  if (s.size() != 2) throw std::invalid_argument("cross_entropy: expected (batch, classes), got " + shape_str(s));
  int64_t B = s[0], C = s[1];
  if (static_cast<int64_t>(labels.size()) != B)
    throw std::invalid_argument("cross_entropy: label count mismatch");
  const T floor_p = T(1e-12);
  const auto& pv = probs.data();
  double acc = 0;
  for (int64_t i = 0; i < B; ++i) {
    int64_t y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= C)
      throw std::invalid_argument("cross_entropy: label " + std::to_string(y) + " out of range [0," +
                                  std::to_string(C) + ")");
    acc -= std::log(static_cast<double>(std::max(pv[i * C + y], floor_p)));
  }
  Tensor<T> out = detail::make_result<T>({1}, {static_cast<T>(acc / static_cast<double>(B))}, {probs});
  auto pn = probs.node();
  auto* self = out.node().get();
  auto lab = labels;
  detail::attach(out, [pn, self, lab, B, C, floor_p] {
    pn->ensure_grad();
    T g = self->grad[0];
    for (int64_t i = 0; i < B; ++i) {
      T p = pn->value[i * C + lab[static_cast<size_t>(i)]];
      if (p > floor_p) pn->grad[i * C + lab[static_cast<size_t>(i)]] -= g / (static_cast<T>(B) * p);
    }
  });
  return out;
}

// ---- attention mask add ----

// scores: (G, heads, T, T) with G = batch·nW windows, batch-major; mask:
// (nW, T, T), a constant. Gradient passes through to scores only.
template <typename T>
Tensor<T> add_window_mask(const Tensor<T>& scores, const Tensor<T>& mask) {
  const Shape& s = scores.shape();
  const Shape& m = mask.shape();
  if (s.size() != 4 || m.size() != 3 || s[2] != m[1] || s[3] != m[2] || s[0] % m[0] != 0)
    throw std::invalid_argument("add_window_mask: shapes " + shape_str(s) + " and " + shape_str(m) +
                                " are inconsistent");
  if (mask.requires_grad()) throw std::invalid_argument("add_window_mask: mask must be constant");
  int64_t G = s[0], heads = s[1], Tq = s[2], Tk = s[3], nW = m[0];
  int64_t win_elems = Tq * Tk;
  std::vector<T> v(static_cast<size_t>(scores.size()));
  const auto& sv = scores.data();
  const auto& mv = mask.data();
  for (int64_t gi = 0; gi < G; ++gi) {
    const T* mw = mv.data() + (gi % nW) * win_elems;
    for (int64_t h = 0; h < heads; ++h) {
      const T* sp = sv.data() + (gi * heads + h) * win_elems;
      T* op = v.data() + (gi * heads + h) * win_elems;
      for (int64_t i = 0; i < win_elems; ++i) op[i] = sp[i] + mw[i];
    }
  }
  Tensor<T> out = detail::make_result<T>(s, std::move(v), {scores});
  auto sn = scores.node();
  auto* self = out.node().get();
  detail::attach(out, [sn, self] {
    sn->ensure_grad();
    const auto& g = self->grad;
    for (size_t i = 0; i < g.size(); ++i) sn->grad[i] += g[i];
  });
  return out;
}

}  // namespace hsf
