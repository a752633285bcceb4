#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "hsf/ops.hpp"
#include "hsf/rng.hpp"
#include "hsf/sst.hpp"
#include "hsf/tensor.hpp"

using hsf::ParamStore;
using hsf::Rng;
using hsf::Shape;
using hsf::Tensor;

namespace {

Tensor<float> random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
  std::vector<float> v(static_cast<size_t>(hsf::shape_numel(shape)));
  for (auto& x : v) x = static_cast<float>(2.0 * rng.next_double() - 1.0);
  return Tensor<float>::from(std::move(shape), std::move(v), requires_grad);
}

Tensor<float> identity_matrix(int64_t n) {
  std::vector<float> v(static_cast<size_t>(n * n), 0.0f);
  for (int64_t i = 0; i < n; ++i) v[static_cast<size_t>(i * n + i)] = 1.0f;
  return Tensor<float>::from({n, n}, std::move(v));
}

}  // namespace

TEST_CASE("sinusoidal table matches hand-expanded values at dim 4") {
  // exponent pairs: columns 0,1 use 10000^0 = 1; columns 2,3 use 10000^(1/2).
  auto pe = hsf::sinusoidal_table<double>(5, 4);
  double denom = std::pow(10000.0, 0.5);
  for (int64_t pos = 0; pos < 5; ++pos) {
    double p = static_cast<double>(pos);
    CHECK(pe[static_cast<size_t>(pos * 4 + 0)] == doctest::Approx(std::sin(p)).epsilon(1e-12));
    CHECK(pe[static_cast<size_t>(pos * 4 + 1)] == doctest::Approx(std::cos(p)).epsilon(1e-12));
    CHECK(pe[static_cast<size_t>(pos * 4 + 2)] ==
          doctest::Approx(std::sin(p / denom)).epsilon(1e-12));
    CHECK(pe[static_cast<size_t>(pos * 4 + 3)] ==
          doctest::Approx(std::cos(p / denom)).epsilon(1e-12));
  }
}

TEST_CASE("sinusoidal table first row alternates zero and one") {
  auto pe = hsf::sinusoidal_table<float>(16, 10);
  for (int64_t i = 0; i < 10; ++i)
    CHECK(pe[static_cast<size_t>(i)] == (i % 2 == 0 ? 0.0f : 1.0f));
  for (float v : pe) {
    CHECK(v <= 1.0f);
    CHECK(v >= -1.0f);
  }
  // Distinct positions get distinct encodings.
  for (int64_t a = 0; a < 16; ++a)
    for (int64_t b = a + 1; b < 16; ++b) {
      bool same = true;
      for (int64_t i = 0; i < 10 && same; ++i)
        same = pe[static_cast<size_t>(a * 10 + i)] == pe[static_cast<size_t>(b * 10 + i)];
      CHECK_FALSE(same);
    }
}

TEST_CASE("positional encode broadcasts the table over the batch") {
  Rng rng(5);
  int64_t t = 4, d = 6;
  auto table = hsf::sinusoidal_table<float>(t, d);
  auto pe = Tensor<float>::from({t, d}, std::vector<float>(table));
  auto x = random_tensor({3, t, d}, rng);
  auto y = hsf::positional_encode(x, pe);
  for (int64_t n = 0; n < 3; ++n)
    for (int64_t i = 0; i < t * d; ++i)
      CHECK(y.data()[static_cast<size_t>(n * t * d + i)] ==
            doctest::Approx(x.data()[static_cast<size_t>(n * t * d + i)] +
                            table[static_cast<size_t>(i)]));

  // Zero tokens: the result IS the table, once per batch row.
  auto zeros = Tensor<float>::zeros({2, t, d});
  auto only_pe = hsf::positional_encode(zeros, pe);
  for (int64_t n = 0; n < 2; ++n)
    for (int64_t i = 0; i < t * d; ++i)
      CHECK(only_pe.data()[static_cast<size_t>(n * t * d + i)] == table[static_cast<size_t>(i)]);

  // Encoding twice is not idempotent.
  auto twice = hsf::positional_encode(y, pe);
  bool all_same = true;
  for (size_t i = 0; i < y.data().size() && all_same; ++i)
    all_same = twice.data()[i] == y.data()[i];
  CHECK_FALSE(all_same);

  auto short_pe = Tensor<float>::zeros({t - 1, d});
  CHECK_THROWS_AS(hsf::positional_encode(x, short_pe), std::invalid_argument);
}

TEST_CASE("patch embed with grid equal to extent is a pure projection") {
  // 4x4 spatial, grid 4: each token is one spatial site, channels folded
  // as (channel, depth).
  int64_t n = 2, c = 3, depth = 2, s = 4;
  std::vector<float> v(static_cast<size_t>(n * c * depth * s * s));
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic)
      for (int64_t id = 0; id < depth; ++id)
        for (int64_t r = 0; r < s; ++r)
          for (int64_t col = 0; col < s; ++col)
            v[static_cast<size_t>((((in * c + ic) * depth + id) * s + r) * s + col)] =
                static_cast<float>(in * 10000 + ic * 1000 + id * 100 + r * 10 + col);
  auto stem = Tensor<float>::from({n, c, depth, s, s}, std::move(v));
  auto w = identity_matrix(c * depth);
  auto b = Tensor<float>::zeros({c * depth});
  auto tokens = hsf::patch_embed(stem, s, w, b);
  REQUIRE(tokens.shape() == Shape{n, s * s, c * depth});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t r = 0; r < s; ++r)
      for (int64_t col = 0; col < s; ++col)
        for (int64_t ic = 0; ic < c; ++ic)
          for (int64_t id = 0; id < depth; ++id) {
            float got = tokens.data()[static_cast<size_t>(
                ((in * s * s + r * s + col) * c * depth) + ic * depth + id)];
            CHECK(got == doctest::Approx(in * 10000 + ic * 1000 + id * 100 + r * 10 + col));
          }
}

TEST_CASE("patch embed pools 2x2 blocks when the grid halves the extent") {
  Rng rng(11);
  int64_t n = 1, c = 2, depth = 2, s = 8, g = 4;
  auto stem = random_tensor({n, c, depth, s, s}, rng);
  auto w = identity_matrix(c * depth);
  auto b = Tensor<float>::zeros({c * depth});
  auto tokens = hsf::patch_embed(stem, g, w, b);
  REQUIRE(tokens.shape() == Shape{n, g * g, c * depth});
  const auto& src = stem.data();
  for (int64_t gr = 0; gr < g; ++gr)
    for (int64_t gc = 0; gc < g; ++gc)
      for (int64_t ic = 0; ic < c; ++ic)
        for (int64_t id = 0; id < depth; ++id) {
          double sum = 0;
          for (int64_t dr = 0; dr < 2; ++dr)
            for (int64_t dc = 0; dc < 2; ++dc)
              sum += src[static_cast<size_t>(((ic * depth + id) * s + gr * 2 + dr) * s +
                                             gc * 2 + dc)];
          float got = tokens.data()[static_cast<size_t>((gr * g + gc) * c * depth +
                                                        ic * depth + id)];
          CHECK(got == doctest::Approx(sum / 4.0).epsilon(1e-5));
        }
}

TEST_CASE("patch embed rejects bad ranks and oversized grids") {
  Rng rng(3);
  auto w = identity_matrix(4);
  auto b = Tensor<float>::zeros({4});
  auto flat = random_tensor({2, 4, 4, 4}, rng);
  CHECK_THROWS_AS(hsf::patch_embed(flat, 2, w, b), std::invalid_argument);
  auto stem = random_tensor({1, 2, 2, 3, 3}, rng);
  CHECK_THROWS_AS(hsf::patch_embed(stem, 4, w, b), std::invalid_argument);
  CHECK_THROWS_AS(hsf::patch_embed(stem, 0, w, b), std::invalid_argument);
  CHECK_NOTHROW(hsf::patch_embed(stem, 3, w, b));
  CHECK_NOTHROW(hsf::patch_embed(stem, 1, w, b));
}

TEST_CASE("encoder layer without positions is permutation equivariant") {
  Rng rng(21);
  int64_t t = 6, d = 8;
  ParamStore<float> store;
  auto p = hsf::SstLayerParams<float>::create(store, "l0", d, d, 2, rng);
  auto x = random_tensor({2, t, d}, rng);
  auto y = hsf::sst_encoder_layer(x, p, 2, 4);

  std::vector<int64_t> perm = {3, 0, 5, 1, 4, 2};
  auto xp = hsf::gather_rows(x, perm);
  auto yp = hsf::sst_encoder_layer(xp, p, 2, 4);
  auto y_then_perm = hsf::gather_rows(y, perm);
  REQUIRE(yp.shape() == y_then_perm.shape());
  for (size_t i = 0; i < yp.data().size(); ++i)
    CHECK(yp.data()[i] == doctest::Approx(y_then_perm.data()[i]).epsilon(1e-4));

  // With positions added first the symmetry must break.
  auto table = hsf::sinusoidal_table<float>(t, d);
  auto pe = Tensor<float>::from({t, d}, std::move(table));
  auto ye = hsf::sst_encoder_layer(hsf::positional_encode(x, pe), p, 2, 4);
  auto ype = hsf::sst_encoder_layer(hsf::positional_encode(xp, pe), p, 2, 4);
  auto ye_perm = hsf::gather_rows(ye, perm);
  bool all_same = true;
  for (size_t i = 0; i < ype.data().size() && all_same; ++i)
    all_same = std::abs(ype.data()[i] - ye_perm.data()[i]) < 1e-6f;
  CHECK_FALSE(all_same);
}

TEST_CASE("encoder layer keeps shape and handles a single token") {
  Rng rng(33);
  int64_t d = 8;
  ParamStore<float> store;
  auto p = hsf::SstLayerParams<float>::create(store, "l0", d, d, 4, rng);
  auto x1 = random_tensor({3, 1, d}, rng);
  auto y1 = hsf::sst_encoder_layer(x1, p, 2, 4);
  CHECK(y1.shape() == x1.shape());
  for (float v : y1.data()) CHECK(std::isfinite(v));

  auto x = random_tensor({2, 5, d}, rng);
  auto y = hsf::sst_encoder_layer(x, p, 2, 4);
  CHECK(y.shape() == x.shape());
}

TEST_CASE("head width floors and never reaches zero") {
  CHECK(hsf::sst_head_dim(96, 8) == 12);
  CHECK(hsf::sst_head_dim(96, 10) == 9);
  CHECK(hsf::sst_head_dim(96, 12) == 8);
  CHECK(hsf::sst_head_dim(4, 8) == 1);
  CHECK(hsf::sst_head_dim(1, 3) == 1);

  // A non-dividing head count still runs end to end because the output
  // projection restores the requested width.
  Rng rng(41);
  int64_t d = 10, heads = 3;
  int64_t hd = hsf::sst_head_dim(d, heads);
  ParamStore<float> store;
  auto p = hsf::SstLayerParams<float>::create(store, "l0", d, heads * hd, 2, rng);
  auto x = random_tensor({2, 4, d}, rng);
  auto y = hsf::sst_encoder_layer(x, p, heads, hd);
  CHECK(y.shape() == x.shape());
  for (float v : y.data()) CHECK(std::isfinite(v));
}
