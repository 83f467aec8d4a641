#include <doctest.h>

#include <cmath>
#include <random>

#include "dbr/gradcheck.hpp"
#include "dbr/ops.hpp"
#include "dbr/transforms.hpp"
#include "oracles.hpp"

using namespace dbr;

namespace {

Tensor rand_tensor(Shape s, std::mt19937_64& rng, double lo, double hi, bool grad = false) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(s));
  for (auto& x : v) x = u(rng);
  return Tensor::from_data(std::move(s), std::move(v), grad);
}

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

Tensor tile(std::size_t h, std::size_t w, const std::vector<double>& block) {
  std::vector<double> v;
  for (std::size_t p = 0; p < h * w; ++p) v.insert(v.end(), block.begin(), block.end());
  return Tensor::from_data({h, w, block.size()}, v);
}

}  // namespace

TEST_CASE("affine_raw examples") {
  const Tensor img = tile(2, 2, {0.2, 0.4, 0.6});
  const Tensor eye = tile(2, 2, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0});
  CHECK(vals(affine_raw(eye, img)) == vals(img));
  const Tensor bias = tile(2, 2, {0, 0, 0, 0.3, 0, 0, 0, -0.1, 0, 0, 0, 2});
  const auto b = affine_raw(bias, img);
  CHECK(b.values()[0] == 0.3);
  CHECK(b.values()[1] == -0.1);
  CHECK(b.values()[2] == 2);
  const Tensor zero = affine_raw(Tensor::zeros({2, 2, 12}), img);
  for (double v : zero.values()) CHECK(v == 0);
  CHECK(affine_noise(eye, img).values()[1] == 0.4);
  CHECK_THROWS(affine_raw(Tensor::zeros({2, 2, 11}), img));
}

TEST_CASE("constrain_illum examples") {
  const Tensor i5 = Tensor::full({1, 1, 3}, 0.5);
  CHECK(constrain_illum(Tensor::zeros({1, 1, 3}), i5).values()[0] == 0.75);
  CHECK(constrain_illum(Tensor::full({1, 1, 3}, 60.0), i5).values()[0] == doctest::Approx(1.0));
  const Tensor i3 = Tensor::full({1, 1, 3}, 0.3);
  CHECK(constrain_illum(Tensor::full({1, 1, 3}, -60.0), i3).values()[0] == doctest::Approx(0.3));
  CHECK(constrain_illum(Tensor::full({1, 1, 3}, 0.6), i3, IllumMode::hard_clamp).values()[0] == 0.6);
  CHECK(constrain_illum(Tensor::full({1, 1, 3}, 3.0), i3, IllumMode::hard_clamp).values()[0] == 1.0);
  CHECK(constrain_illum(Tensor::full({1, 1, 3}, -3.0), i3, IllumMode::hard_clamp).values()[0] == 0.3);
  CHECK(constrain_illum(Tensor::full({1, 1, 3}, -80.0), Tensor::zeros({1, 1, 3})).values()[0] == kIlluminationFloor);
}

TEST_CASE("constraint holds for arbitrary raw values") {
  std::mt19937_64 rng(4);
  for (auto mode : {IllumMode::smooth_reparam, IllumMode::hard_clamp}) {
    const Tensor img = rand_tensor({9, 9, 3}, rng, 0, 1);
    const Tensor raw = rand_tensor({9, 9, 3}, rng, -40, 40);
    const auto e = constrain_illum(raw, img, mode);
    for (std::size_t i = 0; i < e.numel(); ++i) {
      CHECK(e.values()[i] >= img.values()[i]);
      CHECK(e.values()[i] <= 1.0);
      CHECK(e.values()[i] >= kIlluminationFloor);
    }
  }
}

TEST_CASE("map_offsets examples") {
  CHECK(map_offsets(Tensor::zeros({1}), 15).values()[0] == 0);
  CHECK(map_offsets(Tensor::full({1}, 60.0), 15).values()[0] == doctest::Approx(15));
  CHECK(map_offsets(Tensor::full({1}, std::log(3.0)), 15).values()[0] == doctest::Approx(7.5).epsilon(1e-14));
  std::mt19937_64 rng(5);
  const Tensor bounded = map_offsets(rand_tensor({100}, rng, -30, 30), 4);
  for (double v : bounded.values()) CHECK(std::fabs(v) <= 4);
}

TEST_CASE("normalize_kernels examples") {
  const auto zm = normalize_kernels(Tensor::full({1, 1, 81}, 0.7), 9, KernelNorm::zero_mean);
  for (double v : zm.values()) CHECK(v == doctest::Approx(0).scale(1));
  std::vector<double> k(81, 0.0);
  k[0 * 9 + 4] = 1.0;  // entry 4 of tap 0
  const auto one = normalize_kernels(Tensor::from_data({1, 1, 81}, k), 9, KernelNorm::zero_mean);
  CHECK(one.values()[4] == doctest::Approx(8.0 / 9.0));
  for (std::size_t t = 1; t < 9; ++t) CHECK(one.values()[t * 9 + 4] == doctest::Approx(-1.0 / 9.0));
  const auto sm = normalize_kernels(Tensor::full({1, 1, 81}, 2.0), 9, KernelNorm::softmax);
  for (double v : sm.values()) CHECK(v == doctest::Approx(1.0 / 9.0));

  std::mt19937_64 rng(6);
  const auto r = normalize_kernels(rand_tensor({4, 5, 81}, rng, -3, 3), 9, KernelNorm::zero_mean);
  for (std::size_t p = 0; p < 20; ++p)
    for (std::size_t e = 0; e < 9; ++e) {
      double s = 0.0;
      for (std::size_t t = 0; t < 9; ++t) s += r.values()[p * 81 + t * 9 + e];
      CHECK(std::fabs(s) < 1e-6);
    }
}

TEST_CASE("deformable_conv examples") {
  std::mt19937_64 rng(7);
  const Tensor flat = Tensor::full({8, 8, 3}, 0.42);
  const Tensor kernels = normalize_kernels(rand_tensor({8, 8, 81}, rng, -1, 1), 9, KernelNorm::zero_mean);
  const Tensor offs = map_offsets(rand_tensor({8, 8, 18}, rng, -5, 5), 15);
  const Tensor annihilated = deformable_conv(flat, kernels, offs, 3);
  for (double v : annihilated.values()) CHECK(std::fabs(v) < 1e-6);

  // Matrix M on the centre tap with zero offsets gives M I_p.
  const std::vector<double> M = {0.5, -1, 0.25, 2, 0, 1, -0.5, 0.3, 0.7};
  std::vector<double> block(81, 0.0);
  for (std::size_t e = 0; e < 9; ++e) block[4 * 9 + e] = M[e];
  const Tensor img = rand_tensor({5, 6, 3}, rng, 0, 1);
  const auto out = deformable_conv(img, tile(5, 6, block), Tensor::zeros({5, 6, 18}), 3);
  for (std::size_t p = 0; p < 30; ++p)
    for (std::size_t c = 0; c < 3; ++c) {
      double want = 0.0;
      for (std::size_t d = 0; d < 3; ++d) want += M[c * 3 + d] * img.values()[p * 3 + d];
      CHECK(out.values()[p * 3 + c] == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("deformable_conv and rigid_conv against the loop reference") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 5; ++t) {
    const Tensor img = rand_tensor({8, 8, 3}, rng, 0, 1);
    const Tensor k = rand_tensor({8, 8, 81}, rng, -1, 1);
    const Tensor off = map_offsets(rand_tensor({8, 8, 18}, rng, -3, 3), 15);
    const auto got = deformable_conv(img, k, off, 3);
    const auto want = oracle::deformable_conv(vals(img), 8, 8, vals(k), vals(off), 3);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::fabs(got.values()[i] - want[i]) < 1e-10);

    const auto rigid = rigid_conv(img, k, 3);
    CHECK(vals(rigid) == vals(deformable_conv(img, k, map_offsets(Tensor::zeros({8, 8, 18}), 15), 3)));
    const auto rwant = oracle::deformable_conv(vals(img), 8, 8, vals(k), std::vector<double>(8 * 8 * 18, 0.0), 3);
    for (std::size_t i = 0; i < rwant.size(); ++i) CHECK(std::fabs(rigid.values()[i] - rwant[i]) < 1e-10);
  }
}

TEST_CASE("deformable_conv gradients") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> frac(0.2, 0.8);
  std::uniform_int_distribution<int> whole(-2, 2);
  std::vector<double> off(5 * 6 * 18);
  for (auto& v : off) v = whole(rng) + frac(rng);
  const auto r = grad_check("deformable_conv", [](const auto& in) { return deformable_conv(in[0], in[1], in[2], 3); },
                            {rand_tensor({5, 6, 3}, rng, 0, 1, true), rand_tensor({5, 6, 81}, rng, -1, 1, true),
                             Tensor::from_data({5, 6, 18}, off, true)});
  CHECK(r.passed);
}
