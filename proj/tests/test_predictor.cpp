#include <doctest.h>

#include <cmath>
#include <random>

#include "dbr/gradcheck.hpp"
#include "dbr/ops.hpp"
#include "dbr/predictor.hpp"

using namespace dbr;

namespace {

PredictorConfig tiny() {
  PredictorConfig c;
  c.input_size = 32;
  c.local_widths = {4, 8};
  c.fc_widths = {16, 8};
  return c;
}

Tensor rand_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> v(h * w * 3);
  for (auto& x : v) x = u(rng);
  return Tensor::from_data({h, w, 3}, v);
}

}  // namespace

TEST_CASE("default layout and sizes") {
  const GridLayout layout;
  CHECK(layout.channels() == 111);
  CHECK(layout.affine_begin() == 0);
  CHECK(layout.kernels_begin() == 12);
  CHECK(layout.offsets_begin() == 93);
  const PredictorConfig cfg;
  CHECK(cfg.grid_size() == 16);
  CHECK(cfg.global_size() == 4);
  CHECK_THROWS(PredictorConfig{32, {4}, {16, 9}, 8}.validate());
}

TEST_CASE("downsample_input") {
  const Tensor img = rand_image(256, 256, 1);
  CHECK(downsample_input(img, 256).same_node(img));
  const Tensor shrunk = downsample_input(Tensor::full({512, 512, 3}, 0.3), 256);
  for (double v : shrunk.values()) CHECK(v == doctest::Approx(0.3));

  // 2x2 checkerboard stretched to 4x4: half-pixel centres give 1/4, 3/4 blends.
  const Tensor cb = Tensor::from_data({2, 2, 3}, {0, 0, 0, 1, 1, 1, 1, 1, 1, 0, 0, 0});
  const Tensor up = downsample_input(cb, 4);
  auto bil = [](double y, double x) {
    y = std::clamp(y, 0.0, 1.0);
    x = std::clamp(x, 0.0, 1.0);
    const double v[2][2] = {{0, 1}, {1, 0}};
    return (1 - y) * ((1 - x) * v[0][0] + x * v[0][1]) + y * ((1 - x) * v[1][0] + x * v[1][1]);
  };
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(up.values()[(i * 4 + j) * 3] == doctest::Approx(bil((i + 0.5) / 2 - 0.5, (j + 0.5) / 2 - 0.5)));
}

TEST_CASE("zero parameters give the projection bias everywhere") {
  const PredictorConfig cfg = tiny();
  PredictorParams p = zero_params(cfg, 5);
  auto b = p.get("projection.bias").mutable_values();
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<double>(i);
  const auto g = predict_grid(p, rand_image(32, 32, 2));
  CHECK(g.coeffs.shape() == Shape{8, 8, 8, 5});
  for (std::size_t x = 0; x < 8; ++x)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t k = 0; k < 8; ++k)
        for (std::size_t l = 0; l < 5; ++l) CHECK(g.coeffs.values()[((x * 8 + y) * 8 + k) * 5 + l] == k * 5 + l);
}

TEST_CASE("default network emits a 16x16x8x111 grid deterministically") {
  const PredictorConfig cfg;
  const auto p = init_params(cfg, 111, 3);
  const Tensor low = rand_image(256, 256, 3);
  const auto a = predict_grid(p, low);
  const auto b = predict_grid(init_params(cfg, 111, 3), low);
  CHECK(a.coeffs.shape() == Shape{16, 16, 8, 111});
  CHECK(std::vector<double>(a.coeffs.values().begin(), a.coeffs.values().end()) ==
        std::vector<double>(b.coeffs.values().begin(), b.coeffs.values().end()));
  CHECK_THROWS(predict_grid(p, rand_image(128, 128, 4)));
}

TEST_CASE("init_params statistics") {
  const PredictorConfig cfg;
  const auto a = init_params(cfg, 111, 9);
  const auto b = init_params(cfg, 111, 9);
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    const auto& [name, t] = a.tensors[i];
    CHECK(std::vector<double>(t.values().begin(), t.values().end()) ==
          std::vector<double>(b.tensors[i].second.values().begin(), b.tensors[i].second.values().end()));
    if (name.ends_with(".bias")) {
      for (double v : t.values()) CHECK(v == 0.0);
    } else if (t.numel() >= 10000) {
      const std::size_t fan_in = t.rank() == 4 ? t.dim(1) * t.dim(2) * t.dim(3) : t.dim(0);
      double s = 0, ss = 0;
      for (double v : t.values()) {
        s += v;
        ss += v * v;
      }
      const double n = static_cast<double>(t.numel());
      const double var = ss / n - (s / n) * (s / n);
      CHECK(var == doctest::Approx(2.0 / static_cast<double>(fan_in)).epsilon(0.2));
    }
  }
}

TEST_CASE("pack and unpack") {
  const GridLayout layout;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(3 * 4 * 111);
  for (auto& x : v) x = u(rng);
  const CoefficientMap gamma{Tensor::from_data({3, 4, 111}, v)};
  const auto blocks = unpack_coeffs(gamma, layout);
  CHECK(blocks.affine.shape() == Shape{3, 4, 12});
  CHECK(blocks.kernels.shape() == Shape{3, 4, 81});
  CHECK(blocks.raw_offsets.shape() == Shape{3, 4, 18});
  CHECK(blocks.kernels.values()[0] == v[12]);
  CHECK(blocks.raw_offsets.values()[0] == v[93]);
  const auto back = pack_coeffs(blocks, layout);
  CHECK(std::vector<double>(back.gamma.values().begin(), back.gamma.values().end()) == v);
  CHECK_THROWS(unpack_coeffs(CoefficientMap{Tensor::zeros({3, 4, 110})}, layout));
}

TEST_CASE("grid gradient with respect to weights") {
  const PredictorConfig cfg = tiny();
  const auto base = init_params(cfg, 3, 11);
  const Tensor low = rand_image(32, 32, 6);
  std::vector<Tensor> leaves;
  for (const auto& [n, t] : base.tensors) leaves.push_back(t);
  GradCheckOptions o;
  o.max_probes = 30;
  const auto r = grad_check(
      "predict_grid",
      [&](const std::vector<Tensor>& in) {
        PredictorParams p = base;
        for (std::size_t i = 0; i < in.size(); ++i) p.tensors[i].second = in[i];
        return reduce_sum(predict_grid(p, low).coeffs);
      },
      leaves, o);
  CHECK(r.passed);
}
