#include "dbr/guidance_grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dbr/ops.hpp"
#include "dbr/parallel.hpp"

namespace dbr {

void BilateralGrid::validate(int range_bits) const {
  if (!coeffs.defined() || coeffs.rank() != 4) throw std::invalid_argument("bilateral grid must be rank 4");
  for (std::size_t a = 0; a < 3; ++a) {
    if (coeffs.dim(a) < 2) throw std::invalid_argument("bilateral grid dims must be >= 2, got " + shape_str(coeffs.shape()));
  }
  if (coeffs.dim(3) < 1) throw std::invalid_argument("bilateral grid has no channels");
  const std::size_t expected = (std::size_t{1} << range_bits) / range_rate;
  if (depth() != expected) {
    throw std::invalid_argument("bilateral grid depth " + std::to_string(depth()) + " != 2^" +
                                std::to_string(range_bits) + "/" + std::to_string(range_rate));
  }
}

Guidance compute_guidance(const Tensor& img, int range_bits) {
  if (img.rank() != 3 || img.dim(2) != 3) {
    throw std::invalid_argument("compute_guidance: expected H x W x 3 image, got " + shape_str(img.shape()));
  }
  const std::size_t H = img.dim(0), W = img.dim(1);
  static constexpr double kWeights[3] = {0.299, 0.587, 0.114};
  const auto v = img.values();
  std::vector<double> out(H * W);
  for (std::size_t p = 0; p < H * W; ++p) {
    out[p] = kWeights[0] * v[3 * p] + kWeights[1] * v[3 * p + 1] + kWeights[2] * v[3 * p + 2];
  }
  Tensor j = make_op("guidance", {H, W}, std::move(out), {img},
                     [](std::span<const double> g, std::vector<Tensor>& p) {
                       auto d = p[0].grad_buffer();
                       for (std::size_t q = 0; q < g.size(); ++q) {
                         for (std::size_t c = 0; c < 3; ++c) d[3 * q + c] += kWeights[c] * g[q];
                       }
                     });
  return {j, range_bits};
}

double grid_coordinate(std::size_t p, std::size_t n, std::size_t g) {
  if (n <= 1) return 0.0;
  return static_cast<double>(p) / static_cast<double>(n - 1) * static_cast<double>(g - 1);
}

namespace {

struct Hat {
  std::size_t i0;
  double frac;  // weight of i0 + 1
};

// Two non-zero hat weights for coordinate u in [0, g-1]; the upper end maps
// to the last cell with weight 1.
Hat hat(double u, std::size_t g) {
  std::size_t i0 = static_cast<std::size_t>(std::floor(u));
  if (i0 > g - 2) i0 = g - 2;
  return {i0, u - static_cast<double>(i0)};
}

}  // namespace

CoefficientMap slice(const BilateralGrid& grid, const Guidance& guidance) {
  grid.validate(guidance.range_bits);
  const Tensor& J = guidance.values;
  if (J.rank() != 2) throw std::invalid_argument("slice: guidance must be H x W, got " + shape_str(J.shape()));
  const std::size_t H = J.dim(0), W = J.dim(1);
  const std::size_t GX = grid.size_x(), GY = grid.size_y(), GZ = grid.depth(), L = grid.channels();
  const auto lam = grid.coeffs.values();
  const auto jv = J.values();

  std::vector<double> out(H * W * L, 0.0);
  parallel_for(
      H,
      [&](std::size_t r0, std::size_t r1) {
        for (std::size_t px = r0; px < r1; ++px) {
          const Hat hx = hat(grid_coordinate(px, H, GX), GX);
          for (std::size_t py = 0; py < W; ++py) {
            const Hat hy = hat(grid_coordinate(py, W, GY), GY);
            const Hat hz = hat(std::clamp(jv[px * W + py], 0.0, 1.0) * static_cast<double>(GZ - 1), GZ);
            double* o = out.data() + (px * W + py) * L;
            for (int a = 0; a < 2; ++a) {
              const double wx = a ? hx.frac : 1.0 - hx.frac;
              for (int b = 0; b < 2; ++b) {
                const double wy = b ? hy.frac : 1.0 - hy.frac;
                for (int c = 0; c < 2; ++c) {
                  const double w = wx * wy * (c ? hz.frac : 1.0 - hz.frac);
                  if (w == 0.0) continue;
                  const double* cell = lam.data() + (((hx.i0 + a) * GY + hy.i0 + b) * GZ + hz.i0 + c) * L;
                  for (std::size_t l = 0; l < L; ++l) o[l] += w * cell[l];
                }
              }
            }
          }
        }
      },
      8);

  Tensor gamma = make_op(
      "slice", {H, W, L}, std::move(out), {grid.coeffs, J},
      [H, W, GX, GY, GZ, L](std::span<const double> g, std::vector<Tensor>& p) {
        const auto lam = p[0].values();
        const auto jv = p[1].values();
        std::span<double> glam, gj;
        if (p[0].requires_grad()) glam = p[0].grad_buffer();
        if (p[1].requires_grad()) gj = p[1].grad_buffer();
        for (std::size_t px = 0; px < H; ++px) {
          const Hat hx = hat(grid_coordinate(px, H, GX), GX);
          for (std::size_t py = 0; py < W; ++py) {
            const Hat hy = hat(grid_coordinate(py, W, GY), GY);
            const double jp = jv[px * W + py];
            const bool j_inside = jp >= 0.0 && jp <= 1.0;
            const Hat hz = hat(std::clamp(jp, 0.0, 1.0) * static_cast<double>(GZ - 1), GZ);
            const double* go = g.data() + (px * W + py) * L;
            double dj = 0.0;
            for (int a = 0; a < 2; ++a) {
              const double wx = a ? hx.frac : 1.0 - hx.frac;
              for (int b = 0; b < 2; ++b) {
                const double wxy = wx * (b ? hy.frac : 1.0 - hy.frac);
                if (wxy == 0.0) continue;
                for (int c = 0; c < 2; ++c) {
                  const std::size_t base = (((hx.i0 + a) * GY + hy.i0 + b) * GZ + hz.i0 + c) * L;
                  const double w = wxy * (c ? hz.frac : 1.0 - hz.frac);
                  if (!glam.empty() && w != 0.0) {
                    for (std::size_t l = 0; l < L; ++l) glam[base + l] += w * go[l];
                  }
                  if (!gj.empty() && j_inside) {
                    const double dw = wxy * (c ? 1.0 : -1.0);
                    double s = 0.0;
                    for (std::size_t l = 0; l < L; ++l) s += go[l] * lam[base + l];
                    dj += dw * s;
                  }
                }
              }
            }
            if (!gj.empty()) gj[px * W + py] += dj * static_cast<double>(GZ - 1);
          }
        }
      });
  return {gamma};
}

}  // namespace dbr
