#include "dbr/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dbr/ops.hpp"
#include "dbr/parallel.hpp"

namespace dbr {

namespace {

void check_image(const Tensor& img, const char* op) {
  if (img.rank() != 3 || img.dim(2) != 3) {
    throw std::invalid_argument(std::string(op) + ": expected H x W x 3 image, got " + shape_str(img.shape()));
  }
}

void check_block(const Tensor& t, const Tensor& img, std::size_t channels, const char* op, const char* what) {
  if (t.rank() != 3 || t.dim(0) != img.dim(0) || t.dim(1) != img.dim(1) || t.dim(2) != channels) {
    throw std::invalid_argument(std::string(op) + ": " + what + " must be " + std::to_string(img.dim(0)) + "x" +
                                std::to_string(img.dim(1)) + "x" + std::to_string(channels) + ", got " +
                                shape_str(t.shape()));
  }
}

struct Tap {
  std::size_t i0, i1;
  double frac;
  bool inside;
};

Tap tap(double u, std::size_t n) {
  const double hi = static_cast<double>(n - 1);
  const bool inside = u >= 0.0 && u <= hi;
  const double uc = std::clamp(u, 0.0, hi);
  if (n == 1) return {0, 0, 0.0, inside};
  std::size_t i0 = static_cast<std::size_t>(std::floor(uc));
  if (i0 > n - 2) i0 = n - 2;
  return {i0, i0 + 1, uc - static_cast<double>(i0), inside};
}

}  // namespace

Tensor affine_raw(const Tensor& affine, const Tensor& img) {
  check_image(img, "affine_raw");
  check_block(affine, img, 12, "affine_raw", "coefficients");
  const std::size_t P = img.dim(0) * img.dim(1);
  const auto a = affine.values();
  const auto x = img.values();
  std::vector<double> out(P * 3);
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double* row = a.data() + p * 12 + c * 4;
      out[p * 3 + c] = row[0] * x[p * 3] + row[1] * x[p * 3 + 1] + row[2] * x[p * 3 + 2] + row[3];
    }
  }
  return make_op("affine_raw", img.shape(), std::move(out), {affine, img},
                 [P](std::span<const double> g, std::vector<Tensor>& par) {
                   const auto a = par[0].values();
                   const auto x = par[1].values();
                   std::span<double> ga, gx;
                   if (par[0].requires_grad()) ga = par[0].grad_buffer();
                   if (par[1].requires_grad()) gx = par[1].grad_buffer();
                   for (std::size_t p = 0; p < P; ++p) {
                     for (std::size_t c = 0; c < 3; ++c) {
                       const double go = g[p * 3 + c];
                       if (!ga.empty()) {
                         for (std::size_t d = 0; d < 3; ++d) ga[p * 12 + c * 4 + d] += go * x[p * 3 + d];
                         ga[p * 12 + c * 4 + 3] += go;
                       }
                       if (!gx.empty()) {
                         for (std::size_t d = 0; d < 3; ++d) gx[p * 3 + d] += go * a[p * 12 + c * 4 + d];
                       }
                     }
                   }
                 });
}

Tensor constrain_illum(const Tensor& raw, const Tensor& img, IllumMode mode) {
  check_image(img, "constrain_illum");
  if (raw.shape() != img.shape()) throw std::invalid_argument("constrain_illum: raw/image shape mismatch");
  Tensor e;
  if (mode == IllumMode::smooth_reparam) {
    // The outer minimum only absorbs rounding above 1.
    e = minimum(add(img, mul(sigmoid(raw), add_scalar(neg(img), 1.0))), Tensor::scalar(1.0));
  } else {
    e = minimum(maximum(raw, img), Tensor::scalar(1.0));
  }
  return maximum(e, Tensor::scalar(kIlluminationFloor));
}

Tensor map_offsets(const Tensor& raw_offsets, double window) {
  return scale(add_scalar(scale(sigmoid(raw_offsets), 2.0), -1.0), window);
}

Tensor normalize_kernels(const Tensor& kernels, std::size_t taps, KernelNorm mode) {
  if (kernels.rank() != 3 || kernels.dim(2) != taps * 9) {
    throw std::invalid_argument("normalize_kernels: expected H x W x " + std::to_string(taps * 9) + ", got " +
                                shape_str(kernels.shape()));
  }
  const std::size_t P = kernels.dim(0) * kernels.dim(1);
  const std::size_t S = taps * 9;
  const auto k = kernels.values();
  std::vector<double> out(k.size());
  const double inv = 1.0 / static_cast<double>(taps);
  for (std::size_t p = 0; p < P; ++p) {
    const double* kp = k.data() + p * S;
    double* op = out.data() + p * S;
    for (std::size_t e = 0; e < 9; ++e) {
      if (mode == KernelNorm::zero_mean) {
        double mean = 0.0;
        for (std::size_t t = 0; t < taps; ++t) mean += kp[t * 9 + e];
        mean *= inv;
        for (std::size_t t = 0; t < taps; ++t) op[t * 9 + e] = kp[t * 9 + e] - mean;
      } else {
        double mx = kp[e];
        for (std::size_t t = 1; t < taps; ++t) mx = std::max(mx, kp[t * 9 + e]);
        double z = 0.0;
        for (std::size_t t = 0; t < taps; ++t) {
          op[t * 9 + e] = std::exp(kp[t * 9 + e] - mx);
          z += op[t * 9 + e];
        }
        for (std::size_t t = 0; t < taps; ++t) op[t * 9 + e] /= z;
      }
    }
  }
  auto saved = std::make_shared<std::vector<double>>(out);
  return make_op(mode == KernelNorm::zero_mean ? "normalize_zero_mean" : "normalize_softmax", kernels.shape(),
                 std::move(out), {kernels},
                 [=](std::span<const double> g, std::vector<Tensor>& par) {
                   auto d = par[0].grad_buffer();
                   for (std::size_t p = 0; p < P; ++p) {
                     const double* gp = g.data() + p * S;
                     const double* sp = saved->data() + p * S;
                     double* dp = d.data() + p * S;
                     for (std::size_t e = 0; e < 9; ++e) {
                       if (mode == KernelNorm::zero_mean) {
                         double mean = 0.0;
                         for (std::size_t t = 0; t < taps; ++t) mean += gp[t * 9 + e];
                         mean *= inv;
                         for (std::size_t t = 0; t < taps; ++t) dp[t * 9 + e] += gp[t * 9 + e] - mean;
                       } else {
                         double dot = 0.0;
                         for (std::size_t t = 0; t < taps; ++t) dot += sp[t * 9 + e] * gp[t * 9 + e];
                         for (std::size_t t = 0; t < taps; ++t) dp[t * 9 + e] += sp[t * 9 + e] * (gp[t * 9 + e] - dot);
                       }
                     }
                   }
                 });
}

Tensor deformable_conv(const Tensor& img, const Tensor& kernels, const Tensor& offsets, std::size_t kernel_size) {
  check_image(img, "deformable_conv");
  if (kernel_size == 0 || kernel_size % 2 == 0) throw std::invalid_argument("deformable_conv: kernel size must be odd");
  const std::size_t T = kernel_size * kernel_size;
  check_block(kernels, img, T * 9, "deformable_conv", "kernels");
  check_block(offsets, img, T * 2, "deformable_conv", "offsets");
  const std::size_t H = img.dim(0), W = img.dim(1);
  const long half = static_cast<long>(kernel_size / 2);
  const auto x = img.values();
  const auto k = kernels.values();
  const auto off = offsets.values();
  std::vector<double> out(H * W * 3, 0.0);

  auto sample_pos = [=](std::size_t i, std::size_t j, std::size_t t, std::span<const double> off) {
    const long a = static_cast<long>(t / kernel_size) - half;
    const long b = static_cast<long>(t % kernel_size) - half;
    const double* o = off.data() + (i * W + j) * T * 2 + t * 2;
    const double sx = static_cast<double>(static_cast<long>(j) + b) + o[0];
    const double sy = static_cast<double>(static_cast<long>(i) + a) + o[1];
    return std::pair<Tap, Tap>{tap(sx, W), tap(sy, H)};
  };

  parallel_for(
      H,
      [&](std::size_t r0, std::size_t r1) {
        for (std::size_t i = r0; i < r1; ++i) {
          for (std::size_t j = 0; j < W; ++j) {
            double* o = out.data() + (i * W + j) * 3;
            const double* kp = k.data() + (i * W + j) * T * 9;
            for (std::size_t t = 0; t < T; ++t) {
              const auto [tx, ty] = sample_pos(i, j, t, off);
              double s[3];
              for (std::size_t d = 0; d < 3; ++d) {
                s[d] = (1 - ty.frac) * ((1 - tx.frac) * x[(ty.i0 * W + tx.i0) * 3 + d] +
                                        tx.frac * x[(ty.i0 * W + tx.i1) * 3 + d]) +
                       ty.frac * ((1 - tx.frac) * x[(ty.i1 * W + tx.i0) * 3 + d] +
                                  tx.frac * x[(ty.i1 * W + tx.i1) * 3 + d]);
              }
              const double* m = kp + t * 9;
              for (std::size_t c = 0; c < 3; ++c) o[c] += m[c * 3] * s[0] + m[c * 3 + 1] * s[1] + m[c * 3 + 2] * s[2];
            }
          }
        }
      },
      4);

  return make_op(
      "deformable_conv", {H, W, 3}, std::move(out), {img, kernels, offsets},
      [=](std::span<const double> g, std::vector<Tensor>& par) {
        const auto x = par[0].values();
        const auto k = par[1].values();
        const auto off = par[2].values();
        std::span<double> gx, gk, go;
        if (par[0].requires_grad()) gx = par[0].grad_buffer();
        if (par[1].requires_grad()) gk = par[1].grad_buffer();
        if (par[2].requires_grad()) go = par[2].grad_buffer();
        for (std::size_t i = 0; i < H; ++i) {
          for (std::size_t j = 0; j < W; ++j) {
            const std::size_t p = i * W + j;
            const double* gp = g.data() + p * 3;
            const double* kp = k.data() + p * T * 9;
            for (std::size_t t = 0; t < T; ++t) {
              const auto [tx, ty] = sample_pos(i, j, t, off);
              const std::size_t k00 = (ty.i0 * W + tx.i0) * 3, k01 = (ty.i0 * W + tx.i1) * 3;
              const std::size_t k10 = (ty.i1 * W + tx.i0) * 3, k11 = (ty.i1 * W + tx.i1) * 3;
              const double* m = kp + t * 9;
              // Gradient w.r.t. the sampled vector: W^T g.
              double gs[3];
              for (std::size_t d = 0; d < 3; ++d) gs[d] = m[d] * gp[0] + m[3 + d] * gp[1] + m[6 + d] * gp[2];
              if (!gk.empty()) {
                for (std::size_t d = 0; d < 3; ++d) {
                  const double s = (1 - ty.frac) * ((1 - tx.frac) * x[k00 + d] + tx.frac * x[k01 + d]) +
                                   ty.frac * ((1 - tx.frac) * x[k10 + d] + tx.frac * x[k11 + d]);
                  for (std::size_t c = 0; c < 3; ++c) gk[p * T * 9 + t * 9 + c * 3 + d] += gp[c] * s;
                }
              }
              if (!gx.empty()) {
                for (std::size_t d = 0; d < 3; ++d) {
                  gx[k00 + d] += gs[d] * (1 - ty.frac) * (1 - tx.frac);
                  gx[k01 + d] += gs[d] * (1 - ty.frac) * tx.frac;
                  gx[k10 + d] += gs[d] * ty.frac * (1 - tx.frac);
                  gx[k11 + d] += gs[d] * ty.frac * tx.frac;
                }
              }
              if (!go.empty()) {
                double dsx = 0.0, dsy = 0.0;
                for (std::size_t d = 0; d < 3; ++d) {
                  dsx += gs[d] * ((1 - ty.frac) * (x[k01 + d] - x[k00 + d]) + ty.frac * (x[k11 + d] - x[k10 + d]));
                  dsy += gs[d] * ((1 - tx.frac) * (x[k10 + d] - x[k00 + d]) + tx.frac * (x[k11 + d] - x[k01 + d]));
                }
                if (tx.inside && W > 1) go[p * T * 2 + t * 2] += dsx;
                if (ty.inside && H > 1) go[p * T * 2 + t * 2 + 1] += dsy;
              }
            }
          }
        }
      });
}

Tensor rigid_conv(const Tensor& img, const Tensor& kernels, std::size_t kernel_size) {
  check_image(img, "rigid_conv");
  const std::size_t T = kernel_size * kernel_size;
  return deformable_conv(img, kernels, Tensor::zeros({img.dim(0), img.dim(1), T * 2}), kernel_size);
}

Tensor affine_noise(const Tensor& affine, const Tensor& img) { return affine_raw(affine, img); }

}  // namespace dbr
