#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "dbr/tensor.hpp"

// Differentiable primitives. Images are H x W x C tensors; network
// activations are N x C x H x W.

namespace dbr {

// --- elementwise, numpy-style broadcasting (shapes aligned on the right) ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// Throws NumericError when any |b| < 1e-12 unless `floor` is given, in which
/// case such denominators are replaced by +-floor (and receive no gradient).
Tensor div(const Tensor& a, const Tensor& b, std::optional<double> floor = std::nullopt);
/// Elementwise max/min; ties route the gradient to `a`.
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, double s);
Tensor scale(const Tensor& x, double s);
Tensor neg(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

// --- pointwise nonlinearities ---
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
/// Gradient passes strictly inside (lo, hi) and is zero outside.
Tensor clamp(const Tensor& x, double lo, double hi);
/// Subgradient at 0 is 0.
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);

// --- shape manipulation ---
Tensor reshape(const Tensor& x, Shape shape);
/// Output axis i is input axis perm[i].
Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm);
Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

// --- reductions (fixed left-to-right order) ---
Tensor reduce_sum(const Tensor& x);
Tensor reduce_mean(const Tensor& x);
/// Sum of absolute values.
Tensor l1(const Tensor& x);

// --- layers ---
enum class Padding { same, valid };

/// Cross-correlation. input N x C x H x W, kernel F x C x kh x kw (odd sizes),
/// optional bias F. "same" pads (k-1)/2 zeros per side.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias = Tensor(), std::size_t stride = 1,
              Padding padding = Padding::same);
/// input N x D, weight D x M, bias M (optional).
Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias = Tensor());

// --- image operators (H x W x C) ---
/// Forward differences along rows (gy) and columns (gx); the last row/column
/// of the respective axis is 0. Returns {gx, gy}.
std::pair<Tensor, Tensor> spatial_grad(const Tensor& x);
/// Normalized (2r+1)^2 Gaussian taps G(d) ~ exp(-d^2 / 2 sigma^2), row-major.
std::vector<double> gaussian_kernel(double sigma, std::size_t radius);
/// Truncated, renormalized 2-D Gaussian with replicate padding. sigma >= 0.1.
Tensor gaussian_blur(const Tensor& x, double sigma, std::size_t radius);
/// Correlation with a kh x kw kernel over valid positions only:
/// output (H-kh+1) x (W-kw+1) x C.
Tensor filter2d_valid(const Tensor& x, const std::vector<double>& kernel, std::size_t kh, std::size_t kw);
/// Bilinear lookup at M (x, y) points given as an M x 2 tensor (x = column,
/// y = row). Coordinates are clamped to [0, W-1] x [0, H-1]. Gradients flow
/// to the image and to the coordinates. Output M x C.
Tensor bilinear_sample(const Tensor& img, const Tensor& coords);
/// Bilinear resize with half-pixel centers (src = (dst + 0.5) * in / out - 0.5,
/// clamped to the image).
Tensor resize_bilinear(const Tensor& img, std::size_t out_h, std::size_t out_w);

}  // namespace dbr
