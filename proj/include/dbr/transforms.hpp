#pragma once

#include <cstddef>

#include "dbr/tensor.hpp"

// Per-pixel transforms applied with sliced coefficients. All images are
// H x W x 3; per-pixel coefficient blocks are H x W x (block size).

namespace dbr {

/// Lower bound applied to the illumination so that I / E stays finite.
inline constexpr double kIlluminationFloor = 1e-4;

enum class IllumMode { smooth_reparam, hard_clamp };
enum class KernelNorm { zero_mean, softmax };

/// Kernel taps and raw offsets of the spatially-varying deformable
/// convolution. Channel layout per pixel:
///   kernels:     tap t = a*K + b, entry (row c, col d) -> t*9 + c*3 + d
///   raw_offsets: tap t -> (t*2 + 0) column shift, (t*2 + 1) row shift
struct DeformParams {
  std::size_t kernel_size = 3;
  double window = 15.0;
  Tensor kernels;
  Tensor raw_offsets;
};

/// raw_p = A_p [I_p; 1] with A_p a row-major 3 x 4 matrix (12 channels).
Tensor affine_raw(const Tensor& affine, const Tensor& img);

/// Maps raw illumination into [I, 1], then floors at kIlluminationFloor.
///   smooth_reparam: E = I + sigmoid(raw) (1 - I)
///   hard_clamp:     E = clamp(raw, I, 1)
Tensor constrain_illum(const Tensor& raw, const Tensor& img, IllumMode mode = IllumMode::smooth_reparam);

/// Delta = (2 sigmoid(raw) - 1) * window.
Tensor map_offsets(const Tensor& raw_offsets, double window);

/// Normalizes each of the 9 matrix entries across the `taps` taps of every
/// pixel: subtract the tap mean (zero_mean) or take a softmax over taps.
Tensor normalize_kernels(const Tensor& kernels, std::size_t taps, KernelNorm mode);

/// N_p = sum_t W_{p,t} img(p + q_t + Delta_{p,t}) with bilinear sampling and
/// clamp-to-edge borders. `offsets` are already mapped (pixels).
Tensor deformable_conv(const Tensor& img, const Tensor& kernels, const Tensor& offsets, std::size_t kernel_size);

/// deformable_conv with all offsets zero.
Tensor rigid_conv(const Tensor& img, const Tensor& kernels, std::size_t kernel_size);

/// Point-wise affine noise model (same form as affine_raw).
Tensor affine_noise(const Tensor& affine, const Tensor& img);

}  // namespace dbr
