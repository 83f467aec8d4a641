#pragma once

#include <cstddef>

#include "dbr/tensor.hpp"

namespace dbr {

/// Single-channel guidance map J (H x W), continuous in [0, 1].
struct Guidance {
  Tensor values;
  int range_bits = 8;
};

/// Low-resolution coefficient volume, shape Gx x Gy x Gz x L. Gx runs along
/// image rows, Gy along columns, Gz along guidance intensity.
struct BilateralGrid {
  Tensor coeffs;
  std::size_t spatial_rate = 16;
  std::size_t range_rate = 32;

  std::size_t size_x() const { return coeffs.dim(0); }
  std::size_t size_y() const { return coeffs.dim(1); }
  std::size_t depth() const { return coeffs.dim(2); }
  std::size_t channels() const { return coeffs.dim(3); }

  /// Rank 4, every grid dimension >= 2, and depth == 2^range_bits / range_rate.
  void validate(int range_bits) const;
};

/// Full-resolution per-pixel coefficients, H x W x L.
struct CoefficientMap {
  Tensor gamma;
};

/// Rec. 601 luminance 0.299 R + 0.587 G + 0.114 B of an H x W x 3 image.
Guidance compute_guidance(const Tensor& img, int range_bits = 8);

/// Trilinear (hat-kernel) interpolation of the grid at
///   u_x = p_x / (H-1) * (Gx-1),  u_y = p_y / (W-1) * (Gy-1),  u_z = J_p * (Gz-1).
/// Differentiable w.r.t. both the grid and the guidance.
CoefficientMap slice(const BilateralGrid& grid, const Guidance& guidance);

/// Normalized grid coordinate of pixel index p along an axis of n pixels
/// mapped onto g cells.
double grid_coordinate(std::size_t p, std::size_t n, std::size_t g);

}  // namespace dbr
