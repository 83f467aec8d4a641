#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dbr/guidance_grid.hpp"
#include "dbr/tensor.hpp"

namespace dbr {

/// Layer widths of the two-stream coefficient predictor.
///
/// Local stream: one stride-2 3x3 conv per entry of `local_widths`, then two
/// 3x3 convs at the last width. Global stream: two stride-2 3x3 convs on the
/// local features, flatten, then fully-connected layers of `fc_widths` (the
/// last must equal the local width). The streams are fused by broadcast-add
/// and a ReLU, and a 1x1 projection emits grid_depth * L channels.
struct PredictorConfig {
  std::size_t input_size = 256;
  std::vector<std::size_t> local_widths{8, 16, 32, 64};
  std::vector<std::size_t> fc_widths{256, 64};
  std::size_t grid_depth = 8;

  std::size_t grid_size() const;
  std::size_t global_size() const;
  std::size_t feature_width() const { return local_widths.back(); }
  void validate() const;
};

/// Channel packing of the per-pixel coefficients.
///   [0, 12)                    affine illumination matrix A_p (3x4 row-major)
///   [12, 24)   if noise_affine second affine matrix for the noise transform
///   then 9*K^2 if kernels      kernel taps
///   then 2*K^2 if offsets      raw (pre-sigmoid) offsets
struct GridLayout {
  std::size_t kernel_size = 3;
  bool noise_affine = false;
  bool kernels = true;
  bool offsets = true;

  std::size_t taps() const { return kernel_size * kernel_size; }
  std::size_t affine_begin() const { return 0; }
  std::size_t noise_affine_begin() const { return 12; }
  std::size_t kernels_begin() const { return 12 + (noise_affine ? 12 : 0); }
  std::size_t offsets_begin() const { return kernels_begin() + (kernels ? 9 * taps() : 0); }
  std::size_t channels() const { return offsets_begin() + (offsets ? 2 * taps() : 0); }
};

struct UnpackedCoeffs {
  Tensor affine;        // H x W x 12
  Tensor noise_affine;  // H x W x 12, or undefined
  Tensor kernels;       // H x W x 9K^2, or undefined
  Tensor raw_offsets;   // H x W x 2K^2, or undefined
};

UnpackedCoeffs unpack_coeffs(const CoefficientMap& gamma, const GridLayout& layout);
CoefficientMap pack_coeffs(const UnpackedCoeffs& blocks, const GridLayout& layout);

/// Named parameter tensors in a fixed order.
struct PredictorParams {
  PredictorConfig config;
  std::size_t grid_channels = 0;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  std::size_t count() const;
  void zero_grad();
  /// Deep copy with fresh leaves.
  PredictorParams clone() const;
};

/// Expected (name, shape) list for a configuration.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const PredictorConfig& cfg, std::size_t grid_channels);

/// He-normal weights (variance 2 / fan_in), zero biases.
PredictorParams init_params(const PredictorConfig& cfg, std::size_t grid_channels, std::uint64_t seed);
/// All parameters zero.
PredictorParams zero_params(const PredictorConfig& cfg, std::size_t grid_channels);

/// Bilinear stretch of an H x W x 3 image to size x size x 3.
Tensor downsample_input(const Tensor& img, std::size_t size);

/// Runs the network on a size x size x 3 low-resolution image and returns a
/// G x G x grid_depth x L grid.
BilateralGrid predict_grid(const PredictorParams& params, const Tensor& lowres);

}  // namespace dbr
