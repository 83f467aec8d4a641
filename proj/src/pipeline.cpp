#include "dbr/pipeline.hpp"

#include <algorithm>

#include "dbr/errors.hpp"
#include "dbr/ops.hpp"

namespace dbr {

void PipelineConfig::validate() const {
  if (kernel_size == 0 || kernel_size % 2 == 0) throw UsageError("pipeline: kernel_size must be odd");
  if (!(window >= 0.0)) throw UsageError("pipeline: window must be >= 0");
}

GridLayout layout_for(const PipelineConfig& cfg) {
  GridLayout layout;
  layout.kernel_size = cfg.kernel_size;
  layout.noise_affine = cfg.noise_transform == NoiseTransform::affine;
  layout.kernels = cfg.noise_transform == NoiseTransform::deformable || cfg.noise_transform == NoiseTransform::rigid;
  layout.offsets = cfg.noise_transform == NoiseTransform::deformable;
  return layout;
}

DecompositionTensors decompose(const Tensor& img, const PredictorParams& params, const PipelineConfig& cfg) {
  cfg.validate();
  if (img.rank() != 3 || img.dim(2) != 3) {
    throw std::invalid_argument("decompose: expected H x W x 3 image, got " + shape_str(img.shape()));
  }
  const GridLayout layout = layout_for(cfg);
  if (params.grid_channels != layout.channels()) {
    throw std::invalid_argument("decompose: parameters emit " + std::to_string(params.grid_channels) +
                                " grid channels, configuration needs " + std::to_string(layout.channels()));
  }

  const Tensor lowres = downsample_input(img, params.config.input_size);
  const BilateralGrid grid = predict_grid(params, lowres);
  const Guidance guide = compute_guidance(img);

  DecompositionTensors out;
  out.gamma = slice(grid, guide);
  const UnpackedCoeffs coeffs = unpack_coeffs(out.gamma, layout);

  out.illumination = constrain_illum(affine_raw(coeffs.affine, img), img, cfg.illum_mode);

  const KernelNorm norm = cfg.intermediate == Intermediate::noise ? KernelNorm::zero_mean : KernelNorm::softmax;
  Tensor second;
  switch (cfg.noise_transform) {
    case NoiseTransform::deformable: {
      out.offsets = map_offsets(coeffs.raw_offsets, cfg.window);
      second = deformable_conv(img, normalize_kernels(coeffs.kernels, layout.taps(), norm), out.offsets,
                               cfg.kernel_size);
      break;
    }
    case NoiseTransform::rigid:
      second = rigid_conv(img, normalize_kernels(coeffs.kernels, layout.taps(), norm), cfg.kernel_size);
      break;
    case NoiseTransform::affine:
      second = affine_noise(coeffs.noise_affine, img);
      break;
    case NoiseTransform::none:
      break;
  }

  if (cfg.noise_transform == NoiseTransform::none) {
    out.noise = Tensor::zeros(img.shape());
  } else if (cfg.intermediate == Intermediate::noise) {
    out.noise = second;
  } else {
    out.noise = sub(img, second);
  }
  out.reflectance = div(sub(img, out.noise), out.illumination);
  return out;
}

Decomposition decompose(const ImageF32& img, const PredictorParams& params, const PipelineConfig& cfg) {
  const auto t = decompose(to_tensor(img), params, cfg);
  return {from_tensor(t.illumination), from_tensor(t.noise), from_tensor(t.reflectance)};
}

ImageF32 enhance(const ImageF32& img, const PredictorParams& params, const PipelineConfig& cfg) {
  ImageF32 r = decompose(img, params, cfg).reflectance;
  if (cfg.clamp_output) {
    for (auto& v : r.data) v = std::clamp(v, 0.0f, 1.0f);
  }
  return r;
}

void dump_decomposition(const Decomposition& d, const std::filesystem::path& dir, const std::string& stem) {
  ImageF32 n = d.noise;
  for (auto& v : n.data) v = std::clamp(v + 0.5f, 0.0f, 1.0f);
  save_image(d.illumination, dir / (stem + "_E.png"));
  save_image(n, dir / (stem + "_N.png"));
  save_image(d.reflectance, dir / (stem + "_R.png"));
}

PredictorParams make_identity_params(const PredictorConfig& pcfg, const PipelineConfig& cfg) {
  const GridLayout layout = layout_for(cfg);
  PredictorParams p = zero_params(pcfg, layout.channels());
  // With zero weights the grid equals the projection bias in every range slice.
  auto bias = p.get("projection.bias").mutable_values();
  const std::size_t L = layout.channels();
  for (std::size_t k = 0; k < pcfg.grid_depth; ++k) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double b = cfg.illum_mode == IllumMode::smooth_reparam ? 50.0 : 2.0;
      bias[k * L + layout.affine_begin() + c * 4 + 3] = b;
    }
    if (cfg.intermediate == Intermediate::noise_free) {
      // The second transform must reproduce I exactly. Softmax kernels always
      // mix channels, so only the affine variant has an exact identity.
      if (layout.noise_affine) {
        for (std::size_t c = 0; c < 3; ++c) bias[k * L + layout.noise_affine_begin() + c * 4 + c] = 1.0;
      }
    }
  }
  return p;
}

}  // namespace dbr
