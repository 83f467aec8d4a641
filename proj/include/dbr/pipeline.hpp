#pragma once

#include <filesystem>
#include <string>

#include "dbr/guidance_grid.hpp"
#include "dbr/image.hpp"
#include "dbr/predictor.hpp"
#include "dbr/transforms.hpp"

namespace dbr {

enum class NoiseTransform { deformable, rigid, affine, none };
/// What the second transform estimates: the noise N, or the noise-free
/// image I - N.
enum class Intermediate { noise, noise_free };

struct PipelineConfig {
  NoiseTransform noise_transform = NoiseTransform::deformable;
  Intermediate intermediate = Intermediate::noise;
  double window = 15.0;
  std::size_t kernel_size = 3;
  IllumMode illum_mode = IllumMode::smooth_reparam;
  bool clamp_output = true;

  void validate() const;
};

/// Coefficient packing implied by a pipeline configuration.
GridLayout layout_for(const PipelineConfig& cfg);

/// Graph-carrying decomposition I -> (E, N) -> R~ with R~ = (I - N) / E.
/// `reflectance` is not clamped.
struct DecompositionTensors {
  Tensor illumination;
  Tensor noise;
  Tensor reflectance;
  Tensor offsets;  // mapped offsets (pixels), undefined unless deformable
  CoefficientMap gamma;
};

struct Decomposition {
  ImageF32 illumination;
  ImageF32 noise;
  ImageF32 reflectance;
};

DecompositionTensors decompose(const Tensor& img, const PredictorParams& params, const PipelineConfig& cfg);
Decomposition decompose(const ImageF32& img, const PredictorParams& params, const PipelineConfig& cfg);

/// The reflectance, clamped to [0, 1] when cfg.clamp_output is set.
ImageF32 enhance(const ImageF32& img, const PredictorParams& params, const PipelineConfig& cfg);

/// Writes `<stem>_E.png`, `<stem>_N.png` (N + 0.5) and `<stem>_R.png` into `dir`.
void dump_decomposition(const Decomposition& d, const std::filesystem::path& dir, const std::string& stem);

/// Parameters for which E = 1 and N = 0, so the enhancement is the identity.
PredictorParams make_identity_params(const PredictorConfig& pcfg, const PipelineConfig& cfg);

}  // namespace dbr
