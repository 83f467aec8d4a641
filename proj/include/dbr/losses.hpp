#pragma once

#include <cstddef>

#include "dbr/tensor.hpp"

namespace dbr {

/// Auxiliary term of the reflectance fidelity loss.
enum class FidelityAux { gradient, ssim };
/// Norm applied to illumination gradients in the smoothness prior.
enum class IllumNorm { l1, l2 };

struct LossConfig {
  double lambda_g = 0.1;
  double lambda_n = 1.0;
  double lambda_e = 1.0;
  double theta = 1.2;
  double epsilon = 1e-4;
  double sigma = 1.0;
  std::size_t gauss_radius = 2;
  FidelityAux fidelity_aux = FidelityAux::gradient;
  IllumNorm illum_norm = IllumNorm::l1;

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double l_r = 0.0;
  double l_n = 0.0;
  double l_e = 0.0;
};

struct LossTerms {
  Tensor total;
  Tensor l_r;
  Tensor l_n;
  Tensor l_e;

  LossBreakdown values() const;
};

/// mean |R~ - R| + lambda_g * mean |grad R~ - grad R| (x and y differences
/// pooled). With FidelityAux::ssim the second term is lambda_g * (1 - SSIM).
Tensor loss_reflectance(const Tensor& pred, const Tensor& target, const LossConfig& cfg);

/// Mean over pixels of || G_sigma * grad N ||_1, where the norm sums both
/// difference directions and all channels.
Tensor loss_noise(const Tensor& noise, const LossConfig& cfg);

/// Mean over pixels of ||grad E_p||_1 / (||grad I_p||_1^theta + epsilon).
/// The weight is computed from I as a constant. IllumNorm::l2 uses the sum of
/// squared differences in the numerator.
Tensor loss_illum(const Tensor& illum, const Tensor& img, const LossConfig& cfg);

/// total = l_r + lambda_n l_n + lambda_e l_e.
LossTerms total_loss(const Tensor& pred, const Tensor& target, const Tensor& noise, const Tensor& illum,
                     const Tensor& img, const LossConfig& cfg);

}  // namespace dbr
