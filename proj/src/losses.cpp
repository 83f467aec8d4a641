#include "dbr/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "dbr/errors.hpp"
#include "dbr/metrics.hpp"
#include "dbr/ops.hpp"

namespace dbr {

void LossConfig::validate() const {
  if (lambda_g < 0 || lambda_n < 0 || lambda_e < 0) throw UsageError("loss weights must be >= 0");
  if (!(epsilon > 0)) throw UsageError("loss epsilon must be > 0");
  if (!(sigma >= 0.1)) throw UsageError("loss sigma must be >= 0.1");
  if (theta < 0) throw UsageError("loss theta must be >= 0");
}

LossBreakdown LossTerms::values() const { return {total.item(), l_r.item(), l_n.item(), l_e.item()}; }

namespace {

void check_image(const Tensor& t, const char* op) {
  if (t.rank() != 3) throw std::invalid_argument(std::string(op) + ": expected H x W x C, got " + shape_str(t.shape()));
}

}  // namespace

Tensor loss_reflectance(const Tensor& pred, const Tensor& target, const LossConfig& cfg) {
  check_image(pred, "loss_reflectance");
  if (pred.shape() != target.shape()) {
    throw std::invalid_argument("loss_reflectance: shape mismatch " + shape_str(pred.shape()) + " vs " +
                                shape_str(target.shape()));
  }
  Tensor fidelity = reduce_mean(abs(sub(pred, target)));
  if (cfg.lambda_g == 0.0) return fidelity;
  if (cfg.fidelity_aux == FidelityAux::ssim) {
    Tensor dissim = add_scalar(neg(ssim_tensor(pred, target)), 1.0);
    return add(fidelity, scale(dissim, cfg.lambda_g));
  }
  auto [px, py] = spatial_grad(pred);
  auto [tx, ty] = spatial_grad(target.detach());
  Tensor diff = concat({sub(px, tx), sub(py, ty)}, 2);
  return add(fidelity, scale(reduce_mean(abs(diff)), cfg.lambda_g));
}

Tensor loss_noise(const Tensor& noise, const LossConfig& cfg) {
  check_image(noise, "loss_noise");
  auto [gx, gy] = spatial_grad(noise);
  Tensor bx = gaussian_blur(gx, cfg.sigma, cfg.gauss_radius);
  Tensor by = gaussian_blur(gy, cfg.sigma, cfg.gauss_radius);
  const double pixels = static_cast<double>(noise.dim(0) * noise.dim(1));
  return scale(add(l1(bx), l1(by)), 1.0 / pixels);
}

Tensor loss_illum(const Tensor& illum, const Tensor& img, const LossConfig& cfg) {
  check_image(illum, "loss_illum");
  if (illum.shape() != img.shape()) {
    throw std::invalid_argument("loss_illum: shape mismatch " + shape_str(illum.shape()) + " vs " +
                                shape_str(img.shape()));
  }
  const std::size_t H = img.dim(0), W = img.dim(1), C = img.dim(2);
  // Per-pixel weight from the input's gradient magnitude, broadcast over channels.
  auto [ix, iy] = spatial_grad(img.detach());
  std::vector<double> weight(H * W);
  for (std::size_t p = 0; p < H * W; ++p) {
    double m = 0.0;
    for (std::size_t c = 0; c < C; ++c) m += std::fabs(ix.values()[p * C + c]) + std::fabs(iy.values()[p * C + c]);
    weight[p] = 1.0 / (std::pow(m, cfg.theta) + cfg.epsilon);
  }
  const Tensor w = Tensor::from_data({H, W, 1}, std::move(weight));
  auto [ex, ey] = spatial_grad(illum);
  Tensor mag = cfg.illum_norm == IllumNorm::l1 ? add(abs(ex), abs(ey)) : add(square(ex), square(ey));
  return scale(reduce_sum(mul(mag, w)), 1.0 / static_cast<double>(H * W));
}

LossTerms total_loss(const Tensor& pred, const Tensor& target, const Tensor& noise, const Tensor& illum,
                     const Tensor& img, const LossConfig& cfg) {
  cfg.validate();
  LossTerms t;
  t.l_r = loss_reflectance(pred, target, cfg);
  t.l_n = loss_noise(noise, cfg);
  t.l_e = loss_illum(illum, img, cfg);
  t.total = add(add(t.l_r, scale(t.l_n, cfg.lambda_n)), scale(t.l_e, cfg.lambda_e));
  return t;
}

}  // namespace dbr
