#include "dbr/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "dbr/gradcheck.hpp"
#include "dbr/guidance_grid.hpp"
#include "dbr/losses.hpp"
#include "dbr/metrics.hpp"
#include "dbr/ops.hpp"
#include "dbr/pipeline.hpp"
#include "dbr/predictor.hpp"
#include "dbr/transforms.hpp"
#include "oracles.hpp"

namespace dbr {

namespace {

using Rng = std::mt19937_64;

Tensor uniform(const Shape& shape, double lo, double hi, Rng& rng, bool grad = false) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor::from_data(shape, std::move(v), grad);
}

// Values in +-[0.1, 1], away from the kinks of relu/abs.
Tensor away(const Shape& shape, Rng& rng, bool grad = true) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = sign(rng) ? u(rng) : -u(rng);
  return Tensor::from_data(shape, std::move(v), grad);
}

std::vector<double> vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::fabs(a[i] - b[i]);
    if (!(d <= m)) m = d;
  }
  return m;
}

CheckResult make(const std::string& group, const std::string& name, double error, double tol,
                 const SuiteOptions& opt) {
  const double t = opt.tol.value_or(tol);
  return {group, name, error, t, error <= t};
}

// A small predictor that keeps composite checks fast.
PredictorConfig tiny_predictor() {
  PredictorConfig c;
  c.input_size = 32;
  c.local_widths = {4, 8};
  c.fc_widths = {16, 8};
  c.grid_depth = 8;
  return c;
}

}  // namespace

std::vector<CheckResult> gradient_suite(const SuiteOptions& opt) {
  std::vector<CheckResult> out;
  Rng rng(opt.seed);
  GradCheckOptions prim;
  prim.tol = 1e-4;
  GradCheckOptions comp;
  comp.tol = 1e-3;
  comp.max_probes = opt.composite_probes;

  auto run = [&](const std::string& name, const GradFn& fn, std::vector<Tensor> inputs, const GradCheckOptions& o) {
    const auto r = grad_check(name, fn, std::move(inputs), o);
    out.push_back(make("gradient", name, r.max_rel_error, o.tol, opt));
  };
  auto unary = [&](const std::string& name, const std::function<Tensor(const Tensor&)>& f, Tensor x) {
    run(name, [f](const std::vector<Tensor>& in) { return f(in[0]); }, {std::move(x)}, prim);
  };
  auto binary = [&](const std::string& name, const std::function<Tensor(const Tensor&, const Tensor&)>& f, Tensor a,
                    Tensor b) {
    run(name, [f](const std::vector<Tensor>& in) { return f(in[0], in[1]); }, {std::move(a), std::move(b)}, prim);
  };

  binary("add", [](auto& a, auto& b) { return add(a, b); }, away({3, 4}, rng), away({4}, rng));
  binary("sub", [](auto& a, auto& b) { return sub(a, b); }, away({3, 4}, rng), away({3, 1}, rng));
  binary("mul", [](auto& a, auto& b) { return mul(a, b); }, away({2, 3, 4}, rng), away({3, 4}, rng));
  binary("div", [](auto& a, auto& b) { return div(a, b); }, away({3, 4}, rng), uniform({3, 4}, 0.5, 1.5, rng, true));
  binary("maximum", [](auto& a, auto& b) { return maximum(a, b); }, away({3, 4}, rng), away({3, 4}, rng));
  binary("minimum", [](auto& a, auto& b) { return minimum(a, b); }, away({3, 4}, rng), away({3, 4}, rng));
  unary("add_scalar", [](auto& x) { return add_scalar(x, 0.3); }, away({5}, rng));
  unary("scale", [](auto& x) { return scale(x, -1.7); }, away({5}, rng));
  unary("neg", [](auto& x) { return neg(x); }, away({5}, rng));
  unary("sigmoid", [](auto& x) { return sigmoid(x); }, uniform({6}, -3, 3, rng, true));
  unary("relu", [](auto& x) { return relu(x); }, away({8}, rng));
  unary("clamp", [](auto& x) { return clamp(x, -0.55, 0.45); }, away({8}, rng));
  unary("abs", [](auto& x) { return abs(x); }, away({8}, rng));
  unary("square", [](auto& x) { return square(x); }, away({8}, rng));
  unary("reshape", [](auto& x) { return mul(reshape(x, {4, 3}), Tensor::from_data({4, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 1, 2, 3})); },
        away({3, 4}, rng));
  unary("permute", [](auto& x) { return permute(x, {2, 0, 1}); }, away({2, 3, 4}, rng));
  unary("narrow", [](auto& x) { return narrow(x, 1, 1, 2); }, away({2, 4, 3}, rng));
  binary("concat", [](auto& a, auto& b) { return concat({a, b}, 1); }, away({2, 3}, rng), away({2, 2}, rng));
  unary("reduce_sum", [](auto& x) { return reduce_sum(square(x)); }, away({7}, rng));
  unary("reduce_mean", [](auto& x) { return reduce_mean(square(x)); }, away({7}, rng));
  unary("l1", [](auto& x) { return l1(x); }, away({7}, rng));

  run("conv2d_same", [](const auto& in) { return conv2d(in[0], in[1], in[2], 1, Padding::same); },
      {away({2, 3, 5, 6}, rng), away({4, 3, 3, 3}, rng), away({4}, rng)}, prim);
  run("conv2d_stride2", [](const auto& in) { return conv2d(in[0], in[1], in[2], 2, Padding::same); },
      {away({1, 2, 7, 6}, rng), away({3, 2, 3, 3}, rng), away({3}, rng)}, prim);
  run("conv2d_valid", [](const auto& in) { return conv2d(in[0], in[1], Tensor(), 1, Padding::valid); },
      {away({1, 2, 5, 5}, rng), away({2, 2, 3, 3}, rng)}, prim);
  run("fully_connected", [](const auto& in) { return fully_connected(in[0], in[1], in[2]); },
      {away({2, 5}, rng), away({5, 3}, rng), away({3}, rng)}, prim);
  unary("spatial_grad", [](auto& x) { auto [gx, gy] = spatial_grad(x); return add(gx, scale(gy, 0.7)); },
        away({4, 5, 2}, rng));
  unary("gaussian_blur", [](auto& x) { return gaussian_blur(x, 1.0, 2); }, away({6, 5, 2}, rng));
  unary("filter2d_valid", [](auto& x) { return filter2d_valid(x, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, 2, 3); },
        away({5, 6, 2}, rng));
  {
    // Sample points with fractional parts well away from the integer lattice.
    std::uniform_real_distribution<double> fr(0.15, 0.85);
    std::uniform_int_distribution<int> ix(0, 4), iy(0, 3);
    std::vector<double> c;
    for (int m = 0; m < 7; ++m) {
      c.push_back(ix(rng) + fr(rng));
      c.push_back(iy(rng) + fr(rng));
    }
    run("bilinear_sample", [](const auto& in) { return bilinear_sample(in[0], in[1]); },
        {away({5, 6, 2}, rng), Tensor::from_data({7, 2}, c, true)}, prim);
  }
  unary("resize_bilinear", [](auto& x) { return resize_bilinear(x, 7, 4); }, away({5, 6, 2}, rng));
  unary("compute_guidance", [](auto& x) { return compute_guidance(x).values; }, uniform({4, 3, 3}, 0, 1, rng, true));
  binary("affine_raw", [](auto& a, auto& x) { return affine_raw(a, x); }, away({3, 4, 12}, rng),
         uniform({3, 4, 3}, 0.05, 0.95, rng, true));
  binary("constrain_illum_smooth", [](auto& r, auto& x) { return constrain_illum(r, x, IllumMode::smooth_reparam); },
         uniform({3, 4, 3}, -3, 3, rng, true), uniform({3, 4, 3}, 0.05, 0.95, rng, true));
  binary("constrain_illum_clamp", [](auto& r, auto& x) { return constrain_illum(r, x, IllumMode::hard_clamp); },
         uniform({3, 4, 3}, -0.5, 1.5, rng, true), uniform({3, 4, 3}, 0.05, 0.95, rng, true));
  unary("map_offsets", [](auto& x) { return map_offsets(x, 15.0); }, uniform({2, 3, 18}, -3, 3, rng, true));
  unary("normalize_zero_mean", [](auto& x) { return normalize_kernels(x, 9, KernelNorm::zero_mean); },
        away({2, 2, 81}, rng));
  unary("normalize_softmax", [](auto& x) { return normalize_kernels(x, 9, KernelNorm::softmax); },
        away({2, 2, 81}, rng));
  binary("ssim_tensor", [](auto& x, auto& y) { return ssim_tensor(x, y); }, uniform({8, 9, 3}, 0, 1, rng, true),
         uniform({8, 9, 3}, 0, 1, rng, true));

  // --- composites ---
  run("slice",
      [](const auto& in) {
        BilateralGrid g{in[0], 16, 32};
        return slice(g, compute_guidance(in[1])).gamma;
      },
      {away({3, 4, 8, 2}, rng), uniform({7, 9, 3}, 0.02, 0.98, rng, true)}, comp);
  {
    std::uniform_real_distribution<double> u(-2.5, 2.5);
    std::vector<double> off(6 * 7 * 18);
    for (auto& v : off) v = u(rng);
    run("deformable_conv", [](const auto& in) { return deformable_conv(in[0], in[1], in[2], 3); },
        {uniform({6, 7, 3}, 0, 1, rng, true), away({6, 7, 81}, rng), Tensor::from_data({6, 7, 18}, off, true)}, comp);
  }
  LossConfig lc;
  run("loss_reflectance", [lc](const auto& in) { return loss_reflectance(in[0], in[1], lc); },
      {uniform({8, 8, 3}, 0, 1, rng, true), uniform({8, 8, 3}, 0, 1, rng)}, comp);
  {
    LossConfig s = lc;
    s.fidelity_aux = FidelityAux::ssim;
    run("loss_reflectance_ssim", [s](const auto& in) { return loss_reflectance(in[0], in[1], s); },
        {uniform({12, 12, 3}, 0, 1, rng, true), uniform({12, 12, 3}, 0, 1, rng)}, comp);
  }
  run("loss_noise", [lc](const auto& in) { return loss_noise(in[0], lc); }, {uniform({8, 9, 3}, -0.2, 0.2, rng, true)},
      comp);
  run("loss_illum", [lc](const auto& in) { return loss_illum(in[0], in[1], lc); },
      {uniform({8, 8, 3}, 0.1, 1, rng, true), uniform({8, 8, 3}, 0, 1, rng)}, comp);
  {
    LossConfig s = lc;
    s.illum_norm = IllumNorm::l2;
    run("loss_illum_l2", [s](const auto& in) { return loss_illum(in[0], in[1], s); },
        {uniform({8, 8, 3}, 0.1, 1, rng, true), uniform({8, 8, 3}, 0, 1, rng)}, comp);
  }
  {
    const PipelineConfig pc;
    const PredictorParams base = init_params(tiny_predictor(), layout_for(pc).channels(), opt.seed);
    const Tensor img = uniform({16, 16, 3}, 0.05, 0.95, rng);
    const Tensor target = uniform({16, 16, 3}, 0, 1, rng);
    std::vector<Tensor> leaves;
    for (const auto& [n, t] : base.tensors) leaves.push_back(t);
    run("decompose_total_loss",
        [&](const std::vector<Tensor>& in) {
          PredictorParams p = base;
          for (std::size_t i = 0; i < in.size(); ++i) p.tensors[i].second = in[i];
          const auto d = decompose(img, p, pc);
          return total_loss(d.reflectance, target, d.noise, d.illumination, img, lc).total;
        },
        leaves, comp);
  }
  return out;
}

std::vector<CheckResult> oracle_suite(const SuiteOptions& opt) {
  std::vector<CheckResult> out;
  Rng rng(opt.seed + 1);
  std::uniform_int_distribution<std::size_t> small(2, 6);

  double conv = 0.0, fc = 0.0, bil = 0.0;
  for (std::size_t t = 0; t < opt.oracle_trials; ++t) {
    const std::size_t n = 1 + t % 2, c = small(rng), h = small(rng) + 1, w = small(rng) + 2, f = small(rng);
    const std::size_t k = t % 3 == 0 ? 1 : 3, stride = 1 + t % 2;
    const Tensor in = uniform({n, c, h, w}, -1, 1, rng), ker = uniform({f, c, k, k}, -1, 1, rng),
                 b = uniform({f}, -1, 1, rng);
    std::size_t oh = 0, ow = 0;
    const auto ref = oracle::conv2d(vec(in), n, c, h, w, vec(ker), f, k, k, vec(b), stride, oh, ow);
    conv = std::max(conv, max_abs_diff(conv2d(in, ker, b, stride).values(), ref));

    const Tensor a = uniform({n + 1, c}, -1, 1, rng), m = uniform({c, f}, -1, 1, rng);
    fc = std::max(fc, max_abs_diff(fully_connected(a, m).values(), oracle::matmul(vec(a), vec(m), n + 1, c, f)));

    const Tensor img = uniform({h, w, 2}, 0, 1, rng);
    const Tensor pts = uniform({5, 2}, -1.0, static_cast<double>(std::max(h, w)), rng);
    const Tensor sampled = bilinear_sample(img, pts);
    const auto got = sampled.values();
    for (std::size_t p = 0; p < 5; ++p)
      for (std::size_t ch = 0; ch < 2; ++ch) {
        const double r = oracle::bilinear(vec(img), h, w, 2, ch, pts.values()[p * 2], pts.values()[p * 2 + 1]);
        bil = std::max(bil, std::fabs(got[p * 2 + ch] - r));
      }
  }
  out.push_back(make("oracle", "conv2d_vs_loop", conv, 1e-10, opt));
  out.push_back(make("oracle", "fully_connected_vs_matmul", fc, 1e-12, opt));
  out.push_back(make("oracle", "bilinear_sample_vs_formula", bil, 1e-12, opt));

  double sl = 0.0;
  for (std::size_t t = 0; t < opt.oracle_trials; ++t) {
    const std::size_t gx = 2 + t % 4, gy = 2 + (t / 2) % 4, L = 1 + t % 5, h = 5 + t % 7, w = 4 + t % 9;
    const std::size_t gz = t % 2 ? 8 : 16;
    const Tensor grid = uniform({gx, gy, gz, L}, -2, 2, rng);
    const Tensor img = uniform({h, w, 3}, 0, 1, rng);
    const Guidance g = compute_guidance(img);
    const auto got = slice(BilateralGrid{grid, 16, 256 / gz}, g).gamma;
    sl = std::max(sl, max_abs_diff(got.values(), oracle::slice(vec(grid), gx, gy, gz, L, vec(g.values), h, w)));
  }
  out.push_back(make("oracle", "slice_vs_triple_sum", sl, 1e-12, opt));

  double dc = 0.0;
  for (std::size_t t = 0; t < opt.oracle_trials; ++t) {
    const Tensor img = uniform({8, 8, 3}, 0, 1, rng);
    const Tensor ker = uniform({8, 8, 81}, -1, 1, rng);
    const Tensor off = map_offsets(uniform({8, 8, 18}, -4, 4, rng), t % 2 ? 15.0 : 3.0);
    const auto got = deformable_conv(img, ker, off, 3);
    dc = std::max(dc, max_abs_diff(got.values(), oracle::deformable_conv(vec(img), 8, 8, vec(ker), vec(off), 3)));
  }
  out.push_back(make("oracle", "deformable_conv_vs_loop", dc, 1e-10, opt));

  double lr = 0.0, ln = 0.0, le = 0.0, le2 = 0.0;
  LossConfig lc;
  LossConfig l2 = lc;
  l2.illum_norm = IllumNorm::l2;
  for (std::size_t t = 0; t < opt.oracle_trials; ++t) {
    const std::size_t h = 5 + t % 6, w = 6 + t % 5;
    const Tensor p = uniform({h, w, 3}, -0.2, 1.2, rng), q = uniform({h, w, 3}, 0, 1, rng);
    const Tensor n = uniform({h, w, 3}, -0.1, 0.1, rng), e = uniform({h, w, 3}, 0.1, 1, rng);
    lr = std::max(lr, std::fabs(loss_reflectance(p, q, lc).item() - oracle::loss_reflectance(vec(p), vec(q), h, w, 3, lc.lambda_g)));
    ln = std::max(ln, std::fabs(loss_noise(n, lc).item() - oracle::loss_noise(vec(n), h, w, 3, lc.sigma, lc.gauss_radius)));
    le = std::max(le, std::fabs(loss_illum(e, q, lc).item() -
                                oracle::loss_illum(vec(e), vec(q), h, w, 3, lc.theta, lc.epsilon, false)));
    le2 = std::max(le2, std::fabs(loss_illum(e, q, l2).item() -
                                  oracle::loss_illum(vec(e), vec(q), h, w, 3, lc.theta, lc.epsilon, true)));
  }
  out.push_back(make("oracle", "loss_reflectance_vs_direct", lr, 1e-10, opt));
  out.push_back(make("oracle", "loss_noise_vs_direct", ln, 1e-10, opt));
  out.push_back(make("oracle", "loss_illum_vs_direct", le, 1e-10, opt));
  out.push_back(make("oracle", "loss_illum_l2_vs_direct", le2, 1e-10, opt));
  return out;
}

std::vector<CheckResult> invariant_suite(const SuiteOptions& opt) {
  Rng rng(opt.seed + 2);
  double bound_violation = 0.0, recon = 0.0, annihilate = 0.0, offset_excess = 0.0;
  const PredictorConfig pcfg = tiny_predictor();
  for (std::size_t d = 0; d < opt.invariant_draws; ++d) {
    PipelineConfig pc;
    pc.illum_mode = d % 2 ? IllumMode::hard_clamp : IllumMode::smooth_reparam;
    pc.window = d % 3 == 0 ? 15.0 : 4.0;
    PredictorParams p = init_params(pcfg, layout_for(pc).channels(), opt.seed + d);
    // Stretch the projection so that saturated and floored regimes occur.
    const double gain = std::pow(10.0, static_cast<double>(d % 4));
    for (auto& v : p.get("projection.weight").mutable_values()) v *= gain;
    const std::size_t h = 12 + d % 9, w = 10 + d % 11;
    Tensor img = uniform({h, w, 3}, 0, 1, rng);
    if (d % 5 == 0) {
      // Include exact zeros, exact ones and sub-floor values.
      auto v = img.mutable_values();
      for (std::size_t i = 0; i < v.size(); i += 7) v[i] = (i / 7) % 3 == 0 ? 0.0 : (i / 7) % 3 == 1 ? 1.0 : 3e-5;
    }

    const auto dec = decompose(img, p, pc);
    const auto I = img.values(), E = dec.illumination.values(), N = dec.noise.values(), R = dec.reflectance.values();
    for (std::size_t i = 0; i < I.size(); ++i) {
      bound_violation = std::max({bound_violation, I[i] - E[i], E[i] - 1.0, kIlluminationFloor - E[i]});
      recon = std::max(recon, std::fabs(R[i] * E[i] + N[i] - I[i]));
    }

    const GridLayout layout = layout_for(pc);
    const auto coeffs = unpack_coeffs(dec.gamma, layout);
    const Tensor kernels = normalize_kernels(coeffs.kernels, layout.taps(), KernelNorm::zero_mean);
    std::uniform_real_distribution<double> u(0, 1);
    const Tensor flat = Tensor::full({h, w, 3}, u(rng));
    for (double v : deformable_conv(flat, kernels, dec.offsets, pc.kernel_size).values()) {
      annihilate = std::max(annihilate, std::fabs(v));
    }
    for (double v : dec.offsets.values()) offset_excess = std::max(offset_excess, std::fabs(v) - pc.window);
  }
  std::vector<CheckResult> out;
  out.push_back(make("invariant", "illumination_bounds", std::max(bound_violation, 0.0), 0.0, opt));
  out.push_back(make("invariant", "reconstruction_identity", recon, 1e-5, opt));
  out.push_back(make("invariant", "zero_mean_annihilates_constants", annihilate, 1e-6, opt));
  out.push_back(make("invariant", "offsets_within_window", std::max(offset_excess, 0.0), 0.0, opt));
  return out;
}

std::vector<CheckResult> metric_suite(const SuiteOptions& opt) {
  std::vector<CheckResult> out;
  Rng rng(opt.seed + 3);
  auto add = [&](const std::string& n, double err, double tol) { out.push_back(make("metric", n, err, tol, opt)); };

  const Tensor x = uniform({9, 10, 3}, 0, 0.9, rng);
  add("psnr_identical_sentinel", std::fabs(psnr(x, x) - kPsnrSentinel), 0.0);
  {
    const Tensor z = Tensor::zeros({9, 10, 3});
    add("psnr_offset_20db", std::fabs(psnr(z, Tensor::full({9, 10, 3}, 0.1)) - 20.0), 1e-12);
  }
  const Tensor y = uniform({9, 10, 3}, 0, 1, rng);
  add("psnr_symmetric", std::fabs(psnr(x, y) - psnr(y, x)), 0.0);
  add("psnr_vs_direct", std::fabs(psnr(x, y) - oracle::psnr(vec(x), vec(y))), 1e-9);

  add("ssim_identical", std::fabs(ssim(x, x) - 1.0), 0.0);
  add("ssim_equal_constants", std::fabs(ssim(Tensor::full({12, 12, 3}, 0.5), Tensor::full({12, 12, 3}, 0.5)) - 1.0), 0.0);
  {
    const double c1 = 1e-4;
    const double closed = (2 * 0.2 * 0.8 + c1) / (0.04 + 0.64 + c1);
    add("ssim_constant_closed_form",
        std::fabs(ssim(Tensor::full({12, 12, 3}, 0.2), Tensor::full({12, 12, 3}, 0.8)) - closed), 1e-9);
  }
  {
    const Tensor a = uniform({16, 14, 3}, 0, 1, rng), b = uniform({16, 14, 3}, 0, 1, rng);
    add("ssim_symmetric", std::fabs(ssim(a, b) - ssim(b, a)), 1e-9);
    add("ssim_vs_direct", std::fabs(ssim(a, b) - oracle::ssim(vec(a), vec(b), 16, 14, 3)), 1e-9);
  }

  add("loe_identity", loe(x, x), 0.0);
  add("loe_two_pixel",
      std::fabs(loe(Tensor::from_data({1, 2, 3}, {0.2, 0.2, 0.2, 0.8, 0.8, 0.8}),
                    Tensor::from_data({1, 2, 3}, {0.8, 0.8, 0.8, 0.2, 0.2, 0.2})) -
                1.0),
      0.0);
  {
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      const Tensor a = uniform({8, 8, 3}, 0, 1, rng), b = uniform({8, 8, 3}, 0, 1, rng);
      worst = std::max(worst, std::fabs(loe(a, b) - oracle::loe(vec(a), vec(b), 8, 8, 3, 100)));
      const Tensor c = uniform({31, 23, 3}, 0, 1, rng), e = uniform({31, 23, 3}, 0, 1, rng);
      worst = std::max(worst, std::fabs(loe(c, e, 10) - oracle::loe(vec(c), vec(e), 31, 23, 3, 10)));
    }
    add("loe_vs_pairwise", worst, 1e-9);
  }
  {
    double worst = 0.0;
    std::uniform_int_distribution<int> byte(0, 255);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> v(20 * 17 * 3), e(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = byte(rng) / 255.0;
        e[i] = 0.5 * v[i] + 0.1;
      }
      worst = std::max(worst, loe(Tensor::from_data({20, 17, 3}, v), Tensor::from_data({20, 17, 3}, e)));
    }
    add("loe_affine_invariance", worst, 0.0);
  }
  return out;
}

std::vector<CheckResult> run_selftest(const SuiteOptions& opt) {
  std::vector<CheckResult> all;
  for (auto* suite : {&gradient_suite, &oracle_suite, &invariant_suite, &metric_suite}) {
    auto r = suite(opt);
    all.insert(all.end(), r.begin(), r.end());
  }
  return all;
}

std::string format_results(const std::vector<CheckResult>& results) {
  std::string out;
  char buf[256];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%-4s  %-9s  %-34s  err=%.3e  tol=%.1e\n", r.passed ? "PASS" : "FAIL",
                  r.group.c_str(), r.name.c_str(), r.error, r.tolerance);
    out += buf;
  }
  return out;
}

}  // namespace dbr
