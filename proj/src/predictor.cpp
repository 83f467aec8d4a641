#include "dbr/predictor.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "dbr/errors.hpp"
#include "dbr/ops.hpp"

namespace dbr {

namespace {

std::size_t halve(std::size_t n) { return (n + 1) / 2; }

}  // namespace

std::size_t PredictorConfig::grid_size() const {
  std::size_t s = input_size;
  for (std::size_t i = 0; i < local_widths.size(); ++i) s = halve(s);
  return s;
}

std::size_t PredictorConfig::global_size() const { return halve(halve(grid_size())); }

void PredictorConfig::validate() const {
  if (input_size < 2) throw UsageError("predictor: input_size must be >= 2");
  if (local_widths.empty()) throw UsageError("predictor: local_widths must not be empty");
  if (fc_widths.empty()) throw UsageError("predictor: fc_widths must not be empty");
  for (auto w : local_widths)
    if (w == 0) throw UsageError("predictor: zero layer width");
  for (auto w : fc_widths)
    if (w == 0) throw UsageError("predictor: zero layer width");
  if (fc_widths.back() != feature_width()) {
    throw UsageError("predictor: last fc width must equal the last local width (" + std::to_string(feature_width()) +
                     ")");
  }
  if (grid_size() < 2) throw UsageError("predictor: input_size too small for the local stack");
  if (grid_depth < 2 || 256 % grid_depth != 0) throw UsageError("predictor: grid_depth must divide 256 and be >= 2");
}

UnpackedCoeffs unpack_coeffs(const CoefficientMap& gamma, const GridLayout& layout) {
  const Tensor& g = gamma.gamma;
  if (g.rank() != 3 || g.dim(2) != layout.channels()) {
    throw std::invalid_argument("unpack_coeffs: expected " + std::to_string(layout.channels()) +
                                " channels, got shape " + shape_str(g.shape()));
  }
  UnpackedCoeffs out;
  out.affine = narrow(g, 2, layout.affine_begin(), 12);
  if (layout.noise_affine) out.noise_affine = narrow(g, 2, layout.noise_affine_begin(), 12);
  if (layout.kernels) out.kernels = narrow(g, 2, layout.kernels_begin(), 9 * layout.taps());
  if (layout.offsets) out.raw_offsets = narrow(g, 2, layout.offsets_begin(), 2 * layout.taps());
  return out;
}

CoefficientMap pack_coeffs(const UnpackedCoeffs& blocks, const GridLayout& layout) {
  std::vector<Tensor> parts{blocks.affine};
  if (layout.noise_affine) parts.push_back(blocks.noise_affine);
  if (layout.kernels) parts.push_back(blocks.kernels);
  if (layout.offsets) parts.push_back(blocks.raw_offsets);
  for (const auto& p : parts)
    if (!p.defined()) throw std::invalid_argument("pack_coeffs: missing block for layout");
  return {concat(parts, 2)};
}

const Tensor& PredictorParams::get(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw std::out_of_range("predictor parameter not found: " + name);
}

Tensor& PredictorParams::get(const std::string& name) {
  for (auto& [n, t] : tensors)
    if (n == name) return t;
  throw std::out_of_range("predictor parameter not found: " + name);
}

std::size_t PredictorParams::count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.numel();
  return n;
}

void PredictorParams::zero_grad() {
  for (auto& [name, t] : tensors) t.zero_grad();
}

PredictorParams PredictorParams::clone() const {
  PredictorParams out;
  out.config = config;
  out.grid_channels = grid_channels;
  for (const auto& [name, t] : tensors) {
    std::vector<double> v(t.values().begin(), t.values().end());
    out.tensors.emplace_back(name, Tensor::from_data(t.shape(), std::move(v), t.requires_grad()));
  }
  return out;
}

std::vector<std::pair<std::string, Shape>> parameter_shapes(const PredictorConfig& cfg, std::size_t grid_channels) {
  cfg.validate();
  std::vector<std::pair<std::string, Shape>> shapes;
  std::size_t in = 3;
  for (std::size_t i = 0; i < cfg.local_widths.size(); ++i) {
    const std::size_t out = cfg.local_widths[i];
    shapes.push_back({"local" + std::to_string(i) + ".weight", {out, in, 3, 3}});
    shapes.push_back({"local" + std::to_string(i) + ".bias", {out}});
    in = out;
  }
  const std::size_t F = cfg.feature_width();
  for (int i = 0; i < 2; ++i) {
    shapes.push_back({"local_head" + std::to_string(i) + ".weight", {F, F, 3, 3}});
    shapes.push_back({"local_head" + std::to_string(i) + ".bias", {F}});
  }
  for (int i = 0; i < 2; ++i) {
    shapes.push_back({"global_conv" + std::to_string(i) + ".weight", {F, F, 3, 3}});
    shapes.push_back({"global_conv" + std::to_string(i) + ".bias", {F}});
  }
  std::size_t d = F * cfg.global_size() * cfg.global_size();
  for (std::size_t i = 0; i < cfg.fc_widths.size(); ++i) {
    shapes.push_back({"global_fc" + std::to_string(i) + ".weight", {d, cfg.fc_widths[i]}});
    shapes.push_back({"global_fc" + std::to_string(i) + ".bias", {cfg.fc_widths[i]}});
    d = cfg.fc_widths[i];
  }
  shapes.push_back({"projection.weight", {cfg.grid_depth * grid_channels, F, 1, 1}});
  shapes.push_back({"projection.bias", {cfg.grid_depth * grid_channels}});
  return shapes;
}

PredictorParams zero_params(const PredictorConfig& cfg, std::size_t grid_channels) {
  PredictorParams p;
  p.config = cfg;
  p.grid_channels = grid_channels;
  for (auto& [name, shape] : parameter_shapes(cfg, grid_channels)) {
    p.tensors.emplace_back(name, Tensor::zeros(shape, true));
  }
  return p;
}

PredictorParams init_params(const PredictorConfig& cfg, std::size_t grid_channels, std::uint64_t seed) {
  PredictorParams p = zero_params(cfg, grid_channels);
  std::mt19937_64 rng(seed);
  for (auto& [name, t] : p.tensors) {
    if (t.rank() < 2) continue;  // biases stay zero
    // conv: F x C x kh x kw, fan_in = C*kh*kw; fc: D x M, fan_in = D.
    const std::size_t fan_in = t.rank() == 4 ? t.dim(1) * t.dim(2) * t.dim(3) : t.dim(0);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (auto& v : t.mutable_values()) v = dist(rng);
  }
  return p;
}

Tensor downsample_input(const Tensor& img, std::size_t size) {
  if (img.rank() != 3 || img.dim(2) != 3) {
    throw std::invalid_argument("downsample_input: expected H x W x 3, got " + shape_str(img.shape()));
  }
  if (img.dim(0) == size && img.dim(1) == size) return img;
  return resize_bilinear(img, size, size);
}

BilateralGrid predict_grid(const PredictorParams& params, const Tensor& lowres) {
  const PredictorConfig& cfg = params.config;
  const std::size_t S = cfg.input_size;
  if (lowres.rank() != 3 || lowres.dim(0) != S || lowres.dim(1) != S || lowres.dim(2) != 3) {
    throw std::invalid_argument("predict_grid: expected " + std::to_string(S) + "x" + std::to_string(S) +
                                "x3 input, got " + shape_str(lowres.shape()));
  }
  const std::size_t L = params.grid_channels;
  const std::size_t G = cfg.grid_size();
  const std::size_t F = cfg.feature_width();
  auto w = [&](const std::string& n) -> const Tensor& { return params.get(n); };

  Tensor x = reshape(permute(lowres, {2, 0, 1}), {1, 3, S, S});
  for (std::size_t i = 0; i < cfg.local_widths.size(); ++i) {
    const std::string n = "local" + std::to_string(i);
    x = relu(conv2d(x, w(n + ".weight"), w(n + ".bias"), 2));
  }
  const Tensor splat = x;

  Tensor local = splat;
  for (int i = 0; i < 2; ++i) {
    const std::string n = "local_head" + std::to_string(i);
    local = relu(conv2d(local, w(n + ".weight"), w(n + ".bias"), 1));
  }

  Tensor global = splat;
  for (int i = 0; i < 2; ++i) {
    const std::string n = "global_conv" + std::to_string(i);
    global = relu(conv2d(global, w(n + ".weight"), w(n + ".bias"), 2));
  }
  global = reshape(global, {1, global.numel()});
  for (std::size_t i = 0; i < cfg.fc_widths.size(); ++i) {
    const std::string n = "global_fc" + std::to_string(i);
    global = relu(fully_connected(global, w(n + ".weight"), w(n + ".bias")));
  }

  Tensor fused = relu(add(local, reshape(global, {1, F, 1, 1})));
  Tensor out = conv2d(fused, w("projection.weight"), w("projection.bias"), 1);
  // Channel c = k * L + l holds range slice k, coefficient l.
  Tensor grid = permute(reshape(out, {cfg.grid_depth, L, G, G}), {2, 3, 0, 1});
  return BilateralGrid{grid, S / G, 256 / cfg.grid_depth};
}

}  // namespace dbr
