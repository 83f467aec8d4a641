#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dbr/image.hpp"
#include "dbr/tensor.hpp"

namespace dbr {

/// Reported PSNR for identical images.
inline constexpr double kPsnrSentinel = 99.0;

/// 10 log10(1 / MSE) for images in [0, 1].
double psnr(const Tensor& x, const Tensor& y);
double psnr(const ImageF32& x, const ImageF32& y);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, valid positions only, averaged over channels.
/// Images smaller than 11 pixels shrink the window to the largest odd size
/// that fits.
double ssim(const Tensor& x, const Tensor& y);
double ssim(const ImageF32& x, const ImageF32& y);

/// Differentiable SSIM built from autodiff primitives (same definition).
Tensor ssim_tensor(const Tensor& x, const Tensor& y);

/// Normalized Gaussian window used by SSIM for an H x W image; `size` is set
/// to the window side.
std::vector<double> ssim_window(std::size_t height, std::size_t width, std::size_t& size);

/// Lightness order error. Lightness is the per-pixel RGB maximum; both
/// images are sampled on a uniform nearest-neighbour grid of at most
/// down x down pixels, then
///   LOE = (1/m) sum_x sum_y [ (L(x) >= L(y)) xor (L'(x) >= L'(y)) ].
double loe(const Tensor& original, const Tensor& enhanced, std::size_t down = 100);
double loe(const ImageF32& original, const ImageF32& enhanced, std::size_t down = 100);

enum class Metric { psnr, ssim, loe };

/// Parses a comma-separated list such as "psnr,ssim,loe".
std::vector<Metric> parse_metric_list(const std::string& text);
std::string metric_column(Metric m);

struct MetricRow {
  std::string id;
  std::optional<double> psnr_db;
  std::optional<double> ssim;
  std::optional<double> loe;
};

struct MetricReport {
  std::vector<Metric> metrics;
  std::vector<MetricRow> rows;
  MetricRow mean;

  /// Header `id,<metric columns>`, one row per pair, final MEAN row.
  std::string to_csv() const;
  std::string format_row(const MetricRow& row) const;
};

using Enhancer = std::function<ImageF32(const ImageF32&)>;

/// PSNR/SSIM compare the enhanced image with the reference; LOE compares it
/// with the low-light input.
MetricReport evaluate(const PairedDataset& dataset, const Enhancer& enhancer, const std::vector<Metric>& metrics);

}  // namespace dbr
