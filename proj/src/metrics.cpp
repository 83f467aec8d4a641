#include "dbr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "dbr/errors.hpp"
#include "dbr/ops.hpp"

namespace dbr {

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_same(const Tensor& x, const Tensor& y, const char* op) {
  if (x.shape() != y.shape() || x.rank() != 3) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(x.shape()) + " vs " +
                                shape_str(y.shape()));
  }
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

double psnr(const Tensor& x, const Tensor& y) {
  check_same(x, y, "psnr");
  const auto a = x.values();
  const auto b = y.values();
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrSentinel;
  return 10.0 * std::log10(1.0 / mse);
}

double psnr(const ImageF32& x, const ImageF32& y) { return psnr(to_tensor(x), to_tensor(y)); }

std::vector<double> ssim_window(std::size_t height, std::size_t width, std::size_t& size) {
  size = std::min<std::size_t>({11, height, width});
  if (size % 2 == 0) --size;
  if (size == 0) throw std::invalid_argument("ssim: empty image");
  std::vector<double> w(size * size);
  const double r = static_cast<double>(size / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      const double dy = static_cast<double>(i) - r, dx = static_cast<double>(j) - r;
      w[i * size + j] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
      total += w[i * size + j];
    }
  for (auto& v : w) v /= total;
  return w;
}

double ssim(const Tensor& x, const Tensor& y) {
  check_same(x, y, "ssim");
  const std::size_t H = x.dim(0), W = x.dim(1), C = x.dim(2);
  std::size_t k = 0;
  const auto win = ssim_window(H, W, k);
  const auto a = x.values();
  const auto b = y.values();
  const std::size_t Ho = H - k + 1, Wo = W - k + 1;
  double total = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    double channel = 0.0;
    for (std::size_t i = 0; i < Ho; ++i) {
      for (std::size_t j = 0; j < Wo; ++j) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (std::size_t u = 0; u < k; ++u) {
          for (std::size_t v = 0; v < k; ++v) {
            const double w = win[u * k + v];
            const double p = a[((i + u) * W + j + v) * C + c];
            const double q = b[((i + u) * W + j + v) * C + c];
            mx += w * p;
            my += w * q;
            sxx += w * p * p;
            syy += w * q * q;
            sxy += w * p * q;
          }
        }
        const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
        channel += ((2 * mx * my + kC1) * (2 * cxy + kC2)) / ((mx * mx + my * my + kC1) * (vx + vy + kC2));
      }
    }
    total += channel / static_cast<double>(Ho * Wo);
  }
  return total / static_cast<double>(C);
}

double ssim(const ImageF32& x, const ImageF32& y) { return ssim(to_tensor(x), to_tensor(y)); }

Tensor ssim_tensor(const Tensor& x, const Tensor& y) {
  check_same(x, y, "ssim_tensor");
  std::size_t k = 0;
  const auto win = ssim_window(x.dim(0), x.dim(1), k);
  auto f = [&](const Tensor& t) { return filter2d_valid(t, win, k, k); };
  const Tensor mx = f(x), my = f(y);
  const Tensor mxx = mul(mx, mx), myy = mul(my, my), mxy = mul(mx, my);
  const Tensor vx = sub(f(mul(x, x)), mxx);
  const Tensor vy = sub(f(mul(y, y)), myy);
  const Tensor cxy = sub(f(mul(x, y)), mxy);
  const Tensor num = mul(add_scalar(scale(mxy, 2.0), kC1), add_scalar(scale(cxy, 2.0), kC2));
  const Tensor den = mul(add_scalar(add(mxx, myy), kC1), add_scalar(add(vx, vy), kC2));
  return reduce_mean(div(num, den));
}

double loe(const Tensor& original, const Tensor& enhanced, std::size_t down) {
  if (original.rank() != 3 || enhanced.rank() != 3 || original.dim(0) != enhanced.dim(0) ||
      original.dim(1) != enhanced.dim(1)) {
    throw std::invalid_argument("loe: dimension mismatch " + shape_str(original.shape()) + " vs " +
                                shape_str(enhanced.shape()));
  }
  if (down == 0) throw std::invalid_argument("loe: down must be positive");
  const std::size_t H = original.dim(0), W = original.dim(1);
  const std::size_t dh = std::min(H, down), dw = std::min(W, down);
  auto lightness = [&](const Tensor& t) {
    const std::size_t C = t.dim(2);
    const auto v = t.values();
    std::vector<double> l;
    l.reserve(dh * dw);
    for (std::size_t i = 0; i < dh; ++i) {
      const std::size_t r = i * H / dh;
      for (std::size_t j = 0; j < dw; ++j) {
        const std::size_t c0 = j * W / dw;
        const double* px = v.data() + (r * W + c0) * C;
        l.push_back(*std::max_element(px, px + C));
      }
    }
    return l;
  };
  const auto la = lightness(original);
  const auto lb = lightness(enhanced);
  const std::size_t m = la.size();
  std::size_t mismatches = 0;
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t q = 0; q < m; ++q) {
      mismatches += static_cast<std::size_t>((la[p] >= la[q]) != (lb[p] >= lb[q]));
    }
  }
  return static_cast<double>(mismatches) / static_cast<double>(m);
}

double loe(const ImageF32& original, const ImageF32& enhanced, std::size_t down) {
  return loe(to_tensor(original), to_tensor(enhanced), down);
}

std::vector<Metric> parse_metric_list(const std::string& text) {
  std::vector<Metric> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    Metric m;
    if (item == "psnr") {
      m = Metric::psnr;
    } else if (item == "ssim") {
      m = Metric::ssim;
    } else if (item == "loe") {
      m = Metric::loe;
    } else {
      throw UsageError("unknown metric '" + item + "' (expected psnr, ssim, loe)");
    }
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  if (out.empty()) throw UsageError("empty metric list");
  return out;
}

std::string metric_column(Metric m) {
  switch (m) {
    case Metric::psnr:
      return "psnr_db";
    case Metric::ssim:
      return "ssim";
    case Metric::loe:
      return "loe";
  }
  return "";
}

std::string MetricReport::format_row(const MetricRow& row) const {
  std::string line = row.id;
  for (Metric m : metrics) {
    const auto& v = m == Metric::psnr ? row.psnr_db : (m == Metric::ssim ? row.ssim : row.loe);
    line += ',';
    line += v ? fmt(*v) : "";
  }
  return line;
}

std::string MetricReport::to_csv() const {
  std::string out = "id";
  for (Metric m : metrics) out += "," + metric_column(m);
  out += '\n';
  for (const auto& r : rows) out += format_row(r) + '\n';
  out += format_row(mean) + '\n';
  return out;
}

MetricReport evaluate(const PairedDataset& dataset, const Enhancer& enhancer, const std::vector<Metric>& metrics) {
  if (metrics.empty()) throw UsageError("evaluate: empty metric list");
  if (dataset.pairs.empty()) throw DataError("evaluate: empty dataset");
  MetricReport report;
  report.metrics = metrics;
  auto want = [&](Metric m) { return std::find(metrics.begin(), metrics.end(), m) != metrics.end(); };
  double sp = 0, ss = 0, sl = 0;
  for (const auto& pair : dataset.pairs) {
    const ImageF32 out = enhancer(pair.low);
    MetricRow row;
    row.id = pair.id;
    if (want(Metric::psnr)) sp += *(row.psnr_db = psnr(out, pair.reference));
    if (want(Metric::ssim)) ss += *(row.ssim = ssim(out, pair.reference));
    if (want(Metric::loe)) sl += *(row.loe = loe(pair.low, out));
    report.rows.push_back(std::move(row));
  }
  const double n = static_cast<double>(report.rows.size());
  report.mean.id = "MEAN";
  if (want(Metric::psnr)) report.mean.psnr_db = sp / n;
  if (want(Metric::ssim)) report.mean.ssim = ss / n;
  if (want(Metric::loe)) report.mean.loe = sl / n;
  return report;
}

}  // namespace dbr
