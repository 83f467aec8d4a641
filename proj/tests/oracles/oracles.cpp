#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace dbr::oracle {

namespace {

double hat(double s) { return std::max(1.0 - std::abs(s), 0.0); }

// Value at (i, j, c) with coordinates clamped to the image.
double pixel(const Vec& img, long h, long w, std::size_t channels, long i, long j, std::size_t c) {
  i = std::clamp(i, 0L, h - 1);
  j = std::clamp(j, 0L, w - 1);
  return img[(static_cast<std::size_t>(i) * static_cast<std::size_t>(w) + static_cast<std::size_t>(j)) * channels + c];
}

}  // namespace

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  return pairwise_sum(v, n / 2) + pairwise_sum(v + n / 2, n - n / 2);
}

std::pair<Vec, Vec> spatial_diff(const Vec& x, std::size_t h, std::size_t w, std::size_t c) {
  Vec gx(x.size(), 0.0), gy(x.size(), 0.0);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const auto at = [&](std::size_t a, std::size_t b) { return x[(a * w + b) * c + ch]; };
        if (j + 1 < w) gx[(i * w + j) * c + ch] = at(i, j + 1) - at(i, j);
        if (i + 1 < h) gy[(i * w + j) * c + ch] = at(i + 1, j) - at(i, j);
      }
  return {gx, gy};
}

Vec conv2d(const Vec& in, std::size_t n, std::size_t c, std::size_t h, std::size_t w, const Vec& kernel,
           std::size_t f, std::size_t kh, std::size_t kw, const Vec& bias, std::size_t stride, std::size_t& oh,
           std::size_t& ow) {
  oh = (h + stride - 1) / stride;
  ow = (w + stride - 1) / stride;
  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  Vec out(n * f * oh * ow, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < f; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          double s = bias.empty() ? 0.0 : bias[o];
          for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) {
                const long yy = static_cast<long>(y * stride) + static_cast<long>(u) - ph;
                const long xx = static_cast<long>(x * stride) + static_cast<long>(v) - pw;
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) continue;
                s += kernel[((o * c + ci) * kh + u) * kw + v] *
                     in[((b * c + ci) * h + static_cast<std::size_t>(yy)) * w + static_cast<std::size_t>(xx)];
              }
          out[((b * f + o) * oh + y) * ow + x] = s;
        }
  return out;
}

Vec matmul(const Vec& a, const Vec& b, std::size_t n, std::size_t d, std::size_t m) {
  Vec out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < d; ++k) out[i * m + j] += a[i * d + k] * b[k * m + j];
  return out;
}

double bilinear(const Vec& img, std::size_t h, std::size_t w, std::size_t channels, std::size_t c, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const double fx = std::floor(x), fy = std::floor(y);
  const double ax = x - fx, ay = y - fy;
  const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  return (1 - ay) * (1 - ax) * pixel(img, H, W, channels, y0, x0, c) +
         (1 - ay) * ax * pixel(img, H, W, channels, y0, x0 + 1, c) +
         ay * (1 - ax) * pixel(img, H, W, channels, y0 + 1, x0, c) + ay * ax * pixel(img, H, W, channels, y0 + 1, x0 + 1, c);
}

Vec slice(const Vec& grid, std::size_t gx, std::size_t gy, std::size_t gz, std::size_t l, const Vec& guide,
          std::size_t h, std::size_t w) {
  Vec out(h * w * l, 0.0);
  for (std::size_t py = 0; py < h; ++py)
    for (std::size_t px = 0; px < w; ++px) {
      const double ux = static_cast<double>(py) * static_cast<double>(gx - 1) / static_cast<double>(h - 1);
      const double uy = static_cast<double>(px) * static_cast<double>(gy - 1) / static_cast<double>(w - 1);
      const double uz = guide[py * w + px] * static_cast<double>(gz - 1);
      for (std::size_t i = 0; i < gx; ++i)
        for (std::size_t j = 0; j < gy; ++j)
          for (std::size_t k = 0; k < gz; ++k) {
            const double wt = hat(ux - static_cast<double>(i)) * hat(uy - static_cast<double>(j)) *
                              hat(uz - static_cast<double>(k));
            for (std::size_t c = 0; c < l; ++c) out[(py * w + px) * l + c] += wt * grid[((i * gy + j) * gz + k) * l + c];
          }
    }
  return out;
}

Vec deformable_conv(const Vec& img, std::size_t h, std::size_t w, const Vec& kernels, const Vec& offsets,
                    std::size_t k) {
  const std::size_t taps = k * k;
  const long half = static_cast<long>(k / 2);
  Vec out(h * w * 3, 0.0);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      const std::size_t p = i * w + j;
      for (std::size_t t = 0; t < taps; ++t) {
        const long a = static_cast<long>(t / k) - half, b = static_cast<long>(t % k) - half;
        double sx = static_cast<double>(static_cast<long>(j) + b) + offsets[(p * taps + t) * 2 + 0];
        double sy = static_cast<double>(static_cast<long>(i) + a) + offsets[(p * taps + t) * 2 + 1];
        sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
        sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
        double sample[3] = {0, 0, 0};
        for (std::size_t qy = 0; qy < h; ++qy)
          for (std::size_t qx = 0; qx < w; ++qx) {
            const double wt = hat(sx - static_cast<double>(qx)) * hat(sy - static_cast<double>(qy));
            if (wt == 0.0) continue;
            for (std::size_t d = 0; d < 3; ++d) sample[d] += wt * img[(qy * w + qx) * 3 + d];
          }
        for (std::size_t c = 0; c < 3; ++c)
          for (std::size_t d = 0; d < 3; ++d) out[p * 3 + c] += kernels[(p * taps + t) * 9 + c * 3 + d] * sample[d];
      }
    }
  return out;
}

namespace {

double dx(const Vec& v, std::size_t w, std::size_t c, std::size_t i, std::size_t j, std::size_t ch) {
  return j + 1 < w ? v[(i * w + j + 1) * c + ch] - v[(i * w + j) * c + ch] : 0.0;
}
double dy(const Vec& v, std::size_t h, std::size_t w, std::size_t c, std::size_t i, std::size_t j, std::size_t ch) {
  return i + 1 < h ? v[((i + 1) * w + j) * c + ch] - v[(i * w + j) * c + ch] : 0.0;
}

}  // namespace

double loss_reflectance(const Vec& pred, const Vec& target, std::size_t h, std::size_t w, std::size_t c,
                        double lambda_g) {
  double fid = 0.0, grad = 0.0;
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t q = (i * w + j) * c + ch;
        fid += std::abs(pred[q] - target[q]);
        grad += std::abs(dx(pred, w, c, i, j, ch) - dx(target, w, c, i, j, ch));
        grad += std::abs(dy(pred, h, w, c, i, j, ch) - dy(target, h, w, c, i, j, ch));
      }
  const double n = static_cast<double>(h * w * c);
  return fid / n + lambda_g * grad / (2.0 * n);
}

double loss_noise(const Vec& noise, std::size_t h, std::size_t w, std::size_t c, double sigma, std::size_t radius) {
  const long r = static_cast<long>(radius);
  double norm = 0.0;
  for (long u = -r; u <= r; ++u)
    for (long v = -r; v <= r; ++v) norm += std::exp(-static_cast<double>(u * u + v * v) / (2 * sigma * sigma));
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  auto grad_at = [&](bool horizontal, long i, long j, std::size_t ch) {
    i = std::clamp(i, 0L, H - 1);
    j = std::clamp(j, 0L, W - 1);
    const auto ii = static_cast<std::size_t>(i), jj = static_cast<std::size_t>(j);
    return horizontal ? dx(noise, w, c, ii, jj, ch) : dy(noise, h, w, c, ii, jj, ch);
  };
  double total = 0.0;
  for (long i = 0; i < H; ++i)
    for (long j = 0; j < W; ++j)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (bool horizontal : {true, false}) {
          double s = 0.0;
          for (long u = -r; u <= r; ++u)
            for (long v = -r; v <= r; ++v)
              s += std::exp(-static_cast<double>(u * u + v * v) / (2 * sigma * sigma)) / norm *
                   grad_at(horizontal, i + u, j + v, ch);
          total += std::abs(s);
        }
  return total / static_cast<double>(h * w);
}

double loss_illum(const Vec& illum, const Vec& img, std::size_t h, std::size_t w, std::size_t c, double theta,
                  double eps, bool squared) {
  double total = 0.0;
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      double gi = 0.0, ge = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        gi += std::abs(dx(img, w, c, i, j, ch)) + std::abs(dy(img, h, w, c, i, j, ch));
        const double ex = dx(illum, w, c, i, j, ch), ey = dy(illum, h, w, c, i, j, ch);
        ge += squared ? ex * ex + ey * ey : std::abs(ex) + std::abs(ey);
      }
      total += ge / (std::pow(gi, theta) + eps);
    }
  return total / static_cast<double>(h * w);
}

double psnr(const Vec& x, const Vec& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  const double mse = s / static_cast<double>(x.size());
  return mse == 0.0 ? 99.0 : -10.0 * std::log10(mse);
}

double ssim(const Vec& x, const Vec& y, std::size_t h, std::size_t w, std::size_t c) {
  std::size_t k = std::min<std::size_t>({11, h, w});
  if (k % 2 == 0) --k;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const long r = static_cast<long>(k / 2);
  double gsum = 0.0;
  for (long u = -r; u <= r; ++u)
    for (long v = -r; v <= r; ++v) gsum += std::exp(-static_cast<double>(u * u + v * v) / 4.5);
  double total = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    std::size_t count = 0;
    for (long cy = r; cy + r < static_cast<long>(h); ++cy)
      for (long cx = r; cx + r < static_cast<long>(w); ++cx) {
        double mx = 0, my = 0;
        for (long u = -r; u <= r; ++u)
          for (long v = -r; v <= r; ++v) {
            const double g = std::exp(-static_cast<double>(u * u + v * v) / 4.5) / gsum;
            const std::size_t q = (static_cast<std::size_t>(cy + u) * w + static_cast<std::size_t>(cx + v)) * c + ch;
            mx += g * x[q];
            my += g * y[q];
          }
        // Second moments about the local means.
        double vx = 0, vy = 0, cov = 0;
        for (long u = -r; u <= r; ++u)
          for (long v = -r; v <= r; ++v) {
            const double g = std::exp(-static_cast<double>(u * u + v * v) / 4.5) / gsum;
            const std::size_t q = (static_cast<std::size_t>(cy + u) * w + static_cast<std::size_t>(cx + v)) * c + ch;
            vx += g * (x[q] - mx) * (x[q] - mx);
            vy += g * (y[q] - my) * (y[q] - my);
            cov += g * (x[q] - mx) * (y[q] - my);
          }
        acc += (2 * mx * my + c1) / (mx * mx + my * my + c1) * (2 * cov + c2) / (vx + vy + c2);
        ++count;
      }
    total += acc / static_cast<double>(count);
  }
  return total / static_cast<double>(c);
}

double loe(const Vec& a, const Vec& b, std::size_t h, std::size_t w, std::size_t c, std::size_t down) {
  const std::size_t dh = std::min(h, down), dw = std::min(w, down);
  std::vector<double> la, lb;
  for (std::size_t i = 0; i < dh; ++i)
    for (std::size_t j = 0; j < dw; ++j) {
      const std::size_t r = (i * h) / dh, col = (j * w) / dw;
      double ma = -1e300, mb = -1e300;
      for (std::size_t ch = 0; ch < c; ++ch) {
        ma = std::max(ma, a[(r * w + col) * c + ch]);
        mb = std::max(mb, b[(r * w + col) * c + ch]);
      }
      la.push_back(ma);
      lb.push_back(mb);
    }
  const std::size_t m = la.size();
  std::size_t count = 0;
  for (std::size_t p = 0; p < m; ++p)
    for (std::size_t q = p + 1; q < m; ++q) {
      // The ordered pair (p, q) and its mirror (q, p) are judged separately.
      if ((la[p] >= la[q]) != (lb[p] >= lb[q])) ++count;
      if ((la[q] >= la[p]) != (lb[q] >= lb[p])) ++count;
    }
  return static_cast<double>(count) / static_cast<double>(m);
}

}  // namespace dbr::oracle
