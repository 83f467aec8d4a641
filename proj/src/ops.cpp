#include "dbr/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dbr/errors.hpp"

namespace dbr {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Flat source indices of `a` and `b` for every element of the broadcast result.
struct Broadcast {
  Shape shape;
  bool same = false;
  std::vector<std::size_t> ia, ib;
};

Broadcast broadcast(const Shape& sa, const Shape& sb, const char* op) {
  Broadcast bc;
  if (sa == sb) {
    bc.shape = sa;
    bc.same = true;
    return bc;
  }
  const std::size_t r = std::max(sa.size(), sb.size());
  Shape pa(r, 1), pb(r, 1);
  std::copy(sa.begin(), sa.end(), pa.begin() + static_cast<std::ptrdiff_t>(r - sa.size()));
  std::copy(sb.begin(), sb.end(), pb.begin() + static_cast<std::ptrdiff_t>(r - sb.size()));
  bc.shape.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) {
      throw std::invalid_argument(std::string(op) + ": cannot broadcast " + shape_str(sa) + " with " +
                                  shape_str(sb));
    }
    bc.shape[i] = std::max(pa[i], pb[i]);
  }
  std::vector<std::size_t> stra(r), strb(r);
  std::size_t s1 = 1, s2 = 1;
  for (std::size_t i = r; i-- > 0;) {
    stra[i] = pa[i] == 1 ? 0 : s1;
    strb[i] = pb[i] == 1 ? 0 : s2;
    s1 *= pa[i];
    s2 *= pb[i];
  }
  const std::size_t n = shape_numel(bc.shape);
  bc.ia.resize(n);
  bc.ib.resize(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t k = 0; k < n; ++k) {
    bc.ia[k] = oa;
    bc.ib[k] = ob;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      oa += stra[d];
      ob += strb[d];
      if (idx[d] < bc.shape[d]) break;
      oa -= stra[d] * idx[d];
      ob -= strb[d] * idx[d];
      idx[d] = 0;
    }
  }
  return bc;
}

// Shared driver for binary ops. `f` computes the value, `da`/`db` the local
// partial derivatives given (a, b, out).
template <class F, class DA, class DB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  auto bc = std::make_shared<Broadcast>(broadcast(a.shape(), b.shape(), name));
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t n = shape_numel(bc->shape);
  std::vector<double> out(n);
  if (bc->same) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i], bv[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[bc->ia[i]], bv[bc->ib[i]]);
  }
  auto outv = std::make_shared<std::vector<double>>(out);
  return make_op(name, bc->shape, std::move(out), {a, b},
                 [bc, outv, da, db](std::span<const double> g, std::vector<Tensor>& p) {
                   const auto av = p[0].values();
                   const auto bv = p[1].values();
                   const std::size_t n = g.size();
                   if (p[0].requires_grad()) {
                     auto ga = p[0].grad_buffer();
                     for (std::size_t i = 0; i < n; ++i) {
                       const std::size_t ia = bc->same ? i : bc->ia[i];
                       const std::size_t ib = bc->same ? i : bc->ib[i];
                       ga[ia] += g[i] * da(av[ia], bv[ib], (*outv)[i]);
                     }
                   }
                   if (p[1].requires_grad()) {
                     auto gb = p[1].grad_buffer();
                     for (std::size_t i = 0; i < n; ++i) {
                       const std::size_t ia = bc->same ? i : bc->ia[i];
                       const std::size_t ib = bc->same ? i : bc->ib[i];
                       gb[ib] += g[i] * db(av[ia], bv[ib], (*outv)[i]);
                     }
                   }
                 });
}

template <class F, class D>
Tensor unary_op(const char* name, const Tensor& x, F f, D d) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  auto outv = std::make_shared<std::vector<double>>(out);
  return make_op(name, x.shape(), std::move(out), {x},
                 [outv, d](std::span<const double> g, std::vector<Tensor>& p) {
                   const auto xv = p[0].values();
                   auto gx = p[0].grad_buffer();
                   for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * d(xv[i], (*outv)[i]);
                 });
}

std::size_t clamp_index(long i, std::size_t n) {
  if (i < 0) return 0;
  if (static_cast<std::size_t>(i) >= n) return n - 1;
  return static_cast<std::size_t>(i);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b, std::optional<double> floor) {
  constexpr double kMinDenominator = 1e-12;
  if (!floor) {
    for (double v : b.values()) {
      if (!(std::fabs(v) >= kMinDenominator)) {
        throw NumericError("div: denominator magnitude " + std::to_string(v) + " below 1e-12");
      }
    }
    return binary_op(
        "div", a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
        [](double, double y, double out) { return -out / y; });
  }
  const double fl = *floor;
  auto floored = [fl](double y) { return std::fabs(y) < fl ? (y < 0 ? -fl : fl) : y; };
  return binary_op(
      "div", a, b, [floored](double x, double y) { return x / floored(y); },
      [floored](double, double y, double) { return 1.0 / floored(y); },
      [fl](double, double y, double out) { return std::fabs(y) < fl ? 0.0 : -out / y; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary_op(
      "maximum", a, b, [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y, double) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x >= y ? 0.0 : 1.0; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary_op(
      "minimum", a, b, [](double x, double y) { return x <= y ? x : y; },
      [](double x, double y, double) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x <= y ? 0.0 : 1.0; });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary_op(
      "add_scalar", x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor scale(const Tensor& x, double s) {
  return unary_op(
      "scale", x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      "sigmoid", x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double s) { return s * (1.0 - s); });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      "relu", x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  require(lo <= hi, "clamp: lo > hi");
  return unary_op(
      "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor abs(const Tensor& x) {
  return unary_op(
      "abs", x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
  return unary_op(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(shape_numel(shape) == x.numel(),
          "reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape) + " changes element count");
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_op("reshape", std::move(shape), std::move(out), {x},
                 [](std::span<const double> g, std::vector<Tensor>& p) {
                   auto gx = p[0].grad_buffer();
                   for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                 });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  const auto& in = x.shape();
  const std::size_t r = in.size();
  require(perm.size() == r, "permute: permutation rank mismatch");
  std::vector<bool> seen(r, false);
  for (auto a : perm) {
    require(a < r && !seen[a], "permute: invalid permutation");
    seen[a] = true;
  }
  std::vector<std::size_t> in_stride(r);
  std::size_t s = 1;
  for (std::size_t i = r; i-- > 0;) {
    in_stride[i] = s;
    s *= in[i];
  }
  Shape out_shape(r);
  std::vector<std::size_t> src_stride(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = in[perm[i]];
    src_stride[i] = in_stride[perm[i]];
  }
  const std::size_t n = x.numel();
  auto src = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t off = 0;
  for (std::size_t k = 0; k < n; ++k) {
    (*src)[k] = off;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      off += src_stride[d];
      if (idx[d] < out_shape[d]) break;
      off -= src_stride[d] * idx[d];
      idx[d] = 0;
    }
  }
  const auto xv = x.values();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = xv[(*src)[k]];
  return make_op("permute", std::move(out_shape), std::move(out), {x},
                 [src](std::span<const double> g, std::vector<Tensor>& p) {
                   auto gx = p[0].grad_buffer();
                   for (std::size_t k = 0; k < g.size(); ++k) gx[(*src)[k]] += g[k];
                 });
}

Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const auto& in = x.shape();
  require(axis < in.size(), "narrow: axis out of range");
  require(start + length <= in[axis], "narrow: range [" + std::to_string(start) + ", " +
                                          std::to_string(start + length) + ") exceeds axis size " +
                                          std::to_string(in[axis]));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= in[i];
  for (std::size_t i = axis + 1; i < in.size(); ++i) inner *= in[i];
  const std::size_t full = in[axis];
  Shape out_shape = in;
  out_shape[axis] = length;
  const auto xv = x.values();
  std::vector<double> out(outer * length * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>((o * full + start) * inner), length * inner,
                out.begin() + static_cast<std::ptrdiff_t>(o * length * inner));
  }
  return make_op("narrow", std::move(out_shape), std::move(out), {x},
                 [=](std::span<const double> g, std::vector<Tensor>& p) {
                   auto gx = p[0].grad_buffer();
                   for (std::size_t o = 0; o < outer; ++o) {
                     for (std::size_t k = 0; k < length * inner; ++k) {
                       gx[(o * full + start) * inner + k] += g[o * length * inner + k];
                     }
                   }
                 });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& first = parts.front().shape();
  require(axis < first.size(), "concat: axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  std::vector<std::size_t> sizes;
  std::size_t total = 0;
  for (const auto& t : parts) {
    const Shape& s = t.shape();
    require(s.size() == first.size(), "concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      require(i == axis || s[i] == first[i], "concat: shape mismatch " + shape_str(s) + " vs " + shape_str(first));
    }
    sizes.push_back(s[axis]);
    total += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  std::vector<double> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t t = 0; t < parts.size(); ++t) {
    const auto v = parts[t].values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * sizes[t] * inner), sizes[t] * inner,
                  out.begin() + static_cast<std::ptrdiff_t>((o * total + offset) * inner));
    }
    offset += sizes[t];
  }
  return make_op("concat", std::move(out_shape), std::move(out), parts,
                 [=](std::span<const double> g, std::vector<Tensor>& p) {
                   std::size_t off = 0;
                   for (std::size_t t = 0; t < p.size(); ++t) {
                     if (p[t].requires_grad()) {
                       auto gp = p[t].grad_buffer();
                       for (std::size_t o = 0; o < outer; ++o) {
                         for (std::size_t k = 0; k < sizes[t] * inner; ++k) {
                           gp[o * sizes[t] * inner + k] += g[(o * total + off) * inner + k];
                         }
                       }
                     }
                     off += sizes[t];
                   }
                 });
}

Tensor reduce_sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_op("reduce_sum", {}, {s}, {x}, [](std::span<const double> g, std::vector<Tensor>& p) {
    auto gx = p[0].grad_buffer();
    for (auto& v : gx) v += g[0];
  });
}

Tensor reduce_mean(const Tensor& x) {
  require(x.numel() > 0, "reduce_mean: empty tensor");
  const double n = static_cast<double>(x.numel());
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_op("reduce_mean", {}, {s / n}, {x}, [n](std::span<const double> g, std::vector<Tensor>& p) {
    auto gx = p[0].grad_buffer();
    const double d = g[0] / n;
    for (auto& v : gx) v += d;
  });
}

Tensor l1(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += std::fabs(v);
  return make_op("l1", {}, {s}, {x}, [](std::span<const double> g, std::vector<Tensor>& p) {
    const auto xv = p[0].values();
    auto gx = p[0].grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0] * (xv[i] > 0 ? 1.0 : (xv[i] < 0 ? -1.0 : 0.0));
  });
}

// conv2d via im2col + GEMM.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride, Padding padding) {
  require(input.rank() == 4, "conv2d: input must be N x C x H x W, got " + shape_str(input.shape()));
  require(kernel.rank() == 4, "conv2d: kernel must be F x C x kh x kw, got " + shape_str(kernel.shape()));
  require(stride >= 1, "conv2d: stride must be >= 1");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t F = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  require(kernel.dim(1) == C, "conv2d: channel mismatch, input has " + std::to_string(C) + ", kernel expects " +
                                  std::to_string(kernel.dim(1)));
  require(kh % 2 == 1 && kw % 2 == 1, "conv2d: kernel sizes must be odd");
  if (bias.defined()) require(bias.numel() == F, "conv2d: bias size mismatch");
  const long pad_h = padding == Padding::same ? static_cast<long>(kh / 2) : 0;
  const long pad_w = padding == Padding::same ? static_cast<long>(kw / 2) : 0;
  const std::size_t eff_h = H + 2 * static_cast<std::size_t>(pad_h);
  const std::size_t eff_w = W + 2 * static_cast<std::size_t>(pad_w);
  require(eff_h >= kh && eff_w >= kw, "conv2d: kernel larger than padded input");
  const std::size_t Ho = (eff_h - kh) / stride + 1;
  const std::size_t Wo = (eff_w - kw) / stride + 1;
  const std::size_t K = C * kh * kw;
  const std::size_t P = Ho * Wo;

  // Source index for each (row of the column matrix, output position), or -1 for padding.
  auto src = std::make_shared<std::vector<long>>(K * P);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const std::size_t row = (c * kh + ky) * kw + kx;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          const long iy = static_cast<long>(oy * stride + ky) - pad_h;
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const long ix = static_cast<long>(ox * stride + kx) - pad_w;
            const bool inside = iy >= 0 && iy < static_cast<long>(H) && ix >= 0 && ix < static_cast<long>(W);
            (*src)[row * P + oy * Wo + ox] =
                inside ? static_cast<long>((c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix))
                       : -1;
          }
        }
      }
    }
  }

  const auto xv = input.values();
  const auto kv = kernel.values();
  std::vector<double> out(N * F * P);
  ConstMapMat wmat(kv.data(), static_cast<long>(F), static_cast<long>(K));
  RowMat cols(static_cast<long>(K), static_cast<long>(P));
  for (std::size_t n = 0; n < N; ++n) {
    const double* xn = xv.data() + n * C * H * W;
    double* cd = cols.data();
    for (std::size_t i = 0; i < K * P; ++i) cd[i] = (*src)[i] >= 0 ? xn[(*src)[i]] : 0.0;
    MapMat omat(out.data() + n * F * P, static_cast<long>(F), static_cast<long>(P));
    omat.noalias() = wmat * cols;
    if (bias.defined()) {
      const auto bv = bias.values();
      for (std::size_t f = 0; f < F; ++f) omat.row(static_cast<long>(f)).array() += bv[f];
    }
  }

  std::vector<Tensor> parents{input, kernel};
  if (bias.defined()) parents.push_back(bias);
  return make_op("conv2d", {N, F, Ho, Wo}, std::move(out), std::move(parents),
                 [=](std::span<const double> g, std::vector<Tensor>& p) {
                   const auto xv = p[0].values();
                   const auto kv = p[1].values();
                   ConstMapMat wmat(kv.data(), static_cast<long>(F), static_cast<long>(K));
                   RowMat cols(static_cast<long>(K), static_cast<long>(P));
                   RowMat dcols;
                   for (std::size_t n = 0; n < N; ++n) {
                     ConstMapMat gmat(g.data() + n * F * P, static_cast<long>(F), static_cast<long>(P));
                     if (p[1].requires_grad()) {
                       const double* xn = xv.data() + n * C * H * W;
                       double* cd = cols.data();
                       for (std::size_t i = 0; i < K * P; ++i) cd[i] = (*src)[i] >= 0 ? xn[(*src)[i]] : 0.0;
                       MapMat gw(p[1].grad_buffer().data(), static_cast<long>(F), static_cast<long>(K));
                       gw.noalias() += gmat * cols.transpose();
                     }
                     if (p[0].requires_grad()) {
                       dcols.noalias() = wmat.transpose() * gmat;
                       double* gx = p[0].grad_buffer().data() + n * C * H * W;
                       const double* dd = dcols.data();
                       for (std::size_t i = 0; i < K * P; ++i) {
                         if ((*src)[i] >= 0) gx[(*src)[i]] += dd[i];
                       }
                     }
                     if (p.size() > 2 && p[2].requires_grad()) {
                       auto gb = p[2].grad_buffer();
                       for (std::size_t f = 0; f < F; ++f) {
                         double s = 0.0;
                         for (std::size_t q = 0; q < P; ++q) s += g[n * F * P + f * P + q];
                         gb[f] += s;
                       }
                     }
                   }
                 });
}

Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require(input.rank() == 2, "fully_connected: input must be N x D, got " + shape_str(input.shape()));
  require(weight.rank() == 2, "fully_connected: weight must be D x M, got " + shape_str(weight.shape()));
  const std::size_t N = input.dim(0), D = input.dim(1), M = weight.dim(1);
  require(weight.dim(0) == D, "fully_connected: inner dimension mismatch " + shape_str(input.shape()) + " vs " +
                                  shape_str(weight.shape()));
  if (bias.defined()) require(bias.numel() == M, "fully_connected: bias size mismatch");
  std::vector<double> out(N * M, 0.0);
  ConstMapMat x(input.values().data(), static_cast<long>(N), static_cast<long>(D));
  ConstMapMat w(weight.values().data(), static_cast<long>(D), static_cast<long>(M));
  MapMat o(out.data(), static_cast<long>(N), static_cast<long>(M));
  o.noalias() = x * w;
  if (bias.defined()) {
    const auto bv = bias.values();
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t m = 0; m < M; ++m) out[n * M + m] += bv[m];
  }
  std::vector<Tensor> parents{input, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_op("fully_connected", {N, M}, std::move(out), std::move(parents),
                 [N, D, M](std::span<const double> g, std::vector<Tensor>& p) {
                   ConstMapMat gm(g.data(), static_cast<long>(N), static_cast<long>(M));
                   if (p[0].requires_grad()) {
                     ConstMapMat w(p[1].values().data(), static_cast<long>(D), static_cast<long>(M));
                     MapMat gx(p[0].grad_buffer().data(), static_cast<long>(N), static_cast<long>(D));
                     gx.noalias() += gm * w.transpose();
                   }
                   if (p[1].requires_grad()) {
                     ConstMapMat x(p[0].values().data(), static_cast<long>(N), static_cast<long>(D));
                     MapMat gw(p[1].grad_buffer().data(), static_cast<long>(D), static_cast<long>(M));
                     gw.noalias() += x.transpose() * gm;
                   }
                   if (p.size() > 2 && p[2].requires_grad()) {
                     auto gb = p[2].grad_buffer();
                     for (std::size_t n = 0; n < N; ++n)
                       for (std::size_t m = 0; m < M; ++m) gb[m] += g[n * M + m];
                   }
                 });
}

std::pair<Tensor, Tensor> spatial_grad(const Tensor& x) {
  require(x.rank() == 3, "spatial_grad: expected H x W x C, got " + shape_str(x.shape()));
  const std::size_t H = x.dim(0), W = x.dim(1), C = x.dim(2);
  const auto xv = x.values();
  std::vector<double> gx(xv.size(), 0.0), gy(xv.size(), 0.0);
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < W; ++j) {
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t k = (i * W + j) * C + c;
        if (j + 1 < W) gx[k] = xv[k + C] - xv[k];
        if (i + 1 < H) gy[k] = xv[k + W * C] - xv[k];
      }
    }
  }
  auto tx = make_op("spatial_grad_x", x.shape(), std::move(gx), {x},
                    [H, W, C](std::span<const double> g, std::vector<Tensor>& p) {
                      auto d = p[0].grad_buffer();
                      for (std::size_t i = 0; i < H; ++i)
                        for (std::size_t j = 0; j + 1 < W; ++j)
                          for (std::size_t c = 0; c < C; ++c) {
                            const std::size_t k = (i * W + j) * C + c;
                            d[k + C] += g[k];
                            d[k] -= g[k];
                          }
                    });
  auto ty = make_op("spatial_grad_y", x.shape(), std::move(gy), {x},
                    [H, W, C](std::span<const double> g, std::vector<Tensor>& p) {
                      auto d = p[0].grad_buffer();
                      for (std::size_t i = 0; i + 1 < H; ++i)
                        for (std::size_t j = 0; j < W; ++j)
                          for (std::size_t c = 0; c < C; ++c) {
                            const std::size_t k = (i * W + j) * C + c;
                            d[k + W * C] += g[k];
                            d[k] -= g[k];
                          }
                    });
  return {tx, ty};
}

std::vector<double> gaussian_kernel(double sigma, std::size_t radius) {
  if (!(sigma >= 0.1)) throw std::invalid_argument("gaussian kernel: sigma must be >= 0.1");
  const std::size_t n = 2 * radius + 1;
  std::vector<double> k(n * n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dy = static_cast<double>(i) - static_cast<double>(radius);
      const double dx = static_cast<double>(j) - static_cast<double>(radius);
      k[i * n + j] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      total += k[i * n + j];
    }
  }
  for (auto& v : k) v /= total;
  return k;
}

Tensor gaussian_blur(const Tensor& x, double sigma, std::size_t radius) {
  require(x.rank() == 3, "gaussian_blur: expected H x W x C, got " + shape_str(x.shape()));
  auto kernel = std::make_shared<std::vector<double>>(gaussian_kernel(sigma, radius));
  const std::size_t H = x.dim(0), W = x.dim(1), C = x.dim(2);
  const long r = static_cast<long>(radius);
  const std::size_t n = 2 * radius + 1;
  const auto xv = x.values();
  std::vector<double> out(xv.size(), 0.0);
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < W; ++j) {
      double* o = out.data() + (i * W + j) * C;
      for (long dy = -r; dy <= r; ++dy) {
        const std::size_t si = clamp_index(static_cast<long>(i) + dy, H);
        for (long dx = -r; dx <= r; ++dx) {
          const std::size_t sj = clamp_index(static_cast<long>(j) + dx, W);
          const double w = (*kernel)[static_cast<std::size_t>(dy + r) * n + static_cast<std::size_t>(dx + r)];
          const double* s = xv.data() + (si * W + sj) * C;
          for (std::size_t c = 0; c < C; ++c) o[c] += w * s[c];
        }
      }
    }
  }
  return make_op("gaussian_blur", x.shape(), std::move(out), {x},
                 [=](std::span<const double> g, std::vector<Tensor>& p) {
                   auto d = p[0].grad_buffer();
                   for (std::size_t i = 0; i < H; ++i) {
                     for (std::size_t j = 0; j < W; ++j) {
                       const double* go = g.data() + (i * W + j) * C;
                       for (long dy = -r; dy <= r; ++dy) {
                         const std::size_t si = clamp_index(static_cast<long>(i) + dy, H);
                         for (long dx = -r; dx <= r; ++dx) {
                           const std::size_t sj = clamp_index(static_cast<long>(j) + dx, W);
                           const double w =
                               (*kernel)[static_cast<std::size_t>(dy + r) * n + static_cast<std::size_t>(dx + r)];
                           double* ds = d.data() + (si * W + sj) * C;
                           for (std::size_t c = 0; c < C; ++c) ds[c] += w * go[c];
                         }
                       }
                     }
                   }
                 });
}

Tensor filter2d_valid(const Tensor& x, const std::vector<double>& kernel, std::size_t kh, std::size_t kw) {
  require(x.rank() == 3, "filter2d_valid: expected H x W x C, got " + shape_str(x.shape()));
  require(kernel.size() == kh * kw, "filter2d_valid: kernel size mismatch");
  const std::size_t H = x.dim(0), W = x.dim(1), C = x.dim(2);
  require(H >= kh && W >= kw, "filter2d_valid: kernel larger than image");
  const std::size_t Ho = H - kh + 1, Wo = W - kw + 1;
  const auto xv = x.values();
  std::vector<double> out(Ho * Wo * C, 0.0);
  for (std::size_t i = 0; i < Ho; ++i)
    for (std::size_t j = 0; j < Wo; ++j) {
      double* o = out.data() + (i * Wo + j) * C;
      for (std::size_t a = 0; a < kh; ++a)
        for (std::size_t b = 0; b < kw; ++b) {
          const double w = kernel[a * kw + b];
          const double* s = xv.data() + ((i + a) * W + (j + b)) * C;
          for (std::size_t c = 0; c < C; ++c) o[c] += w * s[c];
        }
    }
  auto k = std::make_shared<std::vector<double>>(kernel);
  return make_op("filter2d_valid", {Ho, Wo, C}, std::move(out), {x},
                 [=](std::span<const double> g, std::vector<Tensor>& p) {
                   auto d = p[0].grad_buffer();
                   for (std::size_t i = 0; i < Ho; ++i)
                     for (std::size_t j = 0; j < Wo; ++j) {
                       const double* go = g.data() + (i * Wo + j) * C;
                       for (std::size_t a = 0; a < kh; ++a)
                         for (std::size_t b = 0; b < kw; ++b) {
                           const double w = (*k)[a * kw + b];
                           double* ds = d.data() + ((i + a) * W + (j + b)) * C;
                           for (std::size_t c = 0; c < C; ++c) ds[c] += w * go[c];
                         }
                     }
                 });
}

namespace {

// One bilinear tap along an axis of length n: base index, fraction, and
// whether the coordinate was inside the valid range (for the coordinate
// gradient).
struct AxisTap {
  std::size_t i0;
  double frac;
  bool inside;
};

AxisTap axis_tap(double u, std::size_t n) {
  const double hi = static_cast<double>(n - 1);
  const bool inside = u >= 0.0 && u <= hi;
  const double uc = std::clamp(u, 0.0, hi);
  if (n == 1) return {0, 0.0, inside};
  std::size_t i0 = static_cast<std::size_t>(std::floor(uc));
  if (i0 > n - 2) i0 = n - 2;
  return {i0, uc - static_cast<double>(i0), inside};
}

}  // namespace

Tensor bilinear_sample(const Tensor& img, const Tensor& coords) {
  require(img.rank() == 3, "bilinear_sample: expected H x W x C image, got " + shape_str(img.shape()));
  require(coords.rank() == 2 && coords.dim(1) == 2, "bilinear_sample: coords must be M x 2");
  const std::size_t H = img.dim(0), W = img.dim(1), C = img.dim(2), M = coords.dim(0);
  const auto iv = img.values();
  const auto cv = coords.values();
  std::vector<double> out(M * C);
  for (std::size_t m = 0; m < M; ++m) {
    const AxisTap tx = axis_tap(cv[2 * m], W);
    const AxisTap ty = axis_tap(cv[2 * m + 1], H);
    const std::size_t x1 = W > 1 ? tx.i0 + 1 : 0;
    const std::size_t y1 = H > 1 ? ty.i0 + 1 : 0;
    for (std::size_t c = 0; c < C; ++c) {
      const double v00 = iv[(ty.i0 * W + tx.i0) * C + c];
      const double v01 = iv[(ty.i0 * W + x1) * C + c];
      const double v10 = iv[(y1 * W + tx.i0) * C + c];
      const double v11 = iv[(y1 * W + x1) * C + c];
      out[m * C + c] = (1 - ty.frac) * ((1 - tx.frac) * v00 + tx.frac * v01) +
                       ty.frac * ((1 - tx.frac) * v10 + tx.frac * v11);
    }
  }
  return make_op("bilinear_sample", {M, C}, std::move(out), {img, coords},
                 [H, W, C, M](std::span<const double> g, std::vector<Tensor>& p) {
                   const auto iv = p[0].values();
                   const auto cv = p[1].values();
                   std::span<double> gi, gc;
                   if (p[0].requires_grad()) gi = p[0].grad_buffer();
                   if (p[1].requires_grad()) gc = p[1].grad_buffer();
                   for (std::size_t m = 0; m < M; ++m) {
                     const AxisTap tx = axis_tap(cv[2 * m], W);
                     const AxisTap ty = axis_tap(cv[2 * m + 1], H);
                     const std::size_t x1 = W > 1 ? tx.i0 + 1 : 0;
                     const std::size_t y1 = H > 1 ? ty.i0 + 1 : 0;
                     for (std::size_t c = 0; c < C; ++c) {
                       const double go = g[m * C + c];
                       const std::size_t k00 = (ty.i0 * W + tx.i0) * C + c, k01 = (ty.i0 * W + x1) * C + c;
                       const std::size_t k10 = (y1 * W + tx.i0) * C + c, k11 = (y1 * W + x1) * C + c;
                       if (!gi.empty()) {
                         gi[k00] += go * (1 - ty.frac) * (1 - tx.frac);
                         gi[k01] += go * (1 - ty.frac) * tx.frac;
                         gi[k10] += go * ty.frac * (1 - tx.frac);
                         gi[k11] += go * ty.frac * tx.frac;
                       }
                       if (!gc.empty()) {
                         if (tx.inside && W > 1) {
                           gc[2 * m] += go * ((1 - ty.frac) * (iv[k01] - iv[k00]) + ty.frac * (iv[k11] - iv[k10]));
                         }
                         if (ty.inside && H > 1) {
                           gc[2 * m + 1] +=
                               go * ((1 - tx.frac) * (iv[k10] - iv[k00]) + tx.frac * (iv[k11] - iv[k01]));
                         }
                       }
                     }
                   }
                 });
}

Tensor resize_bilinear(const Tensor& img, std::size_t out_h, std::size_t out_w) {
  require(img.rank() == 3, "resize_bilinear: expected H x W x C, got " + shape_str(img.shape()));
  require(out_h > 0 && out_w > 0, "resize_bilinear: empty output");
  const std::size_t H = img.dim(0), W = img.dim(1), C = img.dim(2);
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<AxisTap> t(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) t[o] = axis_tap((static_cast<double>(o) + 0.5) * ratio - 0.5, in);
    return t;
  };
  auto ty = std::make_shared<std::vector<AxisTap>>(taps(H, out_h));
  auto tx = std::make_shared<std::vector<AxisTap>>(taps(W, out_w));
  const auto iv = img.values();
  std::vector<double> out(out_h * out_w * C);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const AxisTap& a = (*ty)[oy];
    const std::size_t y1 = H > 1 ? a.i0 + 1 : 0;
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const AxisTap& b = (*tx)[ox];
      const std::size_t x1 = W > 1 ? b.i0 + 1 : 0;
      for (std::size_t c = 0; c < C; ++c) {
        out[(oy * out_w + ox) * C + c] =
            (1 - a.frac) * ((1 - b.frac) * iv[(a.i0 * W + b.i0) * C + c] + b.frac * iv[(a.i0 * W + x1) * C + c]) +
            a.frac * ((1 - b.frac) * iv[(y1 * W + b.i0) * C + c] + b.frac * iv[(y1 * W + x1) * C + c]);
      }
    }
  }
  return make_op("resize_bilinear", {out_h, out_w, C}, std::move(out), {img},
                 [=](std::span<const double> g, std::vector<Tensor>& p) {
                   auto d = p[0].grad_buffer();
                   for (std::size_t oy = 0; oy < out_h; ++oy) {
                     const AxisTap& a = (*ty)[oy];
                     const std::size_t y1 = H > 1 ? a.i0 + 1 : 0;
                     for (std::size_t ox = 0; ox < out_w; ++ox) {
                       const AxisTap& b = (*tx)[ox];
                       const std::size_t x1 = W > 1 ? b.i0 + 1 : 0;
                       for (std::size_t c = 0; c < C; ++c) {
                         const double go = g[(oy * out_w + ox) * C + c];
                         d[(a.i0 * W + b.i0) * C + c] += go * (1 - a.frac) * (1 - b.frac);
                         d[(a.i0 * W + x1) * C + c] += go * (1 - a.frac) * b.frac;
                         d[(y1 * W + b.i0) * C + c] += go * a.frac * (1 - b.frac);
                         d[(y1 * W + x1) * C + c] += go * a.frac * b.frac;
                       }
                     }
                   }
                 });
}

}  // namespace dbr
