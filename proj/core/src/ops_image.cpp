#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "svp/tensor.hpp"

namespace svp {

namespace {

struct ImageDims {
  std::size_t h, w, c;
};

ImageDims image_dims(const Tensor& t, const char* op) {
  if (t.rank() == 2) return {t.dim(0), t.dim(1), 1};
  if (t.rank() == 3) return {t.dim(0), t.dim(1), t.dim(2)};
  throw std::invalid_argument(std::string(op) + ": expected H x W or H x W x C, got " + shape_str(t.shape()));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  if (input.rank() != 3) throw std::invalid_argument("conv2d: input must be H x W x C");
  if (kernel.rank() != 4) throw std::invalid_argument("conv2d: kernel must be kh x kw x C x C'");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (pad < 0) throw std::invalid_argument("conv2d: negative padding");
  const std::size_t H = input.dim(0), W = input.dim(1), C = input.dim(2);
  const std::size_t kh = kernel.dim(0), kw = kernel.dim(1), Co = kernel.dim(3);
  if (kernel.dim(2) != C) {
    throw std::invalid_argument("conv2d: channel mismatch, input has " + std::to_string(C) + ", kernel expects " +
                                std::to_string(kernel.dim(2)));
  }
  if (kh % 2 == 0 || kw % 2 == 0) throw std::invalid_argument("conv2d: kernel sides must be odd");
  const long span_h = static_cast<long>(H) + 2 * pad - static_cast<long>(kh);
  const long span_w = static_cast<long>(W) + 2 * pad - static_cast<long>(kw);
  if (span_h < 0 || span_w < 0) throw std::invalid_argument("conv2d: kernel larger than padded input");
  const std::size_t Ho = static_cast<std::size_t>(span_h / stride + 1);
  const std::size_t Wo = static_cast<std::size_t>(span_w / stride + 1);

  const double* x = input.data().data();
  const double* k = kernel.data().data();
  std::vector<double> out(Ho * Wo * Co, 0.0);

  // Visits every (output pixel, tap) pair with an in-bounds input pixel.
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        const std::size_t o = (oy * Wo + ox) * Co;
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const long iy = static_cast<long>(oy) * stride - pad + static_cast<long>(ky);
          if (iy < 0 || iy >= static_cast<long>(H)) continue;
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const long ix = static_cast<long>(ox) * stride - pad + static_cast<long>(kx);
            if (ix < 0 || ix >= static_cast<long>(W)) continue;
            fn(o, (static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * C, (ky * kw + kx) * C * Co);
          }
        }
      }
    }
  };

  for_each_tap([&](std::size_t o, std::size_t i, std::size_t kb) {
    double* __restrict dst = out.data() + o;
    for (std::size_t ci = 0; ci < C; ++ci) {
      const double v = x[i + ci];
      const double* __restrict kr = k + kb + ci * Co;
      for (std::size_t co = 0; co < Co; ++co) dst[co] += v * kr[co];
    }
  });

  return Tensor::make_result(
      "conv2d", {Ho, Wo, Co}, std::move(out), {input, kernel},
      [in = input.node(), kn = kernel.node(), for_each_tap, C, Co](detail::Node& self) {
        const double* g = self.grad.data();
        const double* x = in->value.data();
        const double* k = kn->value.data();
        if (in->requires_grad) {
          double* gi = in->ensure_grad().data();
          for_each_tap([&](std::size_t o, std::size_t i, std::size_t kb) {
            const double* __restrict go = g + o;
            for (std::size_t ci = 0; ci < C; ++ci) {
              const double* __restrict kr = k + kb + ci * Co;
              double acc = 0.0;
              for (std::size_t co = 0; co < Co; ++co) acc += go[co] * kr[co];
              gi[i + ci] += acc;
            }
          });
        }
        if (kn->requires_grad) {
          double* gk = kn->ensure_grad().data();
          for_each_tap([&](std::size_t o, std::size_t i, std::size_t kb) {
            const double* __restrict go = g + o;
            for (std::size_t ci = 0; ci < C; ++ci) {
              const double v = x[i + ci];
              double* __restrict gr = gk + kb + ci * Co;
              for (std::size_t co = 0; co < Co; ++co) gr[co] += v * go[co];
            }
          });
        }
      });
}

Tensor add_channel_bias(const Tensor& input, const Tensor& bias) {
  const auto d = image_dims(input, "add_channel_bias");
  if (bias.numel() != d.c) throw std::invalid_argument("add_channel_bias: bias length does not match channels");
  const auto x = input.data();
  const auto b = bias.data();
  std::vector<double> out(x.size());
  for (std::size_t p = 0; p < d.h * d.w; ++p) {
    for (std::size_t c = 0; c < d.c; ++c) out[p * d.c + c] = x[p * d.c + c] + b[c];
  }
  return Tensor::make_result("add_channel_bias", input.shape(), std::move(out), {input, bias},
                             [in = input.node(), bn = bias.node(), d](detail::Node& self) {
                               if (in->requires_grad) {
                                 auto& gi = in->ensure_grad();
                                 for (std::size_t k = 0; k < gi.size(); ++k) gi[k] += self.grad[k];
                               }
                               if (bn->requires_grad) {
                                 auto& gb = bn->ensure_grad();
                                 for (std::size_t p = 0; p < d.h * d.w; ++p) {
                                   for (std::size_t c = 0; c < d.c; ++c) gb[c] += self.grad[p * d.c + c];
                                 }
                               }
                             });
}

Tensor upsample_bilinear2x(const Tensor& input) {
  const auto d = image_dims(input, "upsample_bilinear2x");
  const std::size_t Ho = d.h * 2, Wo = d.w * 2;

  struct Tap1 {
    std::size_t i0, i1;
    double w1;
  };
  auto taps = [](std::size_t n_out, std::size_t n_in) {
    std::vector<Tap1> t(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
      if (src < 0.0) src = 0.0;
      auto i0 = static_cast<std::size_t>(std::floor(src));
      if (i0 > n_in - 1) i0 = n_in - 1;
      const std::size_t i1 = std::min(i0 + 1, n_in - 1);
      t[o] = {i0, i1, src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto ty = taps(Ho, d.h);
  const auto tx = taps(Wo, d.w);

  const auto x = input.data();
  std::vector<double> out(Ho * Wo * d.c);
  for (std::size_t oy = 0; oy < Ho; ++oy) {
    const auto& a = ty[oy];
    for (std::size_t ox = 0; ox < Wo; ++ox) {
      const auto& b = tx[ox];
      const double w00 = (1 - a.w1) * (1 - b.w1), w01 = (1 - a.w1) * b.w1, w10 = a.w1 * (1 - b.w1),
                   w11 = a.w1 * b.w1;
      for (std::size_t c = 0; c < d.c; ++c) {
        out[(oy * Wo + ox) * d.c + c] =
            w00 * x[(a.i0 * d.w + b.i0) * d.c + c] + w01 * x[(a.i0 * d.w + b.i1) * d.c + c] +
            w10 * x[(a.i1 * d.w + b.i0) * d.c + c] + w11 * x[(a.i1 * d.w + b.i1) * d.c + c];
      }
    }
  }
  Shape shape = input.rank() == 2 ? Shape{Ho, Wo} : Shape{Ho, Wo, d.c};
  return Tensor::make_result("upsample_bilinear2x", std::move(shape), std::move(out), {input},
                             [in = input.node(), ty, tx, d, Wo](detail::Node& self) {
                               auto& gi = in->ensure_grad();
                               const auto& g = self.grad;
                               for (std::size_t oy = 0; oy < ty.size(); ++oy) {
                                 const auto& a = ty[oy];
                                 for (std::size_t ox = 0; ox < tx.size(); ++ox) {
                                   const auto& b = tx[ox];
                                   const double w00 = (1 - a.w1) * (1 - b.w1), w01 = (1 - a.w1) * b.w1,
                                                w10 = a.w1 * (1 - b.w1), w11 = a.w1 * b.w1;
                                   for (std::size_t c = 0; c < d.c; ++c) {
                                     const double go = g[(oy * Wo + ox) * d.c + c];
                                     gi[(a.i0 * d.w + b.i0) * d.c + c] += w00 * go;
                                     gi[(a.i0 * d.w + b.i1) * d.c + c] += w01 * go;
                                     gi[(a.i1 * d.w + b.i0) * d.c + c] += w10 * go;
                                     gi[(a.i1 * d.w + b.i1) * d.c + c] += w11 * go;
                                   }
                                 }
                               }
                             });
}

Tensor crop(const Tensor& input, std::size_t r0, std::size_t c0, std::size_t h, std::size_t w) {
  const auto d = image_dims(input, "crop");
  if (r0 + h > d.h || c0 + w > d.w) throw std::out_of_range("crop: window outside image");
  const auto x = input.data();
  std::vector<double> out(h * w * d.c);
  for (std::size_t r = 0; r < h; ++r) {
    const double* src = x.data() + ((r0 + r) * d.w + c0) * d.c;
    std::copy(src, src + w * d.c, out.begin() + static_cast<long>(r * w * d.c));
  }
  Shape shape = input.rank() == 2 ? Shape{h, w} : Shape{h, w, d.c};
  return Tensor::make_result("crop", std::move(shape), std::move(out), {input},
                             [in = input.node(), d, r0, c0, h, w](detail::Node& self) {
                               auto& gi = in->ensure_grad();
                               for (std::size_t r = 0; r < h; ++r) {
                                 double* dst = gi.data() + ((r0 + r) * d.w + c0) * d.c;
                                 const double* src = self.grad.data() + r * w * d.c;
                                 for (std::size_t k = 0; k < w * d.c; ++k) dst[k] += src[k];
                               }
                             });
}

Tensor broadcast_channels(const Tensor& map, std::size_t channels) {
  if (map.rank() != 2) throw std::invalid_argument("broadcast_channels: expected H x W map");
  const std::size_t n = map.numel();
  const auto x = map.data();
  std::vector<double> out(n * channels);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t c = 0; c < channels; ++c) out[p * channels + c] = x[p];
  }
  return Tensor::make_result("broadcast_channels", {map.dim(0), map.dim(1), channels}, std::move(out), {map},
                             [in = map.node(), n, channels](detail::Node& self) {
                               auto& gi = in->ensure_grad();
                               for (std::size_t p = 0; p < n; ++p) {
                                 double s = 0.0;
                                 for (std::size_t c = 0; c < channels; ++c) s += self.grad[p * channels + c];
                                 gi[p] += s;
                               }
                             });
}

Tensor combine_channels(const Tensor& image, std::span<const double> weights) {
  if (image.rank() != 3) throw std::invalid_argument("combine_channels: expected H x W x C image");
  const std::size_t C = image.dim(2);
  if (weights.size() != C) throw std::invalid_argument("combine_channels: weight count does not match channels");
  const std::size_t n = image.dim(0) * image.dim(1);
  std::vector<double> w(weights.begin(), weights.end());
  const auto x = image.data();
  std::vector<double> out(n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t c = 0; c < C; ++c) out[p] += w[c] * x[p * C + c];
  }
  return Tensor::make_result("combine_channels", {image.dim(0), image.dim(1)}, std::move(out), {image},
                             [in = image.node(), w, n, C](detail::Node& self) {
                               auto& gi = in->ensure_grad();
                               for (std::size_t p = 0; p < n; ++p) {
                                 for (std::size_t c = 0; c < C; ++c) gi[p * C + c] += w[c] * self.grad[p];
                               }
                             });
}

Affine2 Affine2::inverse() const {
  const double det = determinant();
  if (std::fabs(det) < 1e-12) throw std::domain_error("affine map is singular");
  const double a = m[0], b = m[1], c = m[2], d = m[3], e = m[4], f = m[5];
  Affine2 inv;
  inv.m[0] = e / det;
  inv.m[1] = -b / det;
  inv.m[3] = -d / det;
  inv.m[4] = a / det;
  inv.m[2] = -(inv.m[0] * c + inv.m[1] * f);
  inv.m[5] = -(inv.m[3] * c + inv.m[4] * f);
  return inv;
}

Affine2 Affine2::then(const Affine2& next) const {
  const auto& n = next.m;
  return {{n[0] * m[0] + n[1] * m[3], n[0] * m[1] + n[1] * m[4], n[0] * m[2] + n[1] * m[5] + n[2],
           n[3] * m[0] + n[4] * m[3], n[3] * m[1] + n[4] * m[4], n[3] * m[2] + n[4] * m[5] + n[5]}};
}

std::array<double, 2> Affine2::apply(double row, double col) const {
  return {m[0] * row + m[1] * col + m[2], m[3] * row + m[4] * col + m[5]};
}

Tensor grid_sample_bilinear(const Tensor& image, const Affine2& forward, std::size_t out_h, std::size_t out_w) {
  const auto d = image_dims(image, "grid_sample_bilinear");
  const Affine2 inv = forward.inverse();
  const std::size_t Ho = out_h ? out_h : d.h;
  const std::size_t Wo = out_w ? out_w : d.w;

  // Up to four taps per output pixel; index -1 marks an out-of-bounds tap.
  struct Taps {
    std::array<long, 4> idx;
    std::array<double, 4> w;
  };
  std::vector<Taps> taps(Ho * Wo);
  for (std::size_t oy = 0; oy < Ho; ++oy) {
    for (std::size_t ox = 0; ox < Wo; ++ox) {
      const auto [sy, sx] = inv.apply(static_cast<double>(oy), static_cast<double>(ox));
      const double fy = std::floor(sy), fx = std::floor(sx);
      const double ay = sy - fy, ax = sx - fx;
      const long y0 = static_cast<long>(fy), x0 = static_cast<long>(fx);
      Taps t;
      const long ys[4] = {y0, y0, y0 + 1, y0 + 1};
      const long xs[4] = {x0, x0 + 1, x0, x0 + 1};
      const double ws[4] = {(1 - ay) * (1 - ax), (1 - ay) * ax, ay * (1 - ax), ay * ax};
      for (int q = 0; q < 4; ++q) {
        const bool inside = ys[q] >= 0 && ys[q] < static_cast<long>(d.h) && xs[q] >= 0 && xs[q] < static_cast<long>(d.w);
        t.idx[q] = inside && ws[q] != 0.0 ? ys[q] * static_cast<long>(d.w) + xs[q] : -1;
        t.w[q] = ws[q];
      }
      taps[oy * Wo + ox] = t;
    }
  }

  const auto x = image.data();
  std::vector<double> out(Ho * Wo * d.c, 0.0);
  for (std::size_t p = 0; p < taps.size(); ++p) {
    const auto& t = taps[p];
    for (int q = 0; q < 4; ++q) {
      if (t.idx[q] < 0) continue;
      const std::size_t src = static_cast<std::size_t>(t.idx[q]) * d.c;
      for (std::size_t c = 0; c < d.c; ++c) out[p * d.c + c] += t.w[q] * x[src + c];
    }
  }
  Shape shape = image.rank() == 2 ? Shape{Ho, Wo} : Shape{Ho, Wo, d.c};
  return Tensor::make_result("grid_sample_bilinear", std::move(shape), std::move(out), {image},
                             [in = image.node(), taps = std::move(taps), C = d.c](detail::Node& self) {
                               auto& gi = in->ensure_grad();
                               for (std::size_t p = 0; p < taps.size(); ++p) {
                                 const auto& t = taps[p];
                                 for (int q = 0; q < 4; ++q) {
                                   if (t.idx[q] < 0) continue;
                                   const std::size_t dst = static_cast<std::size_t>(t.idx[q]) * C;
                                   for (std::size_t c = 0; c < C; ++c) gi[dst + c] += t.w[q] * self.grad[p * C + c];
                                 }
                               }
                             });
}

}  // namespace svp
