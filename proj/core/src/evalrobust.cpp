#include "svp/evalrobust.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace svp {

std::string to_string(AlphaReference ref) { return ref == AlphaReference::benign ? "benign" : "target"; }

AlphaReference parse_alpha_reference(const std::string& name) {
  if (name == "benign") return AlphaReference::benign;
  if (name == "target") return AlphaReference::target;
  throw std::invalid_argument("unknown alpha reference '" + name + "'");
}

MetricsRecord& MetricsRecord::operator+=(const MetricsRecord& o) {
  mse_t += o.mse_t;
  mse_b += o.mse_b;
  alpha += o.alpha;
  eps_disp += o.eps_disp;
  eps_depth += o.eps_depth;
  return *this;
}

MetricsRecord MetricsRecord::operator/(double n) const {
  return {mse_t / n, mse_b / n, alpha / n, eps_disp / n, eps_depth / n};
}

MetricsRecord metrics(const Tensor& d_adv, const Tensor& d_benign, const Tensor& d_target, const Tensor& object_mask,
                      const DepthConversion& conversion, AlphaReference reference) {
  if (d_adv.shape() != d_benign.shape() || d_adv.shape() != d_target.shape() || d_adv.shape() != object_mask.shape()) {
    throw std::invalid_argument("metrics: map dims differ");
  }
  const auto adv = d_adv.data(), ben = d_benign.data(), tgt = d_target.data(), m = object_mask.data();
  const auto& ref = reference == AlphaReference::benign ? ben : tgt;
  double area = 0;
  MetricsRecord r;
  for (std::size_t k = 0; k < adv.size(); ++k) {
    area += m[k];
    if (m[k] == 0.0) continue;
    if (ben[k] == 0.0) throw std::domain_error("metrics: zero benign disparity under the object mask");
    r.mse_t += (tgt[k] - adv[k]) * (tgt[k] - adv[k]) * m[k];
    r.mse_b += (ben[k] - adv[k]) * (ben[k] - adv[k]) * m[k];
    if (std::fabs(adv[k] - ref[k]) * m[k] >= kAlphaThreshold) r.alpha += 1.0;
    r.eps_disp += std::fabs(adv[k] - ben[k]) / ben[k] * m[k];
    const double da = conversion.depth(adv[k]), db = conversion.depth(ben[k]);
    r.eps_depth += std::fabs(da - db) / db * m[k];
  }
  if (area <= 0.0) throw std::invalid_argument("metrics: empty object mask");
  return r / area;
}

Tensor bit_depth_reduce(const Tensor& image, int n_bits) {
  if (n_bits < 1 || n_bits > 8) throw std::invalid_argument("bit_depth_reduce: bits must be in [1, 8]");
  const double levels = std::ldexp(1.0, n_bits) - 1.0;
  std::vector<double> out(image.numel());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::floor(std::clamp(image[k], 0.0, 1.0) * levels + 0.5) / levels;
  }
  return Tensor::from(image.shape(), std::move(out));
}

Tensor gaussian_noise(const Tensor& image, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("gaussian_noise: negative sigma");
  std::vector<double> out(image.numel());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::clamp(image[k] + rng.normal(0.0, sigma), 0.0, 1.0);
  return Tensor::from(image.shape(), std::move(out));
}

Tensor median_blur(const Tensor& image, int k) {
  if (k < 3 || k % 2 == 0) throw std::invalid_argument("median_blur: kernel size must be odd and >= 3");
  if (image.rank() != 3 && image.rank() != 2) throw std::invalid_argument("median_blur: expected an image");
  const std::size_t H = image.dim(0), W = image.dim(1), C = image.rank() == 3 ? image.dim(2) : 1;
  const long r = k / 2;
  const auto x = image.data();
  std::vector<double> out(image.numel());
  std::vector<double> window(static_cast<std::size_t>(k * k));
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < W; ++j) {
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t n = 0;
        for (long di = -r; di <= r; ++di) {
          const long ii = std::clamp(static_cast<long>(i) + di, 0L, static_cast<long>(H) - 1);
          for (long dj = -r; dj <= r; ++dj) {
            const long jj = std::clamp(static_cast<long>(j) + dj, 0L, static_cast<long>(W) - 1);
            window[n++] = x[(static_cast<std::size_t>(ii) * W + static_cast<std::size_t>(jj)) * C + c];
          }
        }
        auto mid = window.begin() + static_cast<long>(n / 2);
        std::nth_element(window.begin(), mid, window.begin() + static_cast<long>(n));
        out[(i * W + j) * C + c] = *mid;
      }
    }
  }
  return Tensor::from(image.shape(), std::move(out));
}

namespace {

constexpr std::array<int, 64> kLuminanceTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,  14, 13, 16, 24, 40,  57,
    69, 56, 14, 17, 22,  29,  51,  87,  80, 62, 18, 22, 37,  56,  68,  109, 103, 77, 24, 35, 55, 64,
    81, 104, 113, 92, 49, 64,  78,  87,  103, 121, 120, 101, 72, 92, 95,  98,  112, 100, 103, 99};

// basis[u][x] = C(u)/2 * cos((2x+1) u pi / 16), orthonormal 1-D DCT-II.
std::array<std::array<double, 8>, 8> dct_basis() {
  std::array<std::array<double, 8>, 8> b{};
  for (int u = 0; u < 8; ++u) {
    const double cu = u == 0 ? std::sqrt(0.5) : 1.0;
    for (int x = 0; x < 8; ++x) b[u][x] = cu / 2.0 * std::cos((2 * x + 1) * u * M_PI / 16.0);
  }
  return b;
}

std::size_t reflect(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < static_cast<long>(n) ? i : period - i);
}

}  // namespace

std::vector<int> jpeg_quant_table(int quality) {
  if (quality < 1 || quality > 100) throw std::invalid_argument("jpeg_approx: quality must be in [1, 100]");
  const double scale = quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
  std::vector<int> q(64);
  for (int k = 0; k < 64; ++k) {
    q[k] = std::max(1, static_cast<int>(std::lround(kLuminanceTable[k] * scale / 100.0)));
  }
  return q;
}

Tensor jpeg_approx(const Tensor& image, int quality) {
  const auto q = jpeg_quant_table(quality);
  if (image.rank() != 3 && image.rank() != 2) throw std::invalid_argument("jpeg_approx: expected an image");
  const std::size_t H = image.dim(0), W = image.dim(1), C = image.rank() == 3 ? image.dim(2) : 1;
  const std::size_t Hp = (H + 7) / 8 * 8, Wp = (W + 7) / 8 * 8;
  static const auto basis = dct_basis();
  const auto x = image.data();
  std::vector<double> out(image.numel());
  std::vector<double> plane(Hp * Wp);

  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < Hp; ++i) {
      for (std::size_t j = 0; j < Wp; ++j) {
        const std::size_t si = reflect(static_cast<long>(i), H), sj = reflect(static_cast<long>(j), W);
        plane[i * Wp + j] = std::clamp(x[(si * W + sj) * C + c], 0.0, 1.0) * 255.0 - 128.0;
      }
    }
    for (std::size_t bi = 0; bi < Hp; bi += 8) {
      for (std::size_t bj = 0; bj < Wp; bj += 8) {
        double block[8][8], tmp[8][8], coef[8][8];
        for (int a = 0; a < 8; ++a) {
          for (int b = 0; b < 8; ++b) block[a][b] = plane[(bi + a) * Wp + bj + b];
        }
        // Separable forward DCT: rows then columns.
        for (int a = 0; a < 8; ++a) {
          for (int v = 0; v < 8; ++v) {
            double s = 0;
            for (int b = 0; b < 8; ++b) s += basis[v][b] * block[a][b];
            tmp[a][v] = s;
          }
        }
        for (int u = 0; u < 8; ++u) {
          for (int v = 0; v < 8; ++v) {
            double s = 0;
            for (int a = 0; a < 8; ++a) s += basis[u][a] * tmp[a][v];
            const double step = q[u * 8 + v];
            coef[u][v] = std::round(s / step) * step;
          }
        }
        for (int u = 0; u < 8; ++u) {
          for (int b = 0; b < 8; ++b) {
            double s = 0;
            for (int v = 0; v < 8; ++v) s += basis[v][b] * coef[u][v];
            tmp[u][b] = s;
          }
        }
        for (int a = 0; a < 8; ++a) {
          for (int b = 0; b < 8; ++b) {
            double s = 0;
            for (int u = 0; u < 8; ++u) s += basis[u][a] * tmp[u][b];
            block[a][b] = s;
          }
        }
        for (int a = 0; a < 8; ++a) {
          for (int b = 0; b < 8; ++b) plane[(bi + a) * Wp + bj + b] = block[a][b];
        }
      }
    }
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < W; ++j) {
        out[(i * W + j) * C + c] = std::clamp((plane[i * Wp + j] + 128.0) / 255.0, 0.0, 1.0);
      }
    }
  }
  return Tensor::from(image.shape(), std::move(out));
}

std::string to_string(RobustTransform t) {
  switch (t) {
    case RobustTransform::jpeg: return "jpeg";
    case RobustTransform::bit_depth: return "bit_depth";
    case RobustTransform::gaussian_noise: return "gaussian_noise";
    case RobustTransform::median_blur: return "median_blur";
  }
  return "?";
}

RobustTransform parse_robust_transform(const std::string& name) {
  for (auto t : {RobustTransform::jpeg, RobustTransform::bit_depth, RobustTransform::gaussian_noise,
                 RobustTransform::median_blur}) {
    if (to_string(t) == name) return t;
  }
  throw std::invalid_argument("unknown robustness transform '" + name + "'");
}

Tensor apply_robust_transform(const Tensor& image, RobustTransform t, double strength, Rng& rng) {
  switch (t) {
    case RobustTransform::jpeg: return jpeg_approx(image, static_cast<int>(std::lround(strength)));
    case RobustTransform::bit_depth: return bit_depth_reduce(image, static_cast<int>(std::lround(strength)));
    case RobustTransform::gaussian_noise: return gaussian_noise(image, strength, rng);
    case RobustTransform::median_blur: return median_blur(image, static_cast<int>(std::lround(strength)));
  }
  throw std::logic_error("unhandled transform");
}

}  // namespace svp
