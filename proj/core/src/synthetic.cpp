#include "svp/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace svp {

ObjectSample synthetic_car(std::size_t h, std::size_t w, std::uint64_t seed) {
  if (h < 8 || w < 8) throw std::invalid_argument("synthetic_car: grid too small");
  Rng rng(seed);
  const std::array<double, 3> paint = {rng.uniform(0.5, 0.9), rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3)};
  const double H = static_cast<double>(h), W = static_cast<double>(w);
  std::vector<double> img(h * w * 3, 0.0), mask(h * w, 0.0);
  const double wheel_r = 0.16 * H;
  const double wheel_row = 0.82 * H;
  const std::array<double, 2> wheel_cols = {0.23 * W, 0.77 * W};

  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double y = static_cast<double>(i), x = static_cast<double>(j);
      std::array<double, 3> c{};
      bool inside = false;
      // Cabin: trapezoid narrowing toward the roof.
      const double roof = 0.12 * H, belt = 0.45 * H;
      if (y >= roof && y < belt) {
        const double f = (y - roof) / (belt - roof);
        const double left = W * (0.32 - 0.1 * f), right = W * (0.70 + 0.08 * f);
        if (x >= left && x < right) {
          inside = true;
          const bool window = y > roof + 0.06 * H && x > left + 0.05 * W && x < right - 0.05 * W &&
                              std::fabs(x - 0.52 * W) > 0.02 * W;
          c = window ? std::array<double, 3>{0.15, 0.2, 0.3 + 0.2 * f} : paint;
        }
      }
      // Body with rounded ends.
      if (y >= belt && y < 0.85 * H && x >= 0.03 * W && x < 0.97 * W) {
        const double end = std::min(x - 0.03 * W, 0.97 * W - x);
        if (end > 0.06 * W * (1.0 - (y - belt) / (0.4 * H)) * 0.5) {
          inside = true;
          const double shade = 1.0 - 0.25 * (y - belt) / (0.4 * H);
          c = {paint[0] * shade, paint[1] * shade, paint[2] * shade};
          if (std::fabs(y - 0.6 * H) < 0.01 * H + 0.5) c = {0.85, 0.85, 0.8};
        }
      }
      for (double wc : wheel_cols) {
        const double d = std::hypot(y - wheel_row, x - wc);
        if (d < wheel_r) {
          inside = true;
          c = d < 0.5 * wheel_r ? std::array<double, 3>{0.6, 0.6, 0.62} : std::array<double, 3>{0.05, 0.05, 0.05};
        }
      }
      if (inside) {
        mask[i * w + j] = 1.0;
        for (int k = 0; k < 3; ++k) img[(i * w + j) * 3 + k] = std::clamp(c[k], 0.0, 1.0);
      }
    }
  }
  return ObjectSample(Tensor::from({h, w, 3}, std::move(img)), Tensor::from({h, w}, std::move(mask)));
}

Tensor synthetic_scene(std::size_t h, std::size_t w, std::uint64_t seed) {
  if (h < 8 || w < 8) throw std::invalid_argument("synthetic_scene: grid too small");
  Rng rng(seed);
  const double H = static_cast<double>(h), W = static_cast<double>(w);
  const double horizon = H * rng.uniform(0.35, 0.5);
  std::vector<double> img(h * w * 3);
  auto put = [&](std::size_t i, std::size_t j, const std::array<double, 3>& c) {
    for (int k = 0; k < 3; ++k) img[(i * w + j) * 3 + k] = std::clamp(c[k], 0.0, 1.0);
  };
  const double sky_tint = rng.uniform(-0.1, 0.1);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double y = static_cast<double>(i);
      if (y < horizon) {
        const double f = y / horizon;
        put(i, j, {0.45 + 0.3 * f + sky_tint, 0.6 + 0.25 * f, 0.9});
      } else {
        const double f = (y - horizon) / (H - horizon);
        put(i, j, {0.3 + 0.15 * f, 0.3 + 0.15 * f, 0.32 + 0.15 * f});
      }
    }
  }
  const int buildings = 3 + static_cast<int>(rng.below(4));
  for (int b = 0; b < buildings; ++b) {
    const double x0 = rng.uniform(0.0, W * 0.85), bw = rng.uniform(W * 0.08, W * 0.25);
    const double top = horizon * rng.uniform(0.1, 0.7);
    const std::array<double, 3> c = {rng.uniform(0.3, 0.8), rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.6)};
    for (std::size_t i = static_cast<std::size_t>(top); i < static_cast<std::size_t>(horizon) && i < h; ++i) {
      for (std::size_t j = static_cast<std::size_t>(x0); j < static_cast<std::size_t>(std::min(W, x0 + bw)); ++j) {
        const bool window = (i / 3) % 2 == 0 && (j / 3) % 2 == 0;
        put(i, j, window ? std::array<double, 3>{c[0] * 0.5, c[1] * 0.5, c[2] * 0.6} : c);
      }
    }
  }
  // Dashed lane marking converging toward the horizon.
  for (std::size_t i = static_cast<std::size_t>(horizon); i < h; ++i) {
    const double f = (static_cast<double>(i) - horizon) / (H - horizon);
    const double half = 0.5 + 1.5 * f;
    if (static_cast<int>(f * 12) % 2 == 1) continue;
    for (std::size_t j = 0; j < w; ++j) {
      if (std::fabs(static_cast<double>(j) - W / 2) < half) put(i, j, {0.9, 0.9, 0.85});
    }
  }
  return Tensor::from({h, w, 3}, std::move(img));
}

std::vector<Tensor> synthetic_scenes(std::size_t count, std::size_t h, std::size_t w, std::uint64_t seed) {
  std::vector<Tensor> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(synthetic_scene(h, w, derive_seed(seed, k)));
  return out;
}

}  // namespace svp
