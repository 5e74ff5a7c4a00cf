#include "svp/maskgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace svp {

std::string to_string(MaskFamily family) {
  switch (family) {
    case MaskFamily::rect: return "rect";
    case MaskFamily::quad: return "quad";
    case MaskFamily::circle: return "circle";
    case MaskFamily::ellipse: return "ellipse";
    case MaskFamily::oval: return "oval";
  }
  return "?";
}

MaskFamily parse_mask_family(const std::string& name) {
  for (auto f : {MaskFamily::rect, MaskFamily::quad, MaskFamily::circle, MaskFamily::ellipse, MaskFamily::oval}) {
    if (to_string(f) == name) return f;
  }
  throw std::invalid_argument("unknown mask family '" + name + "'");
}

std::size_t packed_size(MaskFamily family) {
  switch (family) {
    case MaskFamily::rect: return 4;
    case MaskFamily::quad: return 8;
    case MaskFamily::circle: return 3;
    case MaskFamily::ellipse: return 5;
    case MaskFamily::oval: return 4;
  }
  return 0;
}

std::vector<double> pack(const MaskParams& p) {
  switch (p.family) {
    case MaskFamily::rect: return {p.l, p.r, p.t, p.b};
    case MaskFamily::quad: return {p.l, p.r, p.t, p.b, p.slopes[0], p.slopes[1], p.slopes[2], p.slopes[3]};
    case MaskFamily::circle: return {p.center_row, p.center_col, p.radius};
    case MaskFamily::ellipse: return {p.center_row, p.center_col, p.radius, p.shear_row, p.shear_col};
    case MaskFamily::oval: return {p.center_row, p.center_col, p.semi_row, p.semi_col};
  }
  return {};
}

MaskParams unpack(MaskFamily family, std::span<const double> v, MaskParams base) {
  if (v.size() != packed_size(family)) throw std::invalid_argument("unpack: wrong parameter count");
  base.family = family;
  switch (family) {
    case MaskFamily::quad:
      base.slopes = {v[4], v[5], v[6], v[7]};
      [[fallthrough]];
    case MaskFamily::rect:
      base.l = v[0];
      base.r = v[1];
      base.t = v[2];
      base.b = v[3];
      break;
    case MaskFamily::ellipse:
      base.shear_row = v[3];
      base.shear_col = v[4];
      [[fallthrough]];
    case MaskFamily::circle:
      base.center_row = v[0];
      base.center_col = v[1];
      base.radius = v[2];
      break;
    case MaskFamily::oval:
      base.center_row = v[0];
      base.center_col = v[1];
      base.semi_row = v[2];
      base.semi_col = v[3];
      break;
  }
  return base;
}

namespace {

Tensor row_index(std::size_t h, std::size_t w) {
  std::vector<double> v(h * w);
  for (std::size_t i = 0; i < h; ++i) std::fill_n(v.begin() + static_cast<long>(i * w), w, static_cast<double>(i));
  return Tensor::from({h, w}, std::move(v));
}

Tensor col_index(std::size_t h, std::size_t w) {
  std::vector<double> v(h * w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) v[i * w + j] = static_cast<double>(j);
  }
  return Tensor::from({h, w}, std::move(v));
}

// 1/4 * [-tanh(u1) tanh(u2) + 1] * [-tanh(v1) tanh(v2) + 1]
Tensor tanh_box(const Tensor& u1, const Tensor& u2, const Tensor& v1, const Tensor& v2) {
  Tensor rows = 1.0 - tanh(u1) * tanh(u2);
  Tensor cols = 1.0 - tanh(v1) * tanh(v2);
  return 0.25 * (rows * cols);
}

Tensor binarize(const Tensor& pre, Binarizer b) { return b == Binarizer::ste ? ste_round(pre) : pre; }

}  // namespace

Mask make_mask(MaskFamily family, const Tensor& packed, std::size_t h, std::size_t w, Binarizer binarizer) {
  if (packed.numel() != packed_size(family)) {
    throw std::invalid_argument("make_mask: expected " + std::to_string(packed_size(family)) + " parameters for " +
                                to_string(family));
  }
  if (h == 0 || w == 0) throw std::invalid_argument("make_mask: empty grid");
  const Tensor I = row_index(h, w);
  const Tensor J = col_index(h, w);
  auto p = [&](std::size_t k) { return select(packed, k); };

  switch (family) {
    case MaskFamily::rect: {
      Tensor l = p(0), r = p(1), t = p(2), b = p(3);
      return {tanh_box(I - t, I - b, J - l, J - r), false};
    }
    case MaskFamily::quad: {
      Tensor l = p(0), r = p(1), t = p(2), b = p(3);
      Tensor sl = p(4), sr = p(5), st = p(6), sb = p(7);
      Tensor top = t + st * (J - l);
      Tensor bottom = b + sb * (J - r);
      Tensor left = l + sl * (I - t);
      Tensor right = r + sr * (I - b);
      return {tanh_box(I - top, I - bottom, J - left, J - right), false};
    }
    case MaskFamily::circle: {
      Tensor x = p(0), y = p(1), R = p(2);
      Tensor d2 = square(I - x) + square(J - y);
      Tensor pre = max_scalar(1.0 - 0.5 * (d2 / square(R)), 0.0);
      return {binarize(pre, binarizer), binarizer == Binarizer::ste};
    }
    case MaskFamily::ellipse: {
      Tensor x = p(0), y = p(1), R = p(2), sx = p(3), sy = p(4);
      Tensor di = I - (x + sx * (J - y));
      Tensor dj = J - (y + sy * (I - x));
      Tensor pre = max_scalar(1.0 - 0.5 * ((square(di) + square(dj)) / square(R)), 0.0);
      return {binarize(pre, binarizer), binarizer == Binarizer::ste};
    }
    case MaskFamily::oval: {
      Tensor x = p(0), y = p(1), a = p(2), b = p(3);
      Tensor q = square(I - x) / square(a) + square(J - y) / square(b);
      Tensor pre = max_scalar(1.0 - 0.5 * q, 0.0);
      return {binarize(pre, binarizer), binarizer == Binarizer::ste};
    }
  }
  throw std::logic_error("make_mask: unhandled family");
}

namespace {

Mask constant_mask(MaskFamily family, const MaskParams& params, std::size_t h, std::size_t w) {
  MaskParams p = params;
  p.family = family;
  const auto v = pack(p);
  return make_mask(family, Tensor::from({v.size()}, v), h, w);
}

}  // namespace

Mask rect_mask(const MaskParams& params, std::size_t h, std::size_t w) {
  return constant_mask(MaskFamily::rect, params, h, w);
}
Mask quad_mask(const MaskParams& params, std::size_t h, std::size_t w) {
  return constant_mask(MaskFamily::quad, params, h, w);
}
Mask circle_mask(const MaskParams& params, std::size_t h, std::size_t w) {
  return constant_mask(MaskFamily::circle, params, h, w);
}
Mask ellipse_mask(const MaskParams& params, std::size_t h, std::size_t w) {
  return constant_mask(MaskFamily::ellipse, params, h, w);
}
Mask oval_mask(const MaskParams& params, std::size_t h, std::size_t w) {
  return constant_mask(MaskFamily::oval, params, h, w);
}
Mask generate_mask(const MaskParams& params, std::size_t h, std::size_t w) {
  return constant_mask(params.family, params, h, w);
}

MaskParams clamp_params(const MaskParams& in, std::size_t h, std::size_t w) {
  MaskParams p = in;
  const double H = static_cast<double>(h), W = static_cast<double>(w);
  p.l = std::clamp(p.l, 0.0, W);
  p.r = std::clamp(p.r, 0.0, W);
  if (p.l > p.r) std::swap(p.l, p.r);
  p.b = std::clamp(p.b, 0.0, H);
  p.t = std::clamp(p.t, 0.0, H);
  if (p.b > p.t) std::swap(p.b, p.t);
  for (double& s : p.slopes) s = std::clamp(s, -1.0, 1.0);
  p.shear_row = std::clamp(p.shear_row, -1.0, 1.0);
  p.shear_col = std::clamp(p.shear_col, -1.0, 1.0);
  const double r_max = std::max(2.0, std::min(H, W) / 2.0);
  p.radius = std::clamp(p.radius, 2.0, r_max);
  const double semi_max = std::max(2.0, std::max(H, W) / 2.0);
  p.semi_row = std::clamp(p.semi_row, 2.0, semi_max);
  p.semi_col = std::clamp(p.semi_col, 2.0, semi_max);
  p.center_row = std::clamp(p.center_row, 0.0, H - 1.0);
  p.center_col = std::clamp(p.center_col, 0.0, W - 1.0);
  return p;
}

Tensor mask_area(const Tensor& mask) { return sum(ste_round(mask)); }

MaskParams initial_params(MaskFamily family, double target_area, double center_row, double center_col,
                          std::size_t h, std::size_t w) {
  if (!(target_area > 0.0)) throw std::invalid_argument("initial_params: target area must be positive");
  MaskParams p;
  p.family = family;
  p.center_row = center_row;
  p.center_col = center_col;
  const double H = static_cast<double>(h), W = static_cast<double>(w);
  switch (family) {
    case MaskFamily::rect:
    case MaskFamily::quad: {
      const double width = std::min(W, std::sqrt(target_area * W / H));
      const double height = std::min(H, target_area / width);
      p.l = center_col - (width - 1.0) / 2.0;
      p.r = center_col + (width - 1.0) / 2.0;
      p.b = center_row - (height - 1.0) / 2.0;
      p.t = center_row + (height - 1.0) / 2.0;
      break;
    }
    case MaskFamily::circle:
    case MaskFamily::ellipse:
      p.radius = std::sqrt(target_area / M_PI);
      break;
    case MaskFamily::oval:
      p.semi_row = std::sqrt(target_area / M_PI * H / W);
      p.semi_col = std::sqrt(target_area / M_PI * W / H);
      break;
  }
  return clamp_params(p, h, w);
}

}  // namespace svp
