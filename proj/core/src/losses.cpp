#include "svp/losses.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace svp {

void LossWeights::validate() const {
  for (double v : {depth, tv, nps, area}) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("loss weights must be finite and nonnegative");
  }
}

Palette Palette::default_palette() {
  Palette p;
  const double values[3] = {0.25, 0.55, 0.85};
  for (double v : values) {
    for (int hue = 0; hue < 9; ++hue) {
      // HSV to RGB with saturation 0.6.
      const double h = hue * 40.0 / 60.0;
      const double c = v * 0.6;
      const double x = c * (1.0 - std::fabs(std::fmod(h, 2.0) - 1.0));
      const double m = v - c;
      double r = 0, g = 0, b = 0;
      switch (static_cast<int>(h)) {
        case 0: r = c, g = x; break;
        case 1: r = x, g = c; break;
        case 2: g = c, b = x; break;
        case 3: g = x, b = c; break;
        case 4: r = x, b = c; break;
        default: r = c, b = x; break;
      }
      p.colors.push_back({r + m, g + m, b + m});
    }
    p.colors.push_back({v, v, v});
  }
  return p;
}

Palette Palette::parse(const std::string& text) {
  Palette p;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    std::istringstream ls(line);
    std::array<double, 3> c{};
    if (!(ls >> c[0] >> c[1] >> c[2])) throw std::invalid_argument("palette line " + std::to_string(lineno) + ": expected 'r g b'");
    std::string rest;
    if (ls >> rest) throw std::invalid_argument("palette line " + std::to_string(lineno) + ": trailing text");
    for (double v : c) {
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("palette line " + std::to_string(lineno) + ": value outside [0,1]");
    }
    p.colors.push_back(c);
  }
  if (p.colors.empty()) throw std::invalid_argument("palette is empty");
  return p;
}

Palette Palette::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open palette " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string Palette::serialize() const {
  std::ostringstream os;
  os << std::setprecision(17);
  for (const auto& c : colors) os << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
  return os.str();
}

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
}

}  // namespace

Tensor loss_l1(const Tensor& d_adv, const Tensor& d_target, const Tensor& patch_mask) {
  require_same(d_adv, d_target, "loss_l1");
  require_same(d_adv, patch_mask, "loss_l1");
  return sum(square((d_adv - d_target) * patch_mask));
}

Tensor loss_l2(const Tensor& d_adv, const Tensor& d_target, const Tensor& object_mask, const Tensor& patch_mask) {
  require_same(d_adv, d_target, "loss_l2");
  require_same(d_adv, object_mask, "loss_l2");
  require_same(d_adv, patch_mask, "loss_l2");
  const Tensor outside = max_scalar(object_mask - patch_mask, 0.0);
  return sum(exp(abs(d_adv - d_target) * outside));
}

Tensor loss_depth(const Tensor& d_adv, const Tensor& d_target, const Tensor& object_mask, const Tensor& patch_mask) {
  return loss_l1(d_adv, d_target, patch_mask) + loss_l2(d_adv, d_target, object_mask, patch_mask);
}

Tensor loss_tv(const Tensor& patch) {
  if (patch.rank() < 2 || patch.dim(0) < 2 || patch.dim(1) < 2) {
    throw std::invalid_argument("loss_tv: patch must be at least 2 x 2");
  }
  const std::size_t h = patch.dim(0) - 1, w = patch.dim(1) - 1;
  const Tensor here = crop(patch, 0, 0, h, w);
  const Tensor below = crop(patch, 1, 0, h, w);
  const Tensor right = crop(patch, 0, 1, h, w);
  return sum(sqrt(square(below - here) + square(right - here) + kTvEpsilon));
}

Tensor loss_nps(const Tensor& patch, const Palette& palette) {
  if (palette.colors.empty()) throw std::invalid_argument("loss_nps: empty palette");
  if (patch.rank() != 3 || patch.dim(2) != 3) throw std::invalid_argument("loss_nps: patch must be H x W x 3");
  const std::size_t n = patch.dim(0) * patch.dim(1);
  static constexpr double kOnes[3] = {1.0, 1.0, 1.0};
  Tensor best;
  for (std::size_t k = 0; k < palette.colors.size(); ++k) {
    std::vector<double> fill(n * 3);
    for (std::size_t p = 0; p < n; ++p) {
      for (int c = 0; c < 3; ++c) fill[p * 3 + c] = palette.colors[k][c];
    }
    const Tensor color = Tensor::from(patch.shape(), std::move(fill));
    const Tensor dist = sqrt(combine_channels(square(patch - color), kOnes));
    best = k == 0 ? dist : minimum(best, dist);
  }
  return sum(best);
}

Tensor loss_nontargeted(const Tensor& d_adv, const Tensor& d_benign, const Tensor& object_mask) {
  require_same(d_adv, d_benign, "loss_nontargeted");
  require_same(d_adv, object_mask, "loss_nontargeted");
  return sum(square((d_adv - d_benign) * object_mask));
}

Tensor loss_total(const LossComponents& c, const LossWeights& w) {
  return c.depth * w.depth + c.tv * w.tv + c.nps * w.nps + c.area * w.area;
}

}  // namespace svp
