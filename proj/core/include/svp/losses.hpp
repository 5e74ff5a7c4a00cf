#ifndef SVP_LOSSES_HPP
#define SVP_LOSSES_HPP

#include <array>
#include <filesystem>
#include <vector>

#include "svp/tensor.hpp"

namespace svp {

struct LossWeights {
  double depth = 1.0;  // lambda_1
  double tv = 5e-4;    // lambda_2
  double nps = 5e-4;   // lambda_3
  double area = 1e-3;  // lambda_4

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

/// Printable colors, RGB in [0,1].
struct Palette {
  std::vector<std::array<double, 3>> colors;

  /// 3 lightness rows x 10 columns (nine hues and a neutral).
  static Palette default_palette();
  static Palette parse(const std::string& text);
  static Palette load(const std::filesystem::path& path);
  std::string serialize() const;
};

inline constexpr double kTvEpsilon = 1e-12;

/// sum [(D_adv - D_t) * M_p]^2
Tensor loss_l1(const Tensor& d_adv, const Tensor& d_target, const Tensor& patch_mask);
/// sum exp(|D_adv - D_t| * max(M_O - M_p, 0)); every pixel contributes at
/// least exp(0) = 1.
Tensor loss_l2(const Tensor& d_adv, const Tensor& d_target, const Tensor& object_mask, const Tensor& patch_mask);
Tensor loss_depth(const Tensor& d_adv, const Tensor& d_target, const Tensor& object_mask, const Tensor& patch_mask);
/// sum over pixels with a lower and a right neighbor of
/// sqrt(dy^2 + dx^2 + eps), per channel.
Tensor loss_tv(const Tensor& patch);
/// sum over pixels of the distance to the nearest palette color.
Tensor loss_nps(const Tensor& patch, const Palette& palette);
/// sum [(D_adv - D_b) * M_O]^2, to be maximized.
Tensor loss_nontargeted(const Tensor& d_adv, const Tensor& d_benign, const Tensor& object_mask);

struct LossComponents {
  Tensor depth;
  Tensor tv;
  Tensor nps;
  Tensor area;
};

Tensor loss_total(const LossComponents& c, const LossWeights& w);

}  // namespace svp

#endif  // SVP_LOSSES_HPP
