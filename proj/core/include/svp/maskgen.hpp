#ifndef SVP_MASKGEN_HPP
#define SVP_MASKGEN_HPP

#include <array>
#include <string>

#include "svp/tensor.hpp"

namespace svp {

enum class MaskFamily { rect, quad, circle, ellipse, oval };

std::string to_string(MaskFamily family);
MaskFamily parse_mask_family(const std::string& name);

/// Shape parameters in object-grid pixel units. Rows are indexed by i in
/// [0, h) and columns by j in [0, w); t and b bound rows (b <= t), l and r
/// bound columns.
struct MaskParams {
  MaskFamily family = MaskFamily::rect;
  // Boundaries.
  double l = 0, r = 0, t = 0, b = 0;
  // Edge slopes s_l, s_r, s_t, s_b in [-1, 1].
  std::array<double, 4> slopes{0, 0, 0, 0};
  // Center (row, col) and radius.
  double center_row = 0, center_col = 0;
  double radius = 2;
  // Center offsets per pixel for the sheared ellipse.
  double shear_row = 0, shear_col = 0;
  // Semi-axes along rows and columns for the axis-aligned oval.
  double semi_row = 2, semi_col = 2;

  bool operator==(const MaskParams&) const = default;
};

/// Number of optimized scalars for a family and their packing order:
///   rect    l r t b
///   quad    l r t b s_l s_r s_t s_b
///   circle  row col R
///   ellipse row col R shear_row shear_col
///   oval    row col semi_row semi_col
std::size_t packed_size(MaskFamily family);
std::vector<double> pack(const MaskParams& params);
MaskParams unpack(MaskFamily family, std::span<const double> values, MaskParams base = {});

struct Mask {
  Tensor grid;  // h x w, values in [0, 1]
  bool is_binary = false;
};

enum class Binarizer {
  ste,   // round half up forward, identity backward
  none,  // leave the pre-binarization surface (gradient checks)
};

/// Differentiable mask for the family named by `meta`; `packed` holds the
/// optimized scalars in pack() order and may require gradients.
Mask make_mask(MaskFamily family, const Tensor& packed, std::size_t h, std::size_t w,
               Binarizer binarizer = Binarizer::ste);

Mask rect_mask(const MaskParams& params, std::size_t h, std::size_t w);
Mask quad_mask(const MaskParams& params, std::size_t h, std::size_t w);
Mask circle_mask(const MaskParams& params, std::size_t h, std::size_t w);
Mask ellipse_mask(const MaskParams& params, std::size_t h, std::size_t w);
Mask oval_mask(const MaskParams& params, std::size_t h, std::size_t w);
Mask generate_mask(const MaskParams& params, std::size_t h, std::size_t w);

/// Projects every parameter into its box and restores l <= r, b <= t by
/// swapping.
MaskParams clamp_params(const MaskParams& params, std::size_t h, std::size_t w);

/// Sum of the straight-through binarized mask.
Tensor mask_area(const Tensor& mask);

/// Initial shape covering `target_area` pixels, centered on (row, col).
MaskParams initial_params(MaskFamily family, double target_area, double center_row, double center_col,
                          std::size_t h, std::size_t w);

}  // namespace svp

#endif  // SVP_MASKGEN_HPP
