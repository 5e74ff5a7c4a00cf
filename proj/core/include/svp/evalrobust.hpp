#ifndef SVP_EVALROBUST_HPP
#define SVP_EVALROBUST_HPP

#include <string>
#include <vector>

#include "svp/depthmodel.hpp"
#include "svp/imaging.hpp"
#include "svp/tensor.hpp"

namespace svp {

/// Which map the affected-pixel ratio compares against.
enum class AlphaReference { benign, target };

std::string to_string(AlphaReference ref);
AlphaReference parse_alpha_reference(const std::string& name);

inline constexpr double kAlphaThreshold = 0.01;

struct MetricsRecord {
  double mse_t = 0;      // masked mean (D_t - D_adv)^2
  double mse_b = 0;      // masked mean (D_b - D_adv)^2
  double alpha = 0;      // fraction of object pixels moved by >= 0.01
  double eps_disp = 0;   // masked mean |D_adv - D_b| / D_b
  double eps_depth = 0;  // same on converted depths

  MetricsRecord& operator+=(const MetricsRecord& o);
  MetricsRecord operator/(double n) const;
};

MetricsRecord metrics(const Tensor& d_adv, const Tensor& d_benign, const Tensor& d_target, const Tensor& object_mask,
                      const DepthConversion& conversion = {}, AlphaReference reference = AlphaReference::benign);

// Input transformations used as defenses. All map [0,1] images to [0,1].

/// round(v * (2^n - 1)) / (2^n - 1), half up.
Tensor bit_depth_reduce(const Tensor& image, int n_bits);
/// clamp(v + N(0, sigma)), drawn in row-major, channel-minor order.
Tensor gaussian_noise(const Tensor& image, double sigma, Rng& rng);
/// Per-channel k x k median with edge replication.
Tensor median_blur(const Tensor& image, int k);
/// 8x8 DCT quantization round trip per channel with the luminance table
/// scaled by the usual quality law.
Tensor jpeg_approx(const Tensor& image, int quality);
/// Quantization table used by jpeg_approx at this quality, row-major 8x8.
std::vector<int> jpeg_quant_table(int quality);

enum class RobustTransform { jpeg, bit_depth, gaussian_noise, median_blur };
std::string to_string(RobustTransform t);
RobustTransform parse_robust_transform(const std::string& name);
/// Applies one transform at the given strength (quality, bits, sigma or k).
Tensor apply_robust_transform(const Tensor& image, RobustTransform t, double strength, Rng& rng);

}  // namespace svp

#endif  // SVP_EVALROBUST_HPP
