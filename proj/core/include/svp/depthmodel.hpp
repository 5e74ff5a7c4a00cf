#ifndef SVP_DEPTHMODEL_HPP
#define SVP_DEPTHMODEL_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "svp/tensor.hpp"

namespace svp {

/// Differentiable monocular disparity estimator: H x W x 3 image in [0,1]
/// to an H x W map in (0,1), larger meaning closer.
class DisparityModel {
 public:
  virtual ~DisparityModel() = default;
  virtual Tensor forward(const Tensor& image) const = 0;
};

/// Kernels and biases of the six-layer encoder-decoder, in layer order.
struct SurrogateWeights {
  static constexpr int kLayers = 6;
  static constexpr int kKernel = 5;
  // Channel counts along the network: 3 -> 8 -> 16 -> 32 -> 16 -> 8 -> 1.
  static constexpr std::size_t kChannels[kLayers + 1] = {3, 8, 16, 32, 16, 8, 1};

  std::vector<Tensor> kernels;  // 5 x 5 x C_in x C_out
  std::vector<Tensor> biases;   // C_out

  /// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) for every kernel and bias.
  static SurrogateWeights random(std::uint64_t seed);
  /// Throws unless every tensor has the architecture's dims.
  void validate() const;
};

/// Three stride-2 convolutions, then three rounds of 2x bilinear upsampling
/// followed by a convolution. Input is standardized, hidden layers use
/// sqrt(3) * tanh and the output is a sigmoid.
class SurrogateModel final : public DisparityModel {
 public:
  explicit SurrogateModel(SurrogateWeights weights);
  Tensor forward(const Tensor& image) const override;
  const SurrogateWeights& weights() const { return weights_; }

 private:
  SurrogateWeights weights_;
};

Tensor surrogate_forward(const SurrogateWeights& weights, const Tensor& image);

struct DepthConversion {
  double min_depth = 0.1;
  double max_depth = 100.0;

  double depth(double disparity) const {
    return 1.0 / (1.0 / max_depth + (1.0 / min_depth - 1.0 / max_depth) * disparity);
  }
  double disparity(double depth) const {
    return (1.0 / depth - 1.0 / max_depth) / (1.0 / min_depth - 1.0 / max_depth);
  }
};

/// depth = 1 / (1/max + (1/min - 1/max) d), elementwise.
Tensor disparity_to_depth(const Tensor& disparity, const DepthConversion& conversion = {});

/// SVPW1: magic "SVPW1", u32 tensor count, then per tensor u32 rank,
/// u32 dims..., f64 data; all little-endian. Kernels and biases interleave
/// in layer order.
void save_weights(const std::filesystem::path& path, const SurrogateWeights& weights);
SurrogateWeights load_weights(const std::filesystem::path& path);
std::string encode_weights(const SurrogateWeights& weights);
SurrogateWeights decode_weights(const std::string& bytes);

}  // namespace svp

#endif  // SVP_DEPTHMODEL_HPP
