#include "svp/depthmodel.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "binary_io.hpp"
#include "svp/imaging.hpp"

namespace svp {

namespace io {

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

}  // namespace io

SurrogateWeights SurrogateWeights::random(std::uint64_t seed) {
  Rng rng(seed);
  SurrogateWeights w;
  for (int layer = 0; layer < kLayers; ++layer) {
    const std::size_t cin = kChannels[layer], cout = kChannels[layer + 1];
    const std::size_t fan_in = kKernel * kKernel * cin;
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::vector<double> k(kKernel * kKernel * cin * cout);
    for (auto& v : k) v = rng.uniform(-bound, bound);
    std::vector<double> b(cout);
    for (auto& v : b) v = rng.uniform(-bound, bound);
    w.kernels.push_back(Tensor::from({kKernel, kKernel, cin, cout}, std::move(k)));
    w.biases.push_back(Tensor::from({cout}, std::move(b)));
  }
  return w;
}

void SurrogateWeights::validate() const {
  if (kernels.size() != kLayers || biases.size() != kLayers) {
    throw std::invalid_argument("surrogate weights: expected " + std::to_string(kLayers) + " layers");
  }
  for (int layer = 0; layer < kLayers; ++layer) {
    const Shape want_k = {kKernel, kKernel, kChannels[layer], kChannels[layer + 1]};
    const Shape want_b = {kChannels[layer + 1]};
    if (kernels[layer].shape() != want_k || biases[layer].shape() != want_b) {
      throw std::invalid_argument("surrogate weights: layer " + std::to_string(layer) + " has dims " +
                                  shape_str(kernels[layer].shape()) + " / " + shape_str(biases[layer].shape()) +
                                  ", expected " + shape_str(want_k) + " / " + shape_str(want_b));
    }
  }
}

SurrogateModel::SurrogateModel(SurrogateWeights weights) : weights_(std::move(weights)) { weights_.validate(); }

Tensor SurrogateModel::forward(const Tensor& image) const { return surrogate_forward(weights_, image); }

namespace {

constexpr double kInputMean = 0.45;
constexpr double kInputStd = 0.225;
// The uniform init has weight variance 1/(3 fan_in); this gain makes each
// hidden layer variance-preserving near the origin.
const double kHiddenGain = std::sqrt(3.0);

Tensor hidden_activation(const Tensor& x) { return tanh(x) * kHiddenGain; }

}  // namespace

Tensor surrogate_forward(const SurrogateWeights& w, const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) throw std::invalid_argument("surrogate: expected H x W x 3 image");
  const std::size_t H = image.dim(0), W = image.dim(1);
  if (H % 8 != 0 || W % 8 != 0 || H == 0 || W == 0) {
    throw std::invalid_argument("surrogate: image dims must be positive multiples of 8, got " +
                                shape_str(image.shape()));
  }
  constexpr int pad = SurrogateWeights::kKernel / 2;
  Tensor x = (image - kInputMean) * (1.0 / kInputStd);
  for (int layer = 0; layer < 3; ++layer) {
    x = hidden_activation(add_channel_bias(conv2d(x, w.kernels[layer], 2, pad), w.biases[layer]));
  }
  for (int layer = 3; layer < SurrogateWeights::kLayers; ++layer) {
    x = add_channel_bias(conv2d(upsample_bilinear2x(x), w.kernels[layer], 1, pad), w.biases[layer]);
    x = layer + 1 < SurrogateWeights::kLayers ? hidden_activation(x) : sigmoid(x);
  }
  return reshape(x, {H, W});
}

Tensor disparity_to_depth(const Tensor& disparity, const DepthConversion& c) {
  const double lo = 1.0 / c.max_depth;
  const double span = 1.0 / c.min_depth - 1.0 / c.max_depth;
  return Tensor::scalar(1.0) / (disparity * span + lo);
}

std::string encode_weights(const SurrogateWeights& weights) {
  weights.validate();
  io::Writer wr;
  wr.bytes("SVPW1");
  wr.u32(static_cast<std::uint32_t>(2 * SurrogateWeights::kLayers));
  for (int layer = 0; layer < SurrogateWeights::kLayers; ++layer) {
    wr.tensor(weights.kernels[layer]);
    wr.tensor(weights.biases[layer]);
  }
  return wr.take();
}

SurrogateWeights decode_weights(const std::string& bytes) {
  io::Reader rd(bytes, "SVPW1");
  rd.expect("SVPW1");
  const std::uint32_t count = rd.u32();
  if (count != 2 * SurrogateWeights::kLayers) throw FormatError("SVPW1: unexpected tensor count");
  SurrogateWeights w;
  for (int layer = 0; layer < SurrogateWeights::kLayers; ++layer) {
    w.kernels.push_back(rd.tensor());
    w.biases.push_back(rd.tensor());
  }
  rd.finish();
  try {
    w.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("SVPW1: ") + e.what());
  }
  return w;
}

void save_weights(const std::filesystem::path& path, const SurrogateWeights& weights) {
  io::write_all(path.string(), encode_weights(weights));
}

SurrogateWeights load_weights(const std::filesystem::path& path) { return decode_weights(io::read_all(path.string())); }

}  // namespace svp
