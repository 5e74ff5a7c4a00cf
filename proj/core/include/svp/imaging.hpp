#ifndef SVP_IMAGING_HPP
#define SVP_IMAGING_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "svp/tensor.hpp"

namespace svp {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit RGB raster, row-major, interleaved.
struct Rgb8Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> samples;  // height * width * 3

  bool operator==(const Rgb8Image&) const = default;

  /// H x W x 3 tensor with values v / 255.
  Tensor to_tensor() const;
  /// Inverse of to_tensor(): clamp to [0,1], scale by 255, round half up.
  static Rgb8Image from_tensor(const Tensor& image);
};

/// 8-bit single-channel raster (masks, 0/255).
struct Gray8Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> samples;

  bool operator==(const Gray8Image&) const = default;

  Tensor to_tensor() const;
  static Gray8Image from_tensor(const Tensor& map);
};

Rgb8Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Rgb8Image& image);
Rgb8Image decode_ppm(const std::string& bytes);
std::string encode_ppm(const Rgb8Image& image);

Gray8Image read_pgm8(const std::filesystem::path& path);
void write_pgm8(const std::filesystem::path& path, const Gray8Image& image);

/// P5 with maxval 65535, big-endian samples round(clamp(v/scale,0,1)*65535).
std::vector<std::uint16_t> quantize_pgm16(const Tensor& map, double scale);
void write_pgm16(const std::filesystem::path& path, const Tensor& map, double scale);
/// Raw 16-bit samples and dimensions of a P5/65535 file.
struct Gray16Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint16_t> samples;
};
Gray16Image read_pgm16(const std::filesystem::path& path);

/// xoshiro256** seeded through splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [lo, hi) from the top 53 bits.
  double uniform(double lo, double hi);
  /// Box-Muller; both uniforms are consumed on every call.
  double normal(double mu, double sigma);
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  /// Copy of this generator advanced by 2^128 draws, then this one is
  /// advanced as well so repeated calls hand out disjoint streams.
  Rng split();

  std::array<std::uint64_t, 4> state() const { return s_; }

 private:
  void jump();
  std::array<std::uint64_t, 4> s_{};
};

/// Seed for an independent stream identified by (base seed, stream index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

inline double rng_uniform(Rng& rng, double lo, double hi) { return rng.uniform(lo, hi); }
inline double rng_normal(Rng& rng, double mu, double sigma) { return rng.normal(mu, sigma); }

}  // namespace svp

#endif  // SVP_IMAGING_HPP
