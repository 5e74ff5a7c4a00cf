#include "svp/imaging.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace svp {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

// Netpbm header: magic, width, height, maxval; '#' comments allowed between
// fields; exactly one whitespace byte before the raster.
struct PnmHeader {
  std::string magic;
  std::size_t width = 0, height = 0, maxval = 0;
  std::size_t data_offset = 0;
};

PnmHeader parse_pnm_header(const std::string& bytes) {
  PnmHeader h;
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* what) {
    skip_space();
    const std::size_t start = pos;
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 24)) throw FormatError(std::string("pnm: ") + what + " out of range");
      ++pos;
    }
    if (pos == start) throw FormatError(std::string("pnm: malformed ") + what);
    return v;
  };
  if (bytes.size() < 2) throw FormatError("pnm: file too short");
  h.magic = bytes.substr(0, 2);
  pos = 2;
  h.width = read_uint("width");
  h.height = read_uint("height");
  h.maxval = read_uint("maxval");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError("pnm: missing whitespace after header");
  }
  h.data_offset = pos + 1;
  if (h.width == 0 || h.height == 0) throw FormatError("pnm: zero dimension");
  return h;
}

std::string header_text(const char* magic, std::size_t w, std::size_t h, int maxval) {
  std::ostringstream os;
  os << magic << '\n' << w << ' ' << h << '\n' << maxval << '\n';
  return os.str();
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
}

}  // namespace

Tensor Rgb8Image::to_tensor() const {
  std::vector<double> data(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) data[k] = samples[k] / 255.0;
  return Tensor::from({height, width, 3}, std::move(data));
}

Rgb8Image Rgb8Image::from_tensor(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) throw std::invalid_argument("expected H x W x 3 image tensor");
  Rgb8Image out{image.dim(1), image.dim(0), {}};
  out.samples.resize(image.numel());
  for (std::size_t k = 0; k < image.numel(); ++k) out.samples[k] = to_u8(image[k]);
  return out;
}

Tensor Gray8Image::to_tensor() const {
  std::vector<double> data(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) data[k] = samples[k] / 255.0;
  return Tensor::from({height, width}, std::move(data));
}

Gray8Image Gray8Image::from_tensor(const Tensor& map) {
  if (map.rank() != 2) throw std::invalid_argument("expected H x W map tensor");
  Gray8Image out{map.dim(1), map.dim(0), {}};
  out.samples.resize(map.numel());
  for (std::size_t k = 0; k < map.numel(); ++k) out.samples[k] = to_u8(map[k]);
  return out;
}

Rgb8Image decode_ppm(const std::string& bytes) {
  const PnmHeader h = parse_pnm_header(bytes);
  if (h.magic == "P3") throw FormatError("ppm: ASCII P3 is not supported, expected binary P6");
  if (h.magic != "P6") throw FormatError("ppm: bad magic '" + h.magic + "'");
  if (h.maxval != 255) throw FormatError("ppm: maxval must be 255");
  const std::size_t n = h.width * h.height * 3;
  if (bytes.size() < h.data_offset + n) throw FormatError("ppm: truncated payload");
  Rgb8Image img{h.width, h.height, {}};
  img.samples.assign(bytes.begin() + static_cast<long>(h.data_offset),
                     bytes.begin() + static_cast<long>(h.data_offset + n));
  return img;
}

std::string encode_ppm(const Rgb8Image& image) {
  if (image.samples.size() != image.width * image.height * 3) throw std::invalid_argument("ppm: sample count mismatch");
  std::string out = header_text("P6", image.width, image.height, 255);
  out.append(image.samples.begin(), image.samples.end());
  return out;
}

Rgb8Image read_ppm(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }

void write_ppm(const std::filesystem::path& path, const Rgb8Image& image) { write_file(path, encode_ppm(image)); }

Gray8Image read_pgm8(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const PnmHeader h = parse_pnm_header(bytes);
  if (h.magic != "P5") throw FormatError("pgm: bad magic '" + h.magic + "'");
  if (h.maxval != 255) throw FormatError("pgm: expected maxval 255 for 8-bit maps");
  const std::size_t n = h.width * h.height;
  if (bytes.size() < h.data_offset + n) throw FormatError("pgm: truncated payload");
  Gray8Image img{h.width, h.height, {}};
  img.samples.assign(bytes.begin() + static_cast<long>(h.data_offset),
                     bytes.begin() + static_cast<long>(h.data_offset + n));
  return img;
}

void write_pgm8(const std::filesystem::path& path, const Gray8Image& image) {
  if (image.samples.size() != image.width * image.height) throw std::invalid_argument("pgm: sample count mismatch");
  std::string out = header_text("P5", image.width, image.height, 255);
  out.append(image.samples.begin(), image.samples.end());
  write_file(path, out);
}

std::vector<std::uint16_t> quantize_pgm16(const Tensor& map, double scale) {
  if (map.rank() != 2) throw std::invalid_argument("pgm16: expected H x W map");
  if (!(scale > 0.0)) throw std::invalid_argument("pgm16: scale must be positive");
  std::vector<std::uint16_t> out(map.numel());
  for (std::size_t k = 0; k < map.numel(); ++k) {
    const double v = map[k];
    if (!std::isfinite(v)) throw std::domain_error("pgm16: non-finite value in map");
    out[k] = static_cast<std::uint16_t>(std::floor(std::clamp(v / scale, 0.0, 1.0) * 65535.0 + 0.5));
  }
  return out;
}

void write_pgm16(const std::filesystem::path& path, const Tensor& map, double scale) {
  const auto q = quantize_pgm16(map, scale);
  std::string out = header_text("P5", map.dim(1), map.dim(0), 65535);
  out.reserve(out.size() + q.size() * 2);
  for (std::uint16_t v : q) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
  }
  write_file(path, out);
}

Gray16Image read_pgm16(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const PnmHeader h = parse_pnm_header(bytes);
  if (h.magic != "P5" || h.maxval != 65535) throw FormatError("pgm16: expected P5 with maxval 65535");
  const std::size_t n = h.width * h.height;
  if (bytes.size() < h.data_offset + 2 * n) throw FormatError("pgm16: truncated payload");
  Gray16Image img{h.width, h.height, std::vector<std::uint16_t>(n)};
  for (std::size_t k = 0; k < n; ++k) {
    const auto hi = static_cast<std::uint8_t>(bytes[h.data_offset + 2 * k]);
    const auto lo = static_cast<std::uint8_t>(bytes[h.data_offset + 2 * k + 1]);
    img.samples[k] = static_cast<std::uint16_t>((hi << 8) | lo);
  }
  return img;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform(double lo, double hi) {
  const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double Rng::normal(double mu, double sigma) {
  const double u1 = uniform(0.0, 1.0);
  const double u2 = uniform(0.0, 1.0);
  const double r = std::sqrt(-2.0 * std::log1p(-u1));  // 1 - u1 is in (0, 1]
  return mu + sigma * r * std::cos(2.0 * M_PI * u2);
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below(0)");
  return static_cast<std::size_t>(uniform(0.0, 1.0) * static_cast<double>(n)) % n;
}

void Rng::jump() {
  static constexpr std::uint64_t kJump[] = {0x180ec6d33cfd0abaULL, 0xd5a61266f0c9392cULL, 0xa9582618e03fc9aaULL,
                                            0x39abdc4529b1661cULL};
  std::array<std::uint64_t, 4> acc{};
  for (std::uint64_t word : kJump) {
    for (int b = 0; b < 64; ++b) {
      if (word & (std::uint64_t{1} << b)) {
        for (int i = 0; i < 4; ++i) acc[i] ^= s_[i];
      }
      next_u64();
    }
  }
  s_ = acc;
}

Rng Rng::split() {
  Rng child = *this;
  child.jump();
  jump();
  jump();
  return child;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t x = base ^ (0xd1b54a32d192ed03ULL * (stream + 1));
  return splitmix64(x);
}

}  // namespace svp
