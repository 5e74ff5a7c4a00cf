#ifndef SVP_SRC_BINARY_IO_HPP
#define SVP_SRC_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "svp/imaging.hpp"
#include "svp/tensor.hpp"

namespace svp::io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  void tensor(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) f64(v);
  }
  void doubles(const std::vector<double>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (double x : v) f64(x);
  }
  std::string take() { return std::move(out_); }

 private:
  template <class T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& bytes, const char* what) : bytes_(bytes), what_(what) {}

  void expect(std::string_view magic) {
    need(magic.size());
    if (std::string_view(bytes_).substr(pos_, magic.size()) != magic) {
      throw FormatError(std::string(what_) + ": bad magic");
    }
    pos_ += magic.size();
  }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  Tensor tensor() {
    const std::uint32_t rank = u32();
    if (rank > 8) throw FormatError(std::string(what_) + ": implausible tensor rank");
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = u32();
      n *= d;
      if (n > (std::size_t{1} << 32)) throw FormatError(std::string(what_) + ": implausible tensor size");
    }
    need(n * 8);
    std::vector<double> data(n);
    for (auto& v : data) v = f64();
    return Tensor::from(std::move(shape), std::move(data));
  }
  std::vector<double> doubles() {
    const std::uint32_t n = u32();
    need(std::size_t{n} * 8);
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  void finish() const {
    if (!at_end()) throw FormatError(std::string(what_) + ": trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string(what_) + ": truncated file");
  }
  template <class T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }
  const std::string& bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

std::string read_all(const std::string& path);
void write_all(const std::string& path, const std::string& bytes);

}  // namespace svp::io

#endif  // SVP_SRC_BINARY_IO_HPP
