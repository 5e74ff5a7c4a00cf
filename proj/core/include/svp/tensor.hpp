#ifndef SVP_TENSOR_HPP
#define SVP_TENSOR_HPP

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace svp {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One entry of the gradient tape. Interior nodes own a backward rule that
// pushes `grad` into the grads of their parents.
struct Node {
  const char* op = "leaf";
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until touched by backward
  bool requires_grad = false;
  bool is_leaf = true;
  bool released = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Dense row-major float64 array with optional participation in a
/// reverse-mode gradient tape.
///
/// Tensors are cheap handles: copying a Tensor shares the underlying node.
/// Results of operations record their parents only when at least one input
/// requires a gradient, so computations on constant inputs build no tape.
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  /// False for the default-constructed empty tensor.
  bool defined() const { return !node_->value.empty(); }

  std::span<const double> data() const;
  /// Writable view of a leaf's values. Throws for interior tape nodes.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat) const { return data()[flat]; }

  bool requires_grad() const;
  bool is_leaf() const;
  const char* op() const;

  /// Accumulated gradient; all zeros when backward never reached this node.
  std::vector<double> grad() const;
  void zero_grad();

  /// Copy of the values with no tape history.
  Tensor detach() const;

  /// Reverse sweep from this scalar. Leaf gradients accumulate; the interior
  /// of the tape is released afterwards, so a second call on the same result
  /// is an error.
  void backward() const;

  // Construction helper for operations.
  static Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                            std::vector<Tensor> parents,
                            std::function<void(detail::Node&)> backward_fn);

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Elementwise operations. Operands must have equal shapes or one of them
// must hold a single element, which is broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double s);
Tensor mul(const Tensor& a, double s);
Tensor rsub(double s, const Tensor& a);  // s - a

Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// Gradient passes where lo <= x <= hi.
Tensor clamp(const Tensor& a, double lo, double hi);
/// max(x, s); gradient passes where x > s.
Tensor max_scalar(const Tensor& a, double s);

/// Round half up in the forward pass, identity in the backward pass.
Tensor ste_round(const Tensor& a);

/// Same values under a new shape with equal element count.
Tensor reshape(const Tensor& a, Shape shape);
/// Element `flat` of `a` as a scalar tensor.
Tensor select(const Tensor& a, std::size_t flat);

enum class Reduction { sum, mean };
Tensor reduce(const Tensor& a, Reduction kind);
inline Tensor sum(const Tensor& a) { return reduce(a, Reduction::sum); }
inline Tensor mean(const Tensor& a) { return reduce(a, Reduction::mean); }

// Image-shaped operations. Images are H x W or H x W x C, channels last.

/// Cross-correlation of an H x W x C input with a kh x kw x C x C' kernel.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad);
/// Adds a per-channel bias of shape [C] to an H x W x C tensor.
Tensor add_channel_bias(const Tensor& input, const Tensor& bias);
/// 2x bilinear upsampling with half-pixel centers and edge clamping.
Tensor upsample_bilinear2x(const Tensor& input);
/// Rows [r0, r0+h) and columns [c0, c0+w) of an image.
Tensor crop(const Tensor& input, std::size_t r0, std::size_t c0, std::size_t h, std::size_t w);
/// Repeats an H x W map into H x W x C.
Tensor broadcast_channels(const Tensor& map, std::size_t channels);
/// Weighted sum over the channel axis of H x W x C, giving H x W.
Tensor combine_channels(const Tensor& image, std::span<const double> weights);

/// Forward affine map in pixel coordinates: (row, col) -> (row', col').
struct Affine2 {
  // row' = m[0]*row + m[1]*col + m[2];  col' = m[3]*row + m[4]*col + m[5]
  std::array<double, 6> m{1, 0, 0, 0, 1, 0};

  static Affine2 identity() { return {}; }
  static Affine2 translation(double drow, double dcol) { return {{1, 0, drow, 0, 1, dcol}}; }
  double determinant() const { return m[0] * m[4] - m[1] * m[3]; }
  Affine2 inverse() const;
  Affine2 then(const Affine2& next) const;  // next(this(x))
  std::array<double, 2> apply(double row, double col) const;
};

/// Warps `image` so that output pixel q takes the bilinear sample of the
/// input at forward.inverse()(q). Taps outside the input read 0. Gradients
/// flow to image values only. out_h/out_w of 0 keep the input size.
Tensor grid_sample_bilinear(const Tensor& image, const Affine2& forward, std::size_t out_h = 0,
                            std::size_t out_w = 0);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add(a, s); }
inline Tensor operator+(double s, const Tensor& a) { return add(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add(a, -s); }
inline Tensor operator-(double s, const Tensor& a) { return rsub(s, a); }
inline Tensor operator*(const Tensor& a, double s) { return mul(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul(a, s); }
inline Tensor operator-(const Tensor& a) { return mul(a, -1.0); }

}  // namespace svp

#endif  // SVP_TENSOR_HPP
