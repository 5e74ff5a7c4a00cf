#include "svp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace svp {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor::Tensor() : node_(std::make_shared<detail::Node>()) { node_->shape = {0}; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> data(shape_numel(shape), value);
  return from(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (data.size() != shape_numel(shape)) {
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) throw std::out_of_range("tensor axis out of range");
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->value.size(); }

std::span<const double> Tensor::data() const { return node_->value; }

std::span<double> Tensor::mutable_data() {
  if (!node_->is_leaf) throw std::logic_error("cannot write into an interior tape node");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->is_leaf; }
const char* Tensor::op() const { return node_->op; }

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

Tensor Tensor::make_result(const char* op, Shape shape, std::vector<double> value,
                           std::vector<Tensor> parents,
                           std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->op = op;
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->is_leaf = false;
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Tensor& p) { return p.requires_grad(); });
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  if (numel() != 1) throw std::invalid_argument("backward() needs a scalar loss, got " + shape_str(shape()));
  if (node_->released) throw std::logic_error("backward() called twice on the same tape");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a deterministic topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        if (p->released) throw std::logic_error("tape segment already consumed by a previous backward()");
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->is_leaf) continue;
    n->ensure_grad();
    if (n->backward_fn) n->backward_fn(*n);
  }
  for (detail::Node* n : order) {
    if (n->is_leaf) continue;
    n->backward_fn = nullptr;
    n->parents.clear();
    n->grad.clear();
    n->grad.shrink_to_fit();
    n->released = true;
  }
}

// ---------------------------------------------------------------------------
// Elementwise operations

namespace {

void require_finite(const Tensor& t, const char* op) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw std::domain_error(std::string(op) + ": non-finite input");
  }
}

struct Broadcast {
  Shape shape;
  std::size_t n;
  bool a_scalar;
  bool b_scalar;
};

Broadcast broadcast_shapes(const Tensor& a, const Tensor& b, const char* op) {
  const std::size_t na = a.numel(), nb = b.numel();
  if (a.shape() == b.shape()) return {a.shape(), na, false, false};
  if (na == 1 && nb == 1) return {a.shape(), 1, false, false};
  if (na == 1) return {b.shape(), nb, true, false};
  if (nb == 1) return {a.shape(), na, false, true};
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                              shape_str(b.shape()));
}

// f(x, y) is the value; dfa/dfb give the partial derivatives given (x, y, out).
template <class F, class DA, class DB>
Tensor binary_op(const char* op, const Tensor& a, const Tensor& b, F f, DA dfa, DB dfb) {
  require_finite(a, op);
  require_finite(b, op);
  const Broadcast bc = broadcast_shapes(a, b, op);
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(bc.n);
  for (std::size_t k = 0; k < bc.n; ++k) {
    out[k] = f(av[bc.a_scalar ? 0 : k], bv[bc.b_scalar ? 0 : k]);
  }
  return Tensor::make_result(
      op, bc.shape, std::move(out), {a, b},
      [an = a.node(), bn = b.node(), bc, dfa, dfb](detail::Node& self) {
        const auto& x = an->value;
        const auto& y = bn->value;
        const auto& g = self.grad;
        const auto& o = self.value;
        if (an->requires_grad) {
          auto& ga = an->ensure_grad();
          for (std::size_t k = 0; k < bc.n; ++k) {
            const std::size_t ia = bc.a_scalar ? 0 : k, ib = bc.b_scalar ? 0 : k;
            ga[ia] += g[k] * dfa(x[ia], y[ib], o[k]);
          }
        }
        if (bn->requires_grad) {
          auto& gb = bn->ensure_grad();
          for (std::size_t k = 0; k < bc.n; ++k) {
            const std::size_t ia = bc.a_scalar ? 0 : k, ib = bc.b_scalar ? 0 : k;
            gb[ib] += g[k] * dfb(x[ia], y[ib], o[k]);
          }
        }
      });
}

// df(x, out) is the derivative.
template <class F, class DF>
Tensor unary_op(const char* op, const Tensor& a, F f, DF df) {
  require_finite(a, op);
  const auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t k = 0; k < av.size(); ++k) out[k] = f(av[k]);
  return Tensor::make_result(op, a.shape(), std::move(out), {a}, [an = a.node(), df](detail::Node& self) {
    auto& ga = an->ensure_grad();
    const auto& x = an->value;
    for (std::size_t k = 0; k < x.size(); ++k) ga[k] += self.grad[k] * df(x[k], self.value[k]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double v : b.data()) {
    if (v == 0.0) throw std::domain_error("div: zero denominator");
  }
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; }, [](double x, double y, double) { return -x / (y * y); });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  // Ties route the gradient to the first operand.
  return binary_op(
      "minimum", a, b, [](double x, double y) { return y < x ? y : x; },
      [](double x, double y, double) { return y < x ? 0.0 : 1.0; },
      [](double x, double y, double) { return y < x ? 1.0 : 0.0; });
}

Tensor add(const Tensor& a, double s) {
  return unary_op("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul(const Tensor& a, double s) {
  return unary_op("mul_scalar", a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor rsub(double s, const Tensor& a) {
  return unary_op("rsub_scalar", a, [s](double x) { return s - x; }, [](double, double) { return -1.0; });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary_op("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor abs(const Tensor& a) {
  return unary_op(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary_op("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  for (double v : a.data()) {
    if (v < 0.0) throw std::domain_error("sqrt: negative input");
  }
  return unary_op(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  return unary_op(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor max_scalar(const Tensor& a, double s) {
  return unary_op(
      "max_scalar", a, [s](double x) { return x > s ? x : s; }, [s](double x, double) { return x > s ? 1.0 : 0.0; });
}

Tensor ste_round(const Tensor& a) {
  return unary_op(
      "ste_round", a, [](double x) { return std::floor(x + 0.5); }, [](double, double) { return 1.0; });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw std::invalid_argument("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> v(a.data().begin(), a.data().end());
  return Tensor::make_result("reshape", std::move(shape), std::move(v), {a}, [an = a.node()](detail::Node& self) {
    auto& ga = an->ensure_grad();
    for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += self.grad[k];
  });
}

Tensor select(const Tensor& a, std::size_t flat) {
  if (flat >= a.numel()) throw std::out_of_range("select: index out of range");
  return Tensor::make_result("select", {}, {a[flat]}, {a}, [an = a.node(), flat](detail::Node& self) {
    an->ensure_grad()[flat] += self.grad[0];
  });
}

Tensor reduce(const Tensor& a, Reduction kind) {
  const std::size_t n = a.numel();
  if (n == 0) throw std::invalid_argument("reduce: empty tensor");
  double s = 0.0;
  for (double v : a.data()) s += v;
  const double scale = kind == Reduction::mean ? 1.0 / static_cast<double>(n) : 1.0;
  return Tensor::make_result(kind == Reduction::mean ? "mean" : "sum", {}, {s * scale}, {a},
                             [an = a.node(), scale](detail::Node& self) {
                               auto& ga = an->ensure_grad();
                               const double g = self.grad[0] * scale;
                               for (double& v : ga) v += g;
                             });
}

}  // namespace svp
