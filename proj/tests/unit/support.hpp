#ifndef SVP_TESTS_SUPPORT_HPP
#define SVP_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "svp/imaging.hpp"
#include "svp/tensor.hpp"

namespace svp::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

struct GradCheck {
  double max_rel_err = 0;   // worst coordinate
  double norm_rel_err = 0;  // |a - n| / max(|a|, |n|) over the checked coordinates
  std::size_t checked = 0;
};

/// Compares the tape gradient of f at x against central differences with
/// step h on the listed coordinates (all when empty). The relative error
/// uses max(|analytic|, |numeric|, floor) as denominator.
inline GradCheck gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           std::vector<std::size_t> coords = {}, double h = 1e-3, double floor = 1e-6) {
  const auto x0 = x.data();
  const std::vector<double> base(x0.begin(), x0.end());
  Tensor leaf = Tensor::from(x.shape(), base, true);
  f(leaf).backward();
  const auto analytic = leaf.grad();
  if (coords.empty()) {
    for (std::size_t k = 0; k < base.size(); ++k) coords.push_back(k);
  }
  GradCheck out;
  double diff2 = 0, a2 = 0, n2 = 0;
  for (std::size_t k : coords) {
    auto plus = base, minus = base;
    plus[k] += h;
    minus[k] -= h;
    const double fp = f(Tensor::from(x.shape(), plus)).item();
    const double fm = f(Tensor::from(x.shape(), minus)).item();
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::fabs(analytic[k]), std::fabs(numeric), floor});
    out.max_rel_err = std::max(out.max_rel_err, std::fabs(analytic[k] - numeric) / denom);
    diff2 += (analytic[k] - numeric) * (analytic[k] - numeric);
    a2 += analytic[k] * analytic[k];
    n2 += numeric * numeric;
    ++out.checked;
  }
  out.norm_rel_err = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), floor});
  return out;
}

/// Weighted sum with fixed random weights, so every output element carries
/// a distinct upstream gradient.
inline Tensor weighted_sum(const Tensor& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(y * random_tensor(y.shape(), rng, 0.5, 1.5));
}

}  // namespace svp::testing

#endif  // SVP_TESTS_SUPPORT_HPP
