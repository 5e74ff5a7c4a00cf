#include "svp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace svp {

void SplineShape::validate(std::size_t h, std::size_t w) const {
  if (points.size() < 4) throw std::invalid_argument("spline shape needs at least 4 control points");
  for (const auto& p : points) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || p[0] < 0.0 || p[1] < 0.0 ||
        p[0] > static_cast<double>(h) - 1.0 || p[1] > static_cast<double>(w) - 1.0) {
      throw std::invalid_argument("spline control point outside the grid");
    }
  }
}

std::string SplineShape::serialize() const {
  std::ostringstream os;
  os << std::setprecision(17);
  for (const auto& p : points) os << p[0] << ' ' << p[1] << '\n';
  return os.str();
}

SplineShape SplineShape::parse(const std::string& text) {
  SplineShape s;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::array<double, 2> p{};
    std::string rest;
    if (!(ls >> p[0] >> p[1]) || (ls >> rest)) throw std::invalid_argument("control point line must be 'row col'");
    s.points.push_back(p);
  }
  if (s.points.size() < 4) throw std::invalid_argument("spline shape needs at least 4 control points");
  return s;
}

namespace {

// Solves the cyclic system M[i-1] + 4 M[i] + M[i+1] = rhs[i]. The matrix is
// strictly diagonally dominant, so elimination needs no pivoting.
std::vector<double> solve_cyclic(const std::vector<double>& rhs) {
  const std::size_t n = rhs.size();
  std::vector<double> a(n * n, 0.0), b = rhs;
  for (std::size_t i = 0; i < n; ++i) {
    a[i * n + i] = 4.0;
    a[i * n + (i + 1) % n] += 1.0;
    a[i * n + (i + n - 1) % n] += 1.0;
  }
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= a[r * n + k] * x[k];
    x[r] = s / a[r * n + r];
  }
  return x;
}

}  // namespace

std::vector<std::array<double, 2>> spline_polyline(const SplineShape& shape, std::size_t samples_per_segment) {
  const std::size_t k = shape.points.size();
  if (k < 4) throw std::invalid_argument("spline shape needs at least 4 control points");
  if (samples_per_segment < 1) throw std::invalid_argument("spline sampling density must be >= 1");
  std::array<std::vector<double>, 2> second;
  for (int axis = 0; axis < 2; ++axis) {
    std::vector<double> rhs(k);
    for (std::size_t i = 0; i < k; ++i) {
      const double prev = shape.points[(i + k - 1) % k][axis], here = shape.points[i][axis],
                   next = shape.points[(i + 1) % k][axis];
      rhs[i] = 6.0 * (next - 2.0 * here + prev);
    }
    second[axis] = solve_cyclic(rhs);
  }
  std::vector<std::array<double, 2>> out;
  out.reserve(k * samples_per_segment);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t n = (i + 1) % k;
    for (std::size_t s = 0; s < samples_per_segment; ++s) {
      const double u = static_cast<double>(s) / static_cast<double>(samples_per_segment), v = 1.0 - u;
      std::array<double, 2> p{};
      for (int axis = 0; axis < 2; ++axis) {
        p[axis] = v * shape.points[i][axis] + u * shape.points[n][axis] +
                  ((v * v * v - v) * second[axis][i] + (u * u * u - u) * second[axis][n]) / 6.0;
      }
      out.push_back(p);
    }
  }
  return out;
}

Tensor rasterize_polygon(const std::vector<std::array<double, 2>>& poly, std::size_t h, std::size_t w) {
  std::vector<double> out(h * w, 0.0);
  std::vector<double> xs;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < h; ++i) {
    const double y = static_cast<double>(i);
    xs.clear();
    for (std::size_t e = 0; e < n; ++e) {
      const auto& a = poly[e];
      const auto& b = poly[(e + 1) % n];
      if ((a[0] > y) != (b[0] > y)) xs.push_back((b[1] - a[1]) * (y - a[0]) / (b[0] - a[0]) + a[1]);
    }
    if (xs.empty()) continue;
    std::sort(xs.begin(), xs.end());
    for (std::size_t j = 0; j < w; ++j) {
      const auto right = xs.end() - std::upper_bound(xs.begin(), xs.end(), static_cast<double>(j));
      if (right % 2 == 1) out[i * w + j] = 1.0;
    }
  }
  return Tensor::from({h, w}, std::move(out));
}

Tensor rasterize_spline(const SplineShape& shape, std::size_t h, std::size_t w) {
  shape.validate(h, w);
  return rasterize_polygon(spline_polyline(shape), h, w);
}

void DeConfig::validate() const {
  if (population < 4) throw std::invalid_argument("DE population must be >= 4");
  if (control_points < 4) throw std::invalid_argument("DE needs at least 4 control points");
  if (!(differential_weight > 0.0 && differential_weight <= 2.0)) throw std::invalid_argument("DE F must be in (0, 2]");
  if (!(crossover >= 0.0 && crossover <= 1.0)) throw std::invalid_argument("DE CR must be in [0, 1]");
  if (batch < 1) throw std::invalid_argument("DE batch must be >= 1");
}

double de_fitness(const AttackConfig& config, const DeConfig& de, const ObjectSample& object,
                  const Tensor& frozen_patch, std::span<const Tensor> scenes, const DisparityModel& model,
                  const Tensor& mask) {
  Rng rng(derive_seed(de.seed, 0));
  const BatchEval be = evaluate_batch(config, object, scenes, model, frozen_patch.detach(), mask, rng, de.batch);
  return be.row.depth + config.weights.area * be.row.area;
}

namespace {

using Genome = std::vector<double>;  // row0 col0 row1 col1 ...

SplineShape to_shape(const Genome& g) {
  SplineShape s;
  for (std::size_t i = 0; i + 1 < g.size(); i += 2) s.points.push_back({g[i], g[i + 1]});
  return s;
}

void clamp_genome(Genome& g, std::size_t h, std::size_t w) {
  for (std::size_t i = 0; i + 1 < g.size(); i += 2) {
    g[i] = std::clamp(g[i], 0.0, static_cast<double>(h) - 1.0);
    g[i + 1] = std::clamp(g[i + 1], 0.0, static_cast<double>(w) - 1.0);
  }
}

}  // namespace

DeResult de_optimize(const AttackConfig& config, const DeConfig& de, const ObjectSample& object,
                     const Tensor& frozen_patch, std::span<const Tensor> scenes, const DisparityModel& model) {
  config.validate();
  de.validate();
  if (frozen_patch.shape() != object.image.shape()) throw std::invalid_argument("DE: patch dims differ from the object");
  const std::size_t h = object.height(), w = object.width();
  const std::size_t limit = de.max_evaluations > 0 ? de.max_evaluations : de.population * (de.generations + 1);
  Rng rng(derive_seed(de.seed, 1));

  double area = 0, cr = 0, cc = 0;
  const auto m = object.mask.data();
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      area += m[i * w + j];
      cr += m[i * w + j] * static_cast<double>(i);
      cc += m[i * w + j] * static_cast<double>(j);
    }
  }
  if (area <= 0.0) throw std::invalid_argument("DE: empty object mask");
  cr /= area;
  cc /= area;
  const double radius = std::sqrt(config.budget * area / M_PI);
  const double sector = 2.0 * M_PI / static_cast<double>(de.control_points);

  DeResult result;
  auto fitness = [&](const Genome& g) {
    ++result.evaluations;
    return de_fitness(config, de, object, frozen_patch, scenes, model, rasterize_spline(to_shape(g), h, w));
  };

  // Jittered polygons around the object centroid with the budgeted area.
  std::vector<Genome> pop(de.population);
  std::vector<double> fit(de.population, std::numeric_limits<double>::infinity());
  for (auto& g : pop) {
    g.resize(2 * de.control_points);
    for (std::size_t k = 0; k < de.control_points; ++k) {
      const double angle = sector * (static_cast<double>(k) + rng.uniform(-0.3, 0.3));
      const double r = radius * rng.uniform(0.6, 1.4);
      g[2 * k] = cr + r * std::sin(angle);
      g[2 * k + 1] = cc + r * std::cos(angle);
    }
    clamp_genome(g, h, w);
  }
  std::size_t best = 0;
  for (std::size_t i = 0; i < pop.size() && result.evaluations < limit; ++i) {
    fit[i] = fitness(pop[i]);
    if (fit[i] < fit[best]) best = i;
  }
  result.history.push_back(fit[best]);

  const std::size_t dims = 2 * de.control_points;
  for (std::size_t gen = 0; gen < de.generations && result.evaluations < limit; ++gen) {
    for (std::size_t i = 0; i < pop.size() && result.evaluations < limit; ++i) {
      std::size_t a, b, c;
      do a = rng.below(pop.size()); while (a == i);
      do b = rng.below(pop.size()); while (b == i || b == a);
      do c = rng.below(pop.size()); while (c == i || c == a || c == b);
      const std::size_t forced = rng.below(dims);
      Genome trial = pop[i];
      for (std::size_t d = 0; d < dims; ++d) {
        const bool cross = rng.uniform(0.0, 1.0) < de.crossover;
        if (cross || d == forced) trial[d] = pop[a][d] + de.differential_weight * (pop[b][d] - pop[c][d]);
      }
      clamp_genome(trial, h, w);
      const double f = fitness(trial);
      if (f <= fit[i]) {
        pop[i] = std::move(trial);
        fit[i] = f;
        if (f < fit[best]) best = i;
      }
    }
    result.history.push_back(fit[best]);
  }
  result.best = to_shape(pop[best]);
  result.best_fitness = fit[best];
  return result;
}

std::vector<double> gaussian_kernel(std::size_t size, double sigma) {
  if (size % 2 == 0 || size == 0) throw std::invalid_argument("gaussian kernel size must be odd");
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian sigma must be positive");
  const double c = static_cast<double>(size / 2);
  std::vector<double> k(size * size);
  double total = 0;
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      const double di = static_cast<double>(i) - c, dj = static_cast<double>(j) - c;
      k[i * size + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      total += k[i * size + j];
    }
  }
  for (auto& v : k) v /= total;
  return k;
}

Tensor remove_singletons(const Tensor& mask) {
  if (mask.rank() != 2) throw std::invalid_argument("remove_singletons: expected an h x w mask");
  const std::size_t h = mask.dim(0), w = mask.dim(1);
  const auto m = mask.data();
  std::vector<double> out(m.begin(), m.end());
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      if (m[i * w + j] == 0.0) continue;
      bool neighbor = false;
      for (int di = -1; di <= 1 && !neighbor; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          const long ii = static_cast<long>(i) + di, jj = static_cast<long>(j) + dj;
          if ((di == 0 && dj == 0) || ii < 0 || jj < 0 || ii >= static_cast<long>(h) || jj >= static_cast<long>(w)) {
            continue;
          }
          if (m[static_cast<std::size_t>(ii) * w + static_cast<std::size_t>(jj)] != 0.0) {
            neighbor = true;
            break;
          }
        }
      }
      if (!neighbor) out[i * w + j] = 0.0;
    }
  }
  return Tensor::from(mask.shape(), std::move(out));
}

Tensor aggregate_postprocess(const Tensor& mask, std::size_t size, double sigma) {
  if (mask.rank() != 2) throw std::invalid_argument("aggregate_postprocess: expected an h x w mask");
  const auto kernel = gaussian_kernel(size, sigma);
  const std::size_t h = mask.dim(0), w = mask.dim(1);
  const long r = static_cast<long>(size / 2);
  std::vector<double> bin(h * w), out(h * w);
  for (std::size_t k = 0; k < bin.size(); ++k) bin[k] = mask[k] >= 0.5 ? 1.0 : 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double s = 0;
      for (long di = -r; di <= r; ++di) {
        const long ii = static_cast<long>(i) + di;
        if (ii < 0 || ii >= static_cast<long>(h)) continue;
        for (long dj = -r; dj <= r; ++dj) {
          const long jj = static_cast<long>(j) + dj;
          if (jj < 0 || jj >= static_cast<long>(w)) continue;
          s += kernel[static_cast<std::size_t>((di + r) * static_cast<long>(size) + dj + r)] *
               bin[static_cast<std::size_t>(ii) * w + static_cast<std::size_t>(jj)];
        }
      }
      out[i * w + j] = s >= 0.5 ? 1.0 : 0.0;
    }
  }
  return remove_singletons(Tensor::from(mask.shape(), std::move(out)));
}

AggregateResult gaussian_aggregate(const AttackConfig& config, const ObjectSample& object,
                                   std::span<const Tensor> scenes, const DisparityModel& model) {
  AggregateResult r;
  r.state = initial_state(config, object, MaskSource::per_pixel);
  r.log = run_attack(config, object, scenes, model, r.state);
  r.mask = aggregate_postprocess(r.state.binary_mask());
  return r;
}

}  // namespace svp
