#ifndef SVP_BASELINES_HPP
#define SVP_BASELINES_HPP

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "svp/attack.hpp"

namespace svp {

/// Closed curve through k >= 4 control points given as (row, col).
struct SplineShape {
  std::vector<std::array<double, 2>> points;

  void validate(std::size_t h, std::size_t w) const;
  std::string serialize() const;
  static SplineShape parse(const std::string& text);
};

inline constexpr std::size_t kSplineSamplesPerSegment = 64;

/// Dense closed polyline of the periodic cubic spline through the points,
/// uniform parameter spacing, samples_per_segment points per segment.
std::vector<std::array<double, 2>> spline_polyline(const SplineShape& shape,
                                                   std::size_t samples_per_segment = kSplineSamplesPerSegment);

/// Binary h x w mask of the pixel centers inside the closed polyline under
/// the even-odd rule.
Tensor rasterize_polygon(const std::vector<std::array<double, 2>>& polygon, std::size_t h, std::size_t w);
Tensor rasterize_spline(const SplineShape& shape, std::size_t h, std::size_t w);

struct DeConfig {
  std::size_t population = 30;
  std::size_t control_points = 8;
  double differential_weight = 0.5;  // F
  double crossover = 0.9;            // CR
  std::size_t generations = 10;
  std::size_t max_evaluations = 0;   // 0 means population * (generations + 1)
  std::uint64_t seed = 0;
  std::size_t batch = 2;             // fixed fitness batch

  void validate() const;
};

struct DeResult {
  SplineShape best;
  double best_fitness = 0;
  /// Best fitness after initialization (index 0) and after each generation.
  std::vector<double> history;
  std::size_t evaluations = 0;
};

/// L_depth + lambda_4 L_area of the frozen patch under a candidate mask on
/// the fixed batch of `de.seed`.
double de_fitness(const AttackConfig& config, const DeConfig& de, const ObjectSample& object,
                  const Tensor& frozen_patch, std::span<const Tensor> scenes, const DisparityModel& model,
                  const Tensor& mask);

/// DE/rand/1/bin over flattened control points with greedy selection.
DeResult de_optimize(const AttackConfig& config, const DeConfig& de, const ObjectSample& object,
                     const Tensor& frozen_patch, std::span<const Tensor> scenes, const DisparityModel& model);

inline constexpr std::size_t kAggregateKernel = 11;
inline constexpr double kAggregateSigma = 3.0;

/// Normalized size x size Gaussian, row-major.
std::vector<double> gaussian_kernel(std::size_t size, double sigma);
/// Zeroes every 1 pixel without an 8-connected neighbor.
Tensor remove_singletons(const Tensor& mask);
/// Binarize, blur with zero padding, re-binarize, drop singletons.
Tensor aggregate_postprocess(const Tensor& mask, std::size_t size = kAggregateKernel, double sigma = kAggregateSigma);

struct AggregateResult {
  AttackState state;
  std::vector<LogRow> log;
  Tensor mask;
};

/// Per-pixel mask attack followed by aggregate_postprocess.
AggregateResult gaussian_aggregate(const AttackConfig& config, const ObjectSample& object,
                                   std::span<const Tensor> scenes, const DisparityModel& model);

}  // namespace svp

#endif  // SVP_BASELINES_HPP
