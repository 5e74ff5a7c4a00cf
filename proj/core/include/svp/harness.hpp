#ifndef SVP_HARNESS_HPP
#define SVP_HARNESS_HPP

#include <string>
#include <vector>

#include "svp/attack.hpp"

namespace svp {

struct SweepRow {
  double budget = 0;
  LogRow eval;  // held-out batch after the run
};

/// One full attack per budget from the same seeds.
std::vector<SweepRow> sweep_patch_size(const std::vector<double>& budgets, const AttackConfig& config,
                                       const ObjectSample& object, std::span<const Tensor> scenes,
                                       const DisparityModel& model);
std::string format_sweep(const std::vector<SweepRow>& rows);

/// Metrics CSV: one row per evaluation, identified by a config id.
std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& config_id, const AttackConfig& config, const LogRow& row);

struct RobustRow {
  RobustTransform transform;
  double strength = 0;
  MetricsRecord metrics;
};

/// Held-out batch with both branches passed through the transform before
/// the model; one row per (transform, strength).
std::vector<RobustRow> robustness_grid(const AttackConfig& config, const ObjectSample& object,
                                       std::span<const Tensor> scenes, const DisparityModel& model,
                                       const AttackState& state,
                                       const std::vector<std::pair<RobustTransform, std::vector<double>>>& grid);
std::string format_robust(const std::vector<RobustRow>& rows);

}  // namespace svp

#endif  // SVP_HARNESS_HPP
