#include "svp/harness.hpp"

#include <cstdio>
#include <sstream>

namespace svp {

std::vector<SweepRow> sweep_patch_size(const std::vector<double>& budgets, const AttackConfig& config,
                                       const ObjectSample& object, std::span<const Tensor> scenes,
                                       const DisparityModel& model) {
  for (double b : budgets) {
    if (!(b > 0.0 && b <= 1.0)) throw std::invalid_argument("sweep: budgets must be in (0, 1]");
  }
  std::vector<SweepRow> rows;
  for (double b : budgets) {
    AttackConfig c = config;
    c.budget = b;
    AttackState st = initial_state(c, object);
    run_attack(c, object, scenes, model, st);
    rows.push_back({b, evaluate(c, object, scenes, model, st).row});
  }
  return rows;
}

std::string metrics_csv_header() {
  return "config,mode,shape,budget,alpha_reference,step,L_total,area_ratio,MSE_t,MSE_b,alpha,eps_disp,eps_depth\n";
}

std::string metrics_csv_row(const std::string& config_id, const AttackConfig& c, const LogRow& r) {
  char buf[640];
  std::snprintf(buf, sizeof buf, "%s,%s,%s,%.10g,%s,%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", config_id.c_str(),
                to_string(c.mode).c_str(), to_string(c.shape).c_str(), c.budget, to_string(c.alpha_reference).c_str(),
                r.step, r.total, r.area_ratio, r.metrics.mse_t, r.metrics.mse_b, r.metrics.alpha, r.metrics.eps_disp,
                r.metrics.eps_depth);
  return buf;
}

std::string format_sweep(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "budget,L_total,area_ratio,MSE_t,MSE_b,alpha,eps_disp,eps_depth\n";
  char buf[512];
  for (const auto& r : rows) {
    const auto& m = r.eval.metrics;
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", r.budget, r.eval.total,
                  r.eval.area_ratio, m.mse_t, m.mse_b, m.alpha, m.eps_disp, m.eps_depth);
    os << buf;
  }
  return os.str();
}

std::vector<RobustRow> robustness_grid(const AttackConfig& config, const ObjectSample& object,
                                       std::span<const Tensor> scenes, const DisparityModel& model,
                                       const AttackState& state,
                                       const std::vector<std::pair<RobustTransform, std::vector<double>>>& grid) {
  Rng rng(config.eval_seed);
  const auto scenarios = build_batch(object, state.patch, state.mask(), scenes, rng, config.eval_batch, config.ranges);
  std::vector<RobustRow> rows;
  for (const auto& [transform, strengths] : grid) {
    for (double strength : strengths) {
      MetricsRecord sum;
      for (std::size_t k = 0; k < scenarios.size(); ++k) {
        const auto& sc = scenarios[k];
        Rng noise(derive_seed(config.eval_seed, k + 1));
        const Tensor d_adv = model.forward(apply_robust_transform(sc.adversarial, transform, strength, noise));
        const Tensor d_b = model.forward(apply_robust_transform(sc.benign, transform, strength, noise));
        const Tensor scene_disp = config.mode == AttackMode::disappear
                                      ? model.forward(apply_robust_transform(sc.scene, transform, strength, noise))
                                      : Tensor();
        const Tensor d_t = build_target(config.mode, d_b, scene_disp, sc.object_mask, config.offset);
        sum += metrics(d_adv, d_b, d_t, sc.object_mask, config.conversion, config.alpha_reference);
      }
      rows.push_back({transform, strength, sum / static_cast<double>(scenarios.size())});
    }
  }
  return rows;
}

std::string format_robust(const std::vector<RobustRow>& rows) {
  std::ostringstream os;
  os << "transform,strength,MSE_t,MSE_b,alpha,eps_disp,eps_depth\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", to_string(r.transform).c_str(),
                  r.strength, r.metrics.mse_t, r.metrics.mse_b, r.metrics.alpha, r.metrics.eps_disp,
                  r.metrics.eps_depth);
    os << buf;
  }
  return os.str();
}

}  // namespace svp
