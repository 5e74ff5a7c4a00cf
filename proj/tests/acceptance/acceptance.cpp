// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck_suite.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "svp/attack.hpp"
#include "svp/baselines.hpp"
#include "svp/synthetic.hpp"

namespace svp {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += "failed: " + what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1

Outcome gradcheck_suite() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<testing::GradCase> cases = testing::op_cases();
  for (auto& c : testing::module_cases()) cases.push_back(c);
  for (auto& c : testing::end_to_end_cases()) cases.push_back(c);
  double worst = 0;
  std::string worst_name;
  for (const auto& c : cases) {
    const auto r = testing::run_case_detail(c);
    out.require(r.score <= 1e-3, c.name + fmt(" rel err %.3g", r.score));
    if (r.score >= worst) {
      worst = r.score;
      worst_name = c.name;
    }
    if (c.normwise) out.note(c.name + fmt(" vector rel err %.3g (worst coordinate %.3g)", r.score, r.max_coord_err));
  }
  const double elapsed = seconds_since(t0);
  out.note(std::to_string(cases.size()) + " cases x 20 points, worst " + worst_name + fmt(" %.3g", worst));
  out.require(elapsed < 60.0, fmt("runtime %.1f s >= 60 s", elapsed));
  out.note(fmt("%.1f s", elapsed));
  return out;
}

// ---------------------------------------------------------------- 2

Outcome reduction_identities() {
  Outcome out;
  constexpr std::size_t H = 64, W = 64;
  double quad_gap = 0;
  std::size_t ellipse_mismatch = 0, oval_mismatch = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(derive_seed(2, seed));
    const std::vector<double> r = {rng.uniform(4, 28), rng.uniform(36, 60), rng.uniform(36, 60), rng.uniform(4, 28)};
    std::vector<double> q = r;
    q.insert(q.end(), {0, 0, 0, 0});
    const Tensor a = make_mask(MaskFamily::rect, Tensor::from({4}, r), H, W).grid;
    const Tensor b = make_mask(MaskFamily::quad, Tensor::from({8}, q), H, W).grid;
    for (std::size_t k = 0; k < H * W; ++k) quad_gap = std::max(quad_gap, std::fabs(a[k] - b[k]));

    const double x = rng.uniform(16, 48), y = rng.uniform(16, 48), R = rng.uniform(4, 15);
    const Tensor c = make_mask(MaskFamily::circle, Tensor::from({3}, {x, y, R}), H, W).grid;
    const Tensor e = make_mask(MaskFamily::ellipse, Tensor::from({5}, {x, y, R, 0, 0}), H, W).grid;
    const Tensor o = make_mask(MaskFamily::oval, Tensor::from({4}, {x, y, R, R}), H, W).grid;
    for (std::size_t k = 0; k < H * W; ++k) {
      ellipse_mismatch += c[k] != e[k];
      oval_mismatch += c[k] != o[k];
    }
  }
  out.require(quad_gap <= 1e-12, fmt("quad(S=0) vs rect max diff %.3g", quad_gap));
  out.require(ellipse_mismatch == 0, std::to_string(ellipse_mismatch) + " ellipse(shear=0) pixels differ from circle");
  out.require(oval_mismatch == 0, std::to_string(oval_mismatch) + " oval(a=b=R) pixels differ from circle");
  out.note(fmt("quad-rect max diff %.3g over 5 seeds, ellipse/oval exact", quad_gap));
  return out;
}

// ---------------------------------------------------------------- 3

Outcome mask_oracles() {
  Outcome out;
  constexpr std::size_t H = 64, W = 64;
  std::size_t mismatches = 0, pixels = 0;
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const double x = rng.uniform(10, 54), y = rng.uniform(10, 54), R = rng.uniform(3, 20);
    const double sx = rng.uniform(-0.6, 0.6), sy = rng.uniform(-0.6, 0.6), b = rng.uniform(3, 20);
    const Tensor c = make_mask(MaskFamily::circle, Tensor::from({3}, {x, y, R}), H, W).grid;
    const Tensor e = make_mask(MaskFamily::ellipse, Tensor::from({5}, {x, y, R, sx, sy}), H, W).grid;
    const Tensor o = make_mask(MaskFamily::oval, Tensor::from({4}, {x, y, R, b}), H, W).grid;
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) {
        const double di = static_cast<double>(i), dj = static_cast<double>(j);
        mismatches += c[i * W + j] != testing::circle_oracle(di, dj, x, y, R);
        mismatches += e[i * W + j] != testing::ellipse_oracle(di, dj, x, y, R, sx, sy);
        mismatches += o[i * W + j] != testing::oval_oracle(di, dj, x, y, R, b);
        pixels += 3;
      }

    SplineShape s;
    const std::size_t k = 4 + static_cast<std::size_t>(trial % 6);
    for (std::size_t p = 0; p < k; ++p) {
      const double angle = 2 * M_PI * (static_cast<double>(p) + rng.uniform(-0.4, 0.4)) / static_cast<double>(k);
      const double r = rng.uniform(8, 28);
      s.points.push_back({32 + r * std::sin(angle), 32 + r * std::cos(angle)});
    }
    const Tensor m = rasterize_spline(s, H, W);
    const auto poly = spline_polyline(s);
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) {
        mismatches += (m[i * W + j] == 1.0) != testing::inside_even_odd(poly, static_cast<double>(i), static_cast<double>(j));
        ++pixels;
      }
  }
  out.require(mismatches == 0, std::to_string(mismatches) + " mismatched pixels");
  out.note(std::to_string(pixels) + " pixels checked over circle, ellipse, oval and spline, " +
           std::to_string(mismatches) + " mismatches");
  return out;
}

// ---------------------------------------------------------------- 4

Outcome gradient_dominance() {
  Outcome out;
  std::size_t violations = 0, checked = 0;
  double min_margin = 1e300;
  for (int n = 0; n < 1000; ++n) {
    const double mag = 1e-2 * std::pow(500.0, static_cast<double>(n) / 999.0);
    for (double x : {mag, -mag}) {
      Tensor a = Tensor::from({1}, {x}, true), b = Tensor::from({1}, {x}, true);
      sum(exp(abs(a))).backward();
      sum(square(b)).backward();
      const double ga = std::fabs(a.grad()[0]), gb = std::fabs(b.grad()[0]);
      if (!(std::exp(std::fabs(x)) > 2 * std::fabs(x)) || !(ga > gb)) ++violations;
      min_margin = std::min(min_margin, ga - gb);
      ++checked;
    }
  }
  out.require(violations == 0, std::to_string(violations) + " grid points violate exp(|x|) > 2|x|");
  out.note(std::to_string(checked) + " points on |x| in [1e-2, 5], smallest tape-gradient margin " +
           fmt("%.4g", min_margin));
  return out;
}

// ---------------------------------------------------------------- 5

Outcome loss_examples() {
  Outcome out;
  std::size_t n = 0;
  auto near = [&](double got, double want, const std::string& what, double tol = 1e-9) {
    ++n;
    out.require(std::fabs(got - want) <= tol, what + fmt(" got %.12g want %.12g", got, want));
  };
  const Tensor zero22 = Tensor::full({2, 2}, 0.0), one22 = Tensor::full({2, 2}, 1.0);
  const Tensor t = Tensor::from({2, 2}, {0.3, 0.6, 0.2, 0.9});
  const Tensor diff = Tensor::from({2, 2}, {1, 0, 0, 2});
  const Tensor adv = t + diff;
  const Tensor diag = Tensor::from({2, 2}, {1, 0, 0, 1});

  near(loss_l1(t, t, one22).item(), 0.0, "l1 equal maps");
  near(loss_l1(adv, t, diag).item(), 5.0, "l1 diff example");
  near(loss_l1(adv, t, zero22).item(), 0.0, "l1 empty patch mask");
  near(loss_l2(t, t, one22, zero22).item(), 4.0, "l2 equal maps");
  near(loss_l2(adv, t, diag, zero22).item(), std::exp(1.0) + 1 + 1 + std::exp(2.0), "l2 diff example");
  {
    Tensor x = Tensor::from({2, 2}, {0.5, 0.7, 0.1, 0.4}, true);
    loss_l2(x, t, Tensor::from({2, 2}, {1, 1, 0, 1}), zero22).backward();
    near(x.grad()[2], 0.0, "l2 gradient at a mask-0 pixel");
  }
  near(loss_depth(t, t, one22, zero22).item(), 4.0, "depth both-zero diff");
  near(loss_depth(adv, t, diag, diag).item() - loss_l1(adv, t, diag).item(), 4.0, "depth minus l1 when M_O = M_p");

  const Tensor flat = Tensor::full({6, 5, 3}, 0.4);
  ++n;
  out.require(loss_tv(flat).item() <= 6 * 5 * 3 * std::sqrt(kTvEpsilon), "tv of a constant patch");
  near(loss_tv(Tensor::from({2, 2, 1}, {0, 1, 0, 1})).item(), 1.0, "tv 2x2 example");
  {
    Rng rng(5);
    const Tensor p = random_tensor({6, 6, 3}, rng, 0, 0.5);
    const double ratio = loss_tv(p * 2.0).item() / loss_tv(p).item();
    // Homogeneity holds in the eps -> 0 limit; eps/d^2 bounds the gap.
    near(ratio, 2.0, "tv homogeneity", 1e-6);
  }

  const Palette bw{{{0, 0, 0}, {1, 1, 1}}};
  near(loss_nps(Tensor::from({1, 2, 3}, {0, 0, 0, 1, 1, 1}), bw).item(), 0.0, "nps palette pixels");
  near(loss_nps(Tensor::from({1, 1, 3}, {0.2, 0.2, 0.2}), bw).item(), 0.2 * std::sqrt(3.0), "nps gray pixel");
  {
    Rng rng(6);
    const Palette base = Palette::default_palette();
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor p = random_tensor({4, 4, 3}, rng, 0, 1);
      Palette more = base;
      more.colors.push_back({rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
      ++n;
      out.require(loss_nps(p, more).item() <= loss_nps(p, base).item(), "nps superset palette");
    }
  }

  const LossComponents c{Tensor::scalar(4), Tensor::scalar(2), Tensor::scalar(10), Tensor::scalar(100)};
  near(loss_total(c, {0, 0, 0, 0}).item(), 0.0, "total all-zero weights");
  near(loss_total(c, {1, 0, 0, 0}).item(), 4.0, "total depth only");
  near(loss_total(c, {1, 0.5, 0.1, 0.01}).item(), 7.0, "total weighted example");

  {
    Rng rng(7);
    const Tensor b = random_tensor({4, 5}, rng, 0, 1);
    std::vector<double> m(20, 0.0);
    for (int k = 0; k < 10; ++k) m[2 * k] = 1.0;
    const Tensor mo = Tensor::from({4, 5}, m);
    near(loss_nontargeted(b, b, mo).item(), 0.0, "nontargeted equal maps");
    near(loss_nontargeted(b + 1.0, b, mo).item(), 10.0, "nontargeted diff 1 on 10 pixels");
    std::vector<double> shifted(b.data().begin(), b.data().end());
    for (int k = 0; k < 10; ++k) shifted[2 * k + 1] += 0.7;
    near(loss_nontargeted(Tensor::from({4, 5}, shifted), b, mo).item(), 0.0, "nontargeted ignores outside pixels");
  }
  out.note(std::to_string(n) + " examples");
  return out;
}

// ---------------------------------------------------------------- 6

Outcome metric_examples() {
  Outcome out;
  Rng rng(8);
  const Tensor db = random_tensor({6, 7}, rng, 0.2, 0.8), dt = random_tensor({6, 7}, rng, 0, 1);
  const Tensor mo = Tensor::from({6, 7}, std::vector<double>(42, 1.0));
  const MetricsRecord a = metrics(dt, db, dt, mo);
  out.require(std::fabs(a.mse_t) <= 1e-12, fmt("MSE_t %.3g for D_adv = D_t", a.mse_t));
  const MetricsRecord b = metrics(db * 2.0, db, dt, mo);
  out.require(std::fabs(b.eps_disp - 1.0) <= 1e-12, fmt("eps_disp %.15g for doubled disparity", b.eps_disp));
  const MetricsRecord c = metrics(db + 0.005, db, dt, mo);
  out.require(c.alpha == 0.0, fmt("alpha %.3g below threshold", c.alpha));
  const MetricsRecord d = metrics(db, db, db, mo);
  out.require(d.mse_t == 0 && d.mse_b == 0 && d.alpha == 0 && d.eps_disp == 0 && d.eps_depth == 0,
              "all-equal maps give zero metrics");
  out.note(fmt("MSE_t %.3g, eps_disp %.15g", a.mse_t, b.eps_disp) + fmt(", alpha %.3g", c.alpha));
  return out;
}

// ---------------------------------------------------------------- 7, 8, 9

// Calibration run values, committed. Relative tolerance allows for libm
// differences across platforms.
constexpr double kGoldenDispStep0 = 0.4755567819;
constexpr double kGoldenDispFinal = 0.4604027855;
constexpr double kGoldenAlphaStep0 = 0.4552707529;
constexpr double kGoldenAlphaFinal = 0.6233253159;
constexpr double kGoldenTolerance = 1e-6;

struct ReferenceDesk {
  ObjectSample object = synthetic_car(64, 96, 7);
  std::vector<Tensor> scenes = synthetic_scenes(4, 96, 192, 11);
  SurrogateModel model{SurrogateWeights::random(2024)};
  AttackConfig config;

  ReferenceDesk() {
    config.mode = AttackMode::further;
    config.shape = MaskFamily::rect;
    config.budget = 0.11;
    config.batch = 2;
    config.steps = 300;
    config.seed = 1;
    config.eval_seed = 99;
    config.eval_batch = 4;
  }
};

const ReferenceDesk& reference_desk() {
  static const ReferenceDesk desk;
  return desk;
}

struct ReferenceRun {
  std::string log;
  AttackState final_state;
  std::vector<LogRow> rows;
  double seconds = 0;
};

ReferenceRun plain_reference_run() {
  const ReferenceDesk& d = reference_desk();
  const auto t0 = std::chrono::steady_clock::now();
  ReferenceRun r;
  r.final_state = initial_state(d.config, d.object);
  r.rows = run_attack(d.config, d.object, d.scenes, d.model, r.final_state);
  r.log = format_log(r.rows);
  r.seconds = seconds_since(t0);
  return r;
}

ReferenceRun& first_run() {
  static ReferenceRun run = plain_reference_run();
  return run;
}

Outcome reference_attack() {
  Outcome out;
  const ReferenceDesk& d = reference_desk();
  const ReferenceRun& run = first_run();
  const BatchEval e0 = evaluate(d.config, d.object, d.scenes, d.model, initial_state(d.config, d.object));
  const BatchEval e1 = evaluate(d.config, d.object, d.scenes, d.model, run.final_state);

  const double train0 = run.rows.front().total, train1 = run.rows.back().total;
  out.require(train1 <= 0.5 * train0, fmt("training total %.6g -> %.6g", train0, train1) +
                                          fmt(" (ratio %.4f > 0.5)", train1 / train0));
  // L2 carries a constant floor of one exp(0) per scene pixel; the
  // floor-subtracted held-out total shows how much of the loss can move.
  const double floor = d.config.weights.depth * static_cast<double>(d.scenes.front().dim(0) * d.scenes.front().dim(1));
  out.note(fmt("held-out total %.6g -> %.6g", e0.row.total, e1.row.total) +
           fmt(", floor-subtracted %.6g -> %.6g", e0.row.total - floor, e1.row.total - floor) +
           fmt(" (ratio %.4f)", (e1.row.total - floor) / (e0.row.total - floor)));

  out.require(e1.mean_disparity_adv < e0.mean_disparity_adv,
              fmt("masked mean disparity %.6g -> %.6g", e0.mean_disparity_adv, e1.mean_disparity_adv));
  out.require(e1.row.metrics.alpha > e0.row.metrics.alpha,
              fmt("alpha %.6g -> %.6g", e0.row.metrics.alpha, e1.row.metrics.alpha));
  out.note(fmt("masked mean disparity %.6g -> %.6g", e0.mean_disparity_adv, e1.mean_disparity_adv));
  out.note(fmt("alpha %.6g -> %.6g", e0.row.metrics.alpha, e1.row.metrics.alpha));

  auto golden = [&](double got, double want, const char* what) {
    out.require(std::fabs(got - want) <= kGoldenTolerance * std::max(1.0, std::fabs(want)),
                std::string(what) + fmt(" %.10g vs golden %.10g", got, want));
  };
  golden(e0.mean_disparity_adv, kGoldenDispStep0, "step-0 disparity");
  golden(e1.mean_disparity_adv, kGoldenDispFinal, "final disparity");
  golden(e0.row.metrics.alpha, kGoldenAlphaStep0, "step-0 alpha");
  golden(e1.row.metrics.alpha, kGoldenAlphaFinal, "final alpha");

  out.require(run.seconds < 300.0, fmt("runtime %.1f s >= 300 s", run.seconds));
  out.note(fmt("%.1f s", run.seconds));
  return out;
}

Outcome locality() {
  Outcome out;
  const ReferenceDesk& d = reference_desk();
  AttackState st = initial_state(d.config, d.object);
  std::size_t scenarios = 0, checked = 0, violations = 0, bound_violations = 0;
  double worst = 0;
  std::vector<LogRow> rows;
  for (std::size_t s = 0; s < d.config.steps; ++s) {
    // The batch run_attack draws for step s, rebuilt from the same stream.
    Rng rng(derive_seed(d.config.seed, s));
    const auto batch = build_batch(d.object, st.patch, st.mask(), d.scenes, rng, d.config.batch, d.config.ranges);
    for (const auto& sc : batch) {
      ++scenarios;
      const std::size_t n = sc.patch_mask.numel();
      for (std::size_t p = 0; p < n; ++p) {
        const bool outside = sc.patch_mask[p] < 1e-6;
        for (std::size_t c = 0; c < 3; ++c) {
          const double gap = std::fabs(sc.adversarial[p * 3 + c] - sc.benign[p * 3 + c]);
          bound_violations += gap > sc.patch_mask[p] + 1e-12;
          if (!outside) continue;
          worst = std::max(worst, gap);
          violations += gap >= 1e-6;
          ++checked;
        }
      }
    }
    const auto step_rows = run_attack(d.config, d.object, d.scenes, d.model, st, s + 1);
    rows.insert(rows.end(), step_rows.begin(), step_rows.end());
  }
  out.require(violations == 0, std::to_string(violations) + " channel values differ by >= 1e-6 outside the patch");
  out.require(bound_violations == 0, std::to_string(bound_violations) + " channel values exceed |X_adv - X_b| <= M_p");
  out.require(format_log(rows) == first_run().log, "step-by-step rerun log differs from the reference log");
  out.note(std::to_string(scenarios) + " scenarios, " + std::to_string(checked) + " values outside M_p" +
           fmt(", max |X_adv - X_b| %.3g", worst));
  return out;
}

Outcome determinism() {
  Outcome out;
  const ReferenceRun again = plain_reference_run();
  const std::string& ref = first_run().log;
  out.require(again.log == ref, "training-log CSV differs between runs");
  out.require(encode_state(again.final_state, 0) == encode_state(first_run().final_state, 0), "final states differ");
  out.note(std::to_string(ref.size()) + " log bytes identical" + fmt(", %.1f s", again.seconds));
  return out;
}

// ---------------------------------------------------------------- 10, 11

Outcome de_baseline() {
  Outcome out;
  const ReferenceDesk& d = reference_desk();
  const auto t0 = std::chrono::steady_clock::now();
  const ObjectSample object = synthetic_car(64, 64, 3);
  AttackConfig stage1 = d.config;
  stage1.steps = 30;
  AttackState st = initial_state_fixed(stage1, object, object.mask);
  run_attack(stage1, object, d.scenes, d.model, st);
  DeConfig de;
  de.population = 30;
  de.generations = 10;
  de.seed = 4;
  const DeResult r = de_optimize(d.config, de, object, st.patch, d.scenes, d.model);
  const double elapsed = seconds_since(t0);
  out.require(r.history.size() == 11, "history has " + std::to_string(r.history.size()) + " entries, want 11");
  for (std::size_t g = 1; g < r.history.size(); ++g) {
    out.require(r.history[g] <= r.history[g - 1], "generation " + std::to_string(g) + " best fitness increased");
  }
  out.require(elapsed < 600.0, fmt("runtime %.1f s >= 600 s", elapsed));
  out.note(fmt("best fitness %.6g -> %.6g", r.history.front(), r.history.back()) + " over " +
           std::to_string(r.evaluations) + " evaluations" + fmt(", %.1f s", elapsed));
  return out;
}

Outcome gaussian_baseline() {
  Outcome out;
  const ReferenceDesk& d = reference_desk();
  AttackConfig c = d.config;
  c.steps = 30;
  const AggregateResult r = gaussian_aggregate(c, d.object, d.scenes, d.model);
  out.require(testing::is_binary(r.mask), "aggregated mask is not binary");
  out.require(!testing::has_singleton(r.mask), "aggregated mask has an isolated pixel");
  double area = 0;
  for (double v : r.mask.data()) area += v;
  std::size_t random_ok = 0;
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor m = random_tensor({40, 40}, rng, 0, 1);
    const Tensor post = aggregate_postprocess(m);
    random_ok += testing::is_binary(post) && !testing::has_singleton(post);
  }
  out.require(random_ok == 20, std::to_string(20 - random_ok) + " random masks kept an isolated pixel");
  out.note(fmt("attack mask area %.0f px, binary, no isolated pixels; 20 random masks clean", area));
  return out;
}

// ---------------------------------------------------------------- 12

Outcome robustness_transforms() {
  Outcome out;
  const double v = bit_depth_reduce(Tensor::full({1, 1, 3}, 0.5), 3)[0];
  out.require(std::fabs(v - 4.0 / 7.0) <= 1e-15, fmt("bit depth 3 of 0.5 gives %.17g", v));

  std::vector<double> field(9 * 9 * 3, 0.3);
  for (int c = 0; c < 3; ++c) field[(4 * 9 + 4) * 3 + c] = 1.0;
  const Tensor med = median_blur(Tensor::from({9, 9, 3}, field), 3);
  double impulse_left = 0;
  for (double x : med.data()) impulse_left = std::max(impulse_left, std::fabs(x - 0.3));
  out.require(impulse_left == 0.0, fmt("median k=3 leaves %.3g of the impulse", impulse_left));

  Rng rng(12);
  std::vector<Tensor> images = {synthetic_scene(48, 64, 3), synthetic_car(64, 96, 7).image};
  {
    std::vector<double> noise(40 * 40 * 3);
    for (auto& x : noise) x = static_cast<double>(rng.below(256)) / 255.0;
    images.push_back(Tensor::from({40, 40, 3}, noise));
  }
  double q100 = 0;
  for (const auto& img : images) {
    const Tensor j = jpeg_approx(img, 100);
    for (std::size_t k = 0; k < img.numel(); ++k) q100 = std::max(q100, std::fabs(j[k] - img[k]));
  }
  out.require(q100 <= 2.0 / 255.0, fmt("quality 100 max error %.4f", q100 * 255.0) + "/255");

  std::size_t outside = 0, outputs = 0;
  const std::vector<std::pair<RobustTransform, std::vector<double>>> grid = {
      {RobustTransform::jpeg, {100, 90, 50, 10, 1}},
      {RobustTransform::bit_depth, {8, 4, 3, 1}},
      {RobustTransform::gaussian_noise, {0, 0.05, 0.3}},
      {RobustTransform::median_blur, {3, 5, 7}},
  };
  for (const auto& img : images)
    for (const auto& [t, strengths] : grid)
      for (double s : strengths) {
        const Tensor y = apply_robust_transform(img, t, s, rng);
        for (double x : y.data()) outside += !(x >= 0.0 && x <= 1.0);
        ++outputs;
      }
  out.require(outside == 0, std::to_string(outside) + " output values outside [0, 1]");
  out.note(fmt("bit depth %.6f, ", v) + fmt("q100 max error %.3f/255, ", q100 * 255.0) + std::to_string(outputs) +
           " transformed images in [0, 1]");
  return out;
}

// ---------------------------------------------------------------- 13

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome codecs_and_resume() {
  Outcome out;
  char tmpl[] = "/tmp/svp_accept_XXXXXX";
  const fs::path dir(mkdtemp(tmpl));
  Rng rng(13);

  Rgb8Image img;
  img.width = 37;
  img.height = 23;
  img.samples.resize(37 * 23 * 3);
  for (auto& s : img.samples) s = static_cast<std::uint8_t>(rng.below(256));
  write_ppm(dir / "a.ppm", img);
  out.require(read_ppm(dir / "a.ppm") == img, "PPM file round trip");
  out.require(decode_ppm(encode_ppm(img)) == img, "PPM byte round trip");
  out.require(encode_ppm(decode_ppm(read_bytes(dir / "a.ppm"))) == read_bytes(dir / "a.ppm"), "PPM re-encode");

  const Tensor depth = random_tensor({19, 31}, rng, 0.1, 100.0);
  write_pgm16(dir / "d.pgm", depth, 100.0);
  const Gray16Image g = read_pgm16(dir / "d.pgm");
  out.require(g.width == 31 && g.height == 19 && g.samples == quantize_pgm16(depth, 100.0), "PGM16 round trip");

  const SurrogateWeights w = SurrogateWeights::random(21);
  const std::string wbytes = encode_weights(w);
  save_weights(dir / "w.svpw", w);
  const SurrogateWeights w2 = load_weights(dir / "w.svpw");
  out.require(encode_weights(w2) == wbytes && read_bytes(dir / "w.svpw") == wbytes, "SVPW1 round trip");
  const Tensor probe = random_tensor({16, 24, 3}, rng, 0, 1);
  const Tensor f1 = SurrogateModel(w).forward(probe), f2 = SurrogateModel(w2).forward(probe);
  out.require(std::equal(f1.data().begin(), f1.data().end(), f2.data().begin()), "SVPW1 reload changes the forward pass");

  const ObjectSample object = synthetic_car(32, 48, 7);
  const auto scenes = synthetic_scenes(3, 48, 96, 11);
  const SurrogateModel model(SurrogateWeights::random(2024));
  AttackConfig c;
  c.steps = 8;
  c.batch = 1;
  c.eval_batch = 2;
  c.seed = 3;
  c.shape = MaskFamily::quad;
  const std::uint64_t hash = 0x5eed;

  AttackState full = initial_state(c, object);
  const std::string full_log = format_log(run_attack(c, object, scenes, model, full));
  AttackState part = initial_state(c, object);
  auto rows = run_attack(c, object, scenes, model, part, 3);
  save_state(dir / "s.svps", part, hash);
  const std::string sbytes = read_bytes(dir / "s.svps");
  AttackState resumed = load_state(dir / "s.svps", hash);
  out.require(encode_state(resumed, hash) == sbytes, "SVPS1 round trip");
  const auto rest = run_attack(c, object, scenes, model, resumed);
  rows.insert(rows.end(), rest.begin(), rest.end());
  out.require(format_log(rows) == full_log, "resumed training log differs");
  out.require(encode_state(resumed, hash) == encode_state(full, hash), "resumed final state differs");

  fs::remove_all(dir);
  out.note("PPM, PGM16, SVPW1, SVPS1 bit-exact; 3 + 5 step resume equals 8 straight steps");
  return out;
}

}  // namespace
}  // namespace svp

int main() {
  using namespace svp;
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, gradcheck_suite},     {2, reduction_identities}, {3, mask_oracles},      {4, gradient_dominance},
      {5, loss_examples},       {6, metric_examples},      {7, reference_attack},  {8, locality},
      {9, determinism},         {10, de_baseline},         {11, gaussian_baseline}, {12, robustness_transforms},
      {13, codecs_and_resume},
  };
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("%s criterion %2d: %s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
