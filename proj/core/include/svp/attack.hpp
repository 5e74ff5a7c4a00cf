#ifndef SVP_ATTACK_HPP
#define SVP_ATTACK_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "svp/compositor.hpp"
#include "svp/depthmodel.hpp"
#include "svp/evalrobust.hpp"
#include "svp/losses.hpp"
#include "svp/maskgen.hpp"

namespace svp {

/// Raised when the loss or a gradient stops being finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AttackMode { further, disappear, closer, offset, nontargeted };

std::string to_string(AttackMode mode);
AttackMode parse_attack_mode(const std::string& name);

struct AttackConfig {
  AttackMode mode = AttackMode::further;
  double offset = 0.0;  // delta for AttackMode::offset
  MaskFamily shape = MaskFamily::rect;
  std::size_t steps = 10000;
  std::size_t batch = 4;
  LossWeights weights;
  double budget = 0.11;  // initial patch area / object-mask area
  double lr_patch = 1.0;
  double lr_shape = 0.01;
  double decay_factor = 0.2;
  std::size_t decay_period = 0;  // 0 selects steps / 5
  std::uint64_t seed = 0;        // patch init and per-step batches
  std::uint64_t eval_seed = 1;   // held-out evaluation batch
  std::size_t eval_batch = 4;
  std::size_t log_interval = 1;
  TransformRanges ranges;
  Palette palette = Palette::default_palette();
  DepthConversion conversion;
  AlphaReference alpha_reference = AlphaReference::benign;

  void validate() const;
  std::size_t effective_decay_period() const;
};

/// D_t per mode: further 0 and closer 1 on the object, disappear the
/// scene-only disparity, offset clamp(D_b + delta, 0, 1); D_b elsewhere.
/// nontargeted returns D_b.
Tensor build_target(AttackMode mode, const Tensor& d_benign, const Tensor& scene_disparity, const Tensor& object_mask,
                    double offset = 0.0);

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

/// One Adam update in place. Buffers are sized on first use.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               std::size_t step_index = 0);

/// base_lr * decay_factor ^ floor(step / period)
double lr_schedule(std::size_t step, double base_lr, double decay_factor, std::size_t period);

/// What the shape optimizer group holds.
enum class MaskSource {
  parametric,  // MaskParams of config.shape
  per_pixel,   // one value per object-grid pixel, binarized straight-through
  fixed,       // constant mask, only the patch is optimized
};

struct AttackState {
  Tensor patch;  // h x w x 3 in [0,1]
  MaskSource source = MaskSource::parametric;
  MaskParams params;
  Tensor pixel_mask;  // h x w, per_pixel and fixed sources
  AdamState patch_adam;
  AdamState shape_adam;
  std::size_t step = 0;

  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;
  Tensor best_patch;
  MaskParams best_params;
  Tensor best_pixel_mask;

  /// Patch mask on the object grid as used in the forward pass.
  Tensor mask() const;
  /// Binarized mask at threshold 0.5.
  Tensor binary_mask() const;
};

/// Seeded uniform patch and a centered shape covering budget x object area.
AttackState initial_state(const AttackConfig& config, const ObjectSample& object,
                          MaskSource source = MaskSource::parametric);
/// Patch-only state with a constant mask.
AttackState initial_state_fixed(const AttackConfig& config, const ObjectSample& object, const Tensor& mask);

struct LogRow {
  std::size_t step = 0;
  double lr_patch = 0;
  double total = 0;
  double depth = 0;
  double l1 = 0;  // nontargeted mode: the maximized objective
  double l2 = 0;
  double tv = 0;
  double nps = 0;
  double area = 0;
  double area_ratio = 0;
  MetricsRecord metrics;
};

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const LogRow& row);
std::string format_log(std::span<const LogRow> rows);

/// Loss and metrics of one batch. `total` stays on the tape when the patch
/// or mask require gradients.
struct BatchEval {
  Tensor total;
  LogRow row;
  double mean_disparity_adv = 0;  // mean of D_adv over M_O, batch average
  double mean_disparity_benign = 0;
  std::vector<Scenario> scenarios;
};

BatchEval evaluate_batch(const AttackConfig& config, const ObjectSample& object, std::span<const Tensor> scenes,
                         const DisparityModel& model, const Tensor& patch, const Tensor& mask, Rng& rng,
                         std::size_t batch, bool keep_scenarios = false);

/// Held-out batch drawn from config.eval_seed.
BatchEval evaluate(const AttackConfig& config, const ObjectSample& object, std::span<const Tensor> scenes,
                   const DisparityModel& model, const AttackState& state, bool keep_scenarios = false);

/// Advances `state` until it reaches `until_step` (0 means config.steps) and
/// returns the log rows of the steps taken.
std::vector<LogRow> run_attack(const AttackConfig& config, const ObjectSample& object,
                               std::span<const Tensor> scenes, const DisparityModel& model, AttackState& state,
                               std::size_t until_step = 0);

/// SVPS1: magic, u64 config hash, u64 step, u32 source, u32 family, patch,
/// shape parameters, pixel mask, both Adam groups, best snapshot.
std::string encode_state(const AttackState& state, std::uint64_t config_hash);
AttackState decode_state(const std::string& bytes, std::uint64_t expected_hash);
void save_state(const std::filesystem::path& path, const AttackState& state, std::uint64_t config_hash);
AttackState load_state(const std::filesystem::path& path, std::uint64_t expected_hash);
/// Hash stored in an SVPS1 file without decoding the rest.
std::uint64_t peek_state_hash(const std::string& bytes);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace svp

#endif  // SVP_ATTACK_HPP
