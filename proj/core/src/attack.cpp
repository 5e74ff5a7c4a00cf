#include "svp/attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "binary_io.hpp"

namespace svp {

std::string to_string(AttackMode mode) {
  switch (mode) {
    case AttackMode::further: return "further";
    case AttackMode::disappear: return "disappear";
    case AttackMode::closer: return "closer";
    case AttackMode::offset: return "offset";
    case AttackMode::nontargeted: return "nontargeted";
  }
  return "?";
}

AttackMode parse_attack_mode(const std::string& name) {
  for (auto m : {AttackMode::further, AttackMode::disappear, AttackMode::closer, AttackMode::offset,
                 AttackMode::nontargeted}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown attack mode '" + name + "'");
}

void AttackConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("attack: steps must be >= 1");
  if (batch < 1) throw std::invalid_argument("attack: batch must be >= 1");
  if (eval_batch < 1) throw std::invalid_argument("attack: eval batch must be >= 1");
  if (log_interval < 1) throw std::invalid_argument("attack: log interval must be >= 1");
  if (!(budget > 0.0 && budget <= 1.0)) throw std::invalid_argument("attack: budget must be in (0, 1]");
  if (!(lr_patch > 0.0) || !(lr_shape > 0.0) || !std::isfinite(lr_patch) || !std::isfinite(lr_shape)) {
    throw std::invalid_argument("attack: learning rates must be positive");
  }
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw std::invalid_argument("attack: decay factor must be in (0, 1]");
  if (!std::isfinite(offset)) throw std::invalid_argument("attack: offset must be finite");
  if (!(ranges.scale_min > 0.0 && ranges.scale_min <= ranges.scale_max)) {
    throw std::invalid_argument("attack: invalid scale range");
  }
  if (palette.colors.empty()) throw std::invalid_argument("attack: empty palette");
  weights.validate();
}

std::size_t AttackConfig::effective_decay_period() const {
  return decay_period > 0 ? decay_period : std::max<std::size_t>(1, steps / 5);
}

Tensor build_target(AttackMode mode, const Tensor& d_benign, const Tensor& scene_disparity, const Tensor& object_mask,
                    double offset) {
  if (d_benign.shape() != object_mask.shape()) throw std::invalid_argument("build_target: dims differ");
  const auto b = d_benign.data(), m = object_mask.data();
  std::vector<double> t(b.begin(), b.end());
  auto fill = [&](auto value_at) {
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (m[k] != 0.0) t[k] = value_at(k);
    }
  };
  switch (mode) {
    case AttackMode::further: fill([](std::size_t) { return 0.0; }); break;
    case AttackMode::closer: fill([](std::size_t) { return 1.0; }); break;
    case AttackMode::disappear: {
      if (!scene_disparity.defined() || scene_disparity.shape() != d_benign.shape()) {
        throw std::invalid_argument("build_target: disappear needs the scene disparity");
      }
      const auto s = scene_disparity.data();
      fill([&](std::size_t k) { return s[k]; });
      break;
    }
    case AttackMode::offset: fill([&](std::size_t k) { return std::clamp(b[k] + offset, 0.0, 1.0); }); break;
    case AttackMode::nontargeted: break;
    default: throw std::invalid_argument("build_target: unknown mode");
  }
  return Tensor::from(d_benign.shape(), std::move(t));
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st, double lr,
               std::size_t step_index) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter and gradient sizes differ");
  if (st.m.empty() && st.v.empty()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  if (st.m.size() != params.size() || st.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: moment buffers do not match the parameters");
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (!std::isfinite(grads[k])) {
      throw NumericalError("non-finite gradient at step " + std::to_string(step_index) + ", parameter " +
                           std::to_string(k));
    }
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(st.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    st.m[k] = AdamState::kBeta1 * st.m[k] + (1.0 - AdamState::kBeta1) * g;
    st.v[k] = AdamState::kBeta2 * st.v[k] + (1.0 - AdamState::kBeta2) * g * g;
    const double mh = st.m[k] / c1, vh = st.v[k] / c2;
    params[k] -= lr * mh / (std::sqrt(vh) + AdamState::kEpsilon);
  }
}

double lr_schedule(std::size_t step, double base_lr, double decay_factor, std::size_t period) {
  if (period < 1) throw std::invalid_argument("lr_schedule: period must be >= 1");
  return base_lr * std::pow(decay_factor, static_cast<double>(step / period));
}

Tensor AttackState::mask() const {
  switch (source) {
    case MaskSource::parametric: {
      const auto v = pack(params);
      return make_mask(params.family, Tensor::from({v.size()}, v), patch.dim(0), patch.dim(1)).grid;
    }
    case MaskSource::per_pixel: return ste_round(pixel_mask);
    case MaskSource::fixed: return pixel_mask;
  }
  throw std::logic_error("unhandled mask source");
}

Tensor AttackState::binary_mask() const {
  const Tensor m = mask();
  std::vector<double> out(m.numel());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = m[k] >= 0.5 ? 1.0 : 0.0;
  return Tensor::from(m.shape(), std::move(out));
}

namespace {

constexpr std::uint64_t kInitStream = ~std::uint64_t{0};

Tensor random_patch(const AttackConfig& config, const ObjectSample& object) {
  Rng rng(derive_seed(config.seed, kInitStream));
  std::vector<double> p(object.height() * object.width() * 3);
  for (auto& v : p) v = rng.uniform(0.0, 1.0);
  return Tensor::from({object.height(), object.width(), 3}, std::move(p));
}

MaskParams centered_params(const AttackConfig& config, const ObjectSample& object, MaskFamily family) {
  const std::size_t h = object.height(), w = object.width();
  double area = 0, rows = 0, cols = 0;
  const auto m = object.mask.data();
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double v = m[i * w + j];
      area += v;
      rows += v * static_cast<double>(i);
      cols += v * static_cast<double>(j);
    }
  }
  if (area <= 0.0) throw std::invalid_argument("attack: empty object mask");
  return clamp_params(initial_params(family, config.budget * area, rows / area, cols / area, h, w), h, w);
}

}  // namespace

AttackState initial_state(const AttackConfig& config, const ObjectSample& object, MaskSource source) {
  config.validate();
  AttackState st;
  st.patch = random_patch(config, object);
  st.source = source;
  st.params = centered_params(config, object, config.shape);
  if (source == MaskSource::per_pixel) {
    // Start from the parametric shape, kept off the 0.5 threshold so the
    // first updates do not flip pixels.
    const auto v = pack(st.params);
    const Tensor m = make_mask(config.shape, Tensor::from({v.size()}, v), object.height(), object.width()).grid;
    std::vector<double> px(m.numel());
    for (std::size_t k = 0; k < px.size(); ++k) px[k] = m[k] >= 0.5 ? 0.75 : 0.25;
    st.pixel_mask = Tensor::from(m.shape(), std::move(px));
  } else if (source == MaskSource::fixed) {
    throw std::invalid_argument("initial_state: a fixed mask needs initial_state_fixed");
  }
  return st;
}

AttackState initial_state_fixed(const AttackConfig& config, const ObjectSample& object, const Tensor& mask) {
  config.validate();
  if (mask.shape() != object.mask.shape()) throw std::invalid_argument("attack: fixed mask dims differ from the object");
  AttackState st;
  st.patch = random_patch(config, object);
  st.source = MaskSource::fixed;
  st.params = centered_params(config, object, config.shape);
  st.pixel_mask = mask.detach();
  return st;
}

void write_log_header(std::ostream& out) {
  out << "step,lr_patch,L_total,L_depth,L1,L2,L_TV,L_NPS,L_area,area_ratio,MSE_t,MSE_b,alpha,eps_disp,eps_depth\n";
}

void write_log_row(std::ostream& out, const LogRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                r.step, r.lr_patch, r.total, r.depth, r.l1, r.l2, r.tv, r.nps, r.area, r.area_ratio, r.metrics.mse_t,
                r.metrics.mse_b, r.metrics.alpha, r.metrics.eps_disp, r.metrics.eps_depth);
  out << buf;
}

std::string format_log(std::span<const LogRow> rows) {
  std::ostringstream os;
  write_log_header(os);
  for (const auto& r : rows) write_log_row(os, r);
  return os.str();
}

BatchEval evaluate_batch(const AttackConfig& config, const ObjectSample& object, std::span<const Tensor> scenes,
                         const DisparityModel& model, const Tensor& patch, const Tensor& mask, Rng& rng,
                         std::size_t batch, bool keep_scenarios) {
  if (scenes.empty()) throw std::invalid_argument("attack: no scenes");
  auto scenarios = build_batch(object, patch, mask, scenes, rng, batch, config.ranges);
  BatchEval out;
  Tensor depth_sum;
  const double inv_b = 1.0 / static_cast<double>(scenarios.size());
  for (const auto& sc : scenarios) {
    const Tensor d_adv = model.forward(sc.adversarial);
    const Tensor d_b = model.forward(sc.benign).detach();
    if (d_adv.shape() != sc.object_mask.shape()) throw std::invalid_argument("attack: model output dims differ from the scene");
    const Tensor scene_disp =
        config.mode == AttackMode::disappear ? model.forward(sc.scene).detach() : Tensor();
    const Tensor d_t = build_target(config.mode, d_b, scene_disp, sc.object_mask, config.offset);
    Tensor term;
    if (config.mode == AttackMode::nontargeted) {
      const Tensor nt = loss_nontargeted(d_adv, d_b, sc.object_mask);
      out.row.l1 += nt.item() * inv_b;
      term = -nt;
    } else {
      const Tensor l1 = loss_l1(d_adv, d_t, sc.patch_mask);
      const Tensor l2 = loss_l2(d_adv, d_t, sc.object_mask, sc.patch_mask);
      out.row.l1 += l1.item() * inv_b;
      out.row.l2 += l2.item() * inv_b;
      term = l1 + l2;
    }
    depth_sum = depth_sum.defined() ? depth_sum + term : term;

    const Tensor adv_values = d_adv.detach();
    out.row.metrics += metrics(adv_values, d_b, d_t, sc.object_mask, config.conversion, config.alpha_reference) /
                       static_cast<double>(scenarios.size());
    double num_adv = 0, num_b = 0, den = 0;
    const auto a = adv_values.data(), b = d_b.data(), m = sc.object_mask.data();
    for (std::size_t k = 0; k < m.size(); ++k) {
      num_adv += a[k] * m[k];
      num_b += b[k] * m[k];
      den += m[k];
    }
    out.mean_disparity_adv += num_adv / den * inv_b;
    out.mean_disparity_benign += num_b / den * inv_b;
  }
  LossComponents c{depth_sum * inv_b, loss_tv(patch), loss_nps(patch, config.palette), mask_area(mask)};
  out.total = loss_total(c, config.weights);
  out.row.total = out.total.item();
  out.row.depth = c.depth.item();
  out.row.tv = c.tv.item();
  out.row.nps = c.nps.item();
  out.row.area = c.area.item();
  out.row.area_ratio = out.row.area / object.mask_area();
  if (keep_scenarios) out.scenarios = std::move(scenarios);
  return out;
}

BatchEval evaluate(const AttackConfig& config, const ObjectSample& object, std::span<const Tensor> scenes,
                   const DisparityModel& model, const AttackState& state, bool keep_scenarios) {
  Rng rng(config.eval_seed);
  BatchEval be = evaluate_batch(config, object, scenes, model, state.patch, state.mask(), rng, config.eval_batch,
                                keep_scenarios);
  be.row.step = state.step;
  be.row.lr_patch = lr_schedule(state.step, config.lr_patch, config.decay_factor, config.effective_decay_period());
  return be;
}

std::vector<LogRow> run_attack(const AttackConfig& config, const ObjectSample& object, std::span<const Tensor> scenes,
                               const DisparityModel& model, AttackState& state, std::size_t until_step) {
  config.validate();
  if (scenes.empty()) throw std::invalid_argument("attack: no scenes");
  if (state.patch.shape() != object.image.shape()) throw std::invalid_argument("attack: patch dims differ from the object");
  if (state.source == MaskSource::parametric && state.params.family != config.shape) {
    throw std::invalid_argument("attack: state shape family differs from the config");
  }
  const std::size_t until = until_step == 0 ? config.steps : until_step;
  const std::size_t period = config.effective_decay_period();
  const std::size_t h = object.height(), w = object.width();
  std::vector<LogRow> rows;

  for (std::size_t s = state.step; s < until; ++s) {
    Rng rng(derive_seed(config.seed, s));
    const auto pv = state.patch.data();
    Tensor patch = Tensor::from(state.patch.shape(), std::vector<double>(pv.begin(), pv.end()), true);
    Tensor shape_leaf, mask;
    switch (state.source) {
      case MaskSource::parametric: {
        const auto v = pack(state.params);
        shape_leaf = Tensor::from({v.size()}, v, true);
        mask = make_mask(config.shape, shape_leaf, h, w).grid;
        break;
      }
      case MaskSource::per_pixel: {
        const auto mv = state.pixel_mask.data();
        shape_leaf = Tensor::from(state.pixel_mask.shape(), std::vector<double>(mv.begin(), mv.end()), true);
        mask = ste_round(shape_leaf);
        break;
      }
      case MaskSource::fixed: mask = state.pixel_mask; break;
    }

    BatchEval be;
    try {
      be = evaluate_batch(config, object, scenes, model, patch, mask, rng, config.batch);
    } catch (const std::domain_error& e) {
      throw NumericalError("step " + std::to_string(s) + ": " + e.what());
    }
    const double lr = lr_schedule(s, config.lr_patch, config.decay_factor, period);
    be.row.step = s;
    be.row.lr_patch = lr;
    if (!std::isfinite(be.row.total)) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "non-finite loss at step %zu (depth %g, tv %g, nps %g, area %g)", s, be.row.depth,
                    be.row.tv, be.row.nps, be.row.area);
      throw NumericalError(buf);
    }
    if (s % config.log_interval == 0 || s + 1 == config.steps) rows.push_back(be.row);
    if (be.row.total < state.best_loss) {
      state.best_loss = be.row.total;
      state.best_step = s;
      state.best_patch = state.patch;
      state.best_params = state.params;
      state.best_pixel_mask = state.pixel_mask;
    }

    be.total.backward();
    std::vector<double> p(pv.begin(), pv.end());
    adam_step(p, patch.grad(), state.patch_adam, lr, s);
    for (auto& v : p) v = std::clamp(v, 0.0, 1.0);
    state.patch = Tensor::from(state.patch.shape(), std::move(p));

    if (state.source == MaskSource::parametric) {
      auto v = pack(state.params);
      adam_step(v, shape_leaf.grad(), state.shape_adam, config.lr_shape, s);
      state.params = clamp_params(unpack(config.shape, v, state.params), h, w);
    } else if (state.source == MaskSource::per_pixel) {
      const auto mv = state.pixel_mask.data();
      std::vector<double> v(mv.begin(), mv.end());
      adam_step(v, shape_leaf.grad(), state.shape_adam, config.lr_shape, s);
      for (auto& x : v) x = std::clamp(x, 0.0, 1.0);
      state.pixel_mask = Tensor::from(state.pixel_mask.shape(), std::move(v));
    }
    state.step = s + 1;
  }
  return rows;
}

namespace {

void put_tensor(io::Writer& wr, const Tensor& t) { wr.tensor(t.defined() ? t : Tensor::zeros({0})); }

Tensor get_tensor(io::Reader& rd) {
  Tensor t = rd.tensor();
  return t.numel() == 0 ? Tensor() : t;
}

void put_adam(io::Writer& wr, const AdamState& a) {
  wr.doubles(a.m);
  wr.doubles(a.v);
  wr.u64(a.t);
}

AdamState get_adam(io::Reader& rd) {
  AdamState a;
  a.m = rd.doubles();
  a.v = rd.doubles();
  a.t = rd.u64();
  if (a.m.size() != a.v.size()) throw FormatError("SVPS1: moment buffer sizes differ");
  return a;
}

}  // namespace

std::string encode_state(const AttackState& st, std::uint64_t config_hash) {
  io::Writer wr;
  wr.bytes("SVPS1");
  wr.u64(config_hash);
  wr.u64(st.step);
  wr.u32(static_cast<std::uint32_t>(st.source));
  wr.u32(static_cast<std::uint32_t>(st.params.family));
  put_tensor(wr, st.patch);
  wr.doubles(pack(st.params));
  put_tensor(wr, st.pixel_mask);
  put_adam(wr, st.patch_adam);
  put_adam(wr, st.shape_adam);
  wr.f64(st.best_loss);
  wr.u64(st.best_step);
  put_tensor(wr, st.best_patch);
  wr.doubles(pack(st.best_params));
  wr.u32(static_cast<std::uint32_t>(st.best_params.family));
  put_tensor(wr, st.best_pixel_mask);
  return wr.take();
}

std::uint64_t peek_state_hash(const std::string& bytes) {
  io::Reader rd(bytes, "SVPS1");
  rd.expect("SVPS1");
  return rd.u64();
}

AttackState decode_state(const std::string& bytes, std::uint64_t expected_hash) {
  io::Reader rd(bytes, "SVPS1");
  rd.expect("SVPS1");
  const std::uint64_t hash = rd.u64();
  if (hash != expected_hash) throw std::invalid_argument("state was written for a different configuration");
  AttackState st;
  st.step = rd.u64();
  const std::uint32_t source = rd.u32(), family = rd.u32();
  if (source > static_cast<std::uint32_t>(MaskSource::fixed)) throw FormatError("SVPS1: unknown mask source");
  if (family > static_cast<std::uint32_t>(MaskFamily::oval)) throw FormatError("SVPS1: unknown mask family");
  st.source = static_cast<MaskSource>(source);
  const auto fam = static_cast<MaskFamily>(family);
  st.patch = get_tensor(rd);
  auto values = rd.doubles();
  if (values.size() != packed_size(fam)) throw FormatError("SVPS1: wrong parameter count");
  st.params = unpack(fam, values);
  st.pixel_mask = get_tensor(rd);
  st.patch_adam = get_adam(rd);
  st.shape_adam = get_adam(rd);
  st.best_loss = rd.f64();
  st.best_step = rd.u64();
  st.best_patch = get_tensor(rd);
  values = rd.doubles();
  const std::uint32_t best_family = rd.u32();
  if (best_family > static_cast<std::uint32_t>(MaskFamily::oval) ||
      values.size() != packed_size(static_cast<MaskFamily>(best_family))) {
    throw FormatError("SVPS1: malformed best parameters");
  }
  st.best_params = unpack(static_cast<MaskFamily>(best_family), values);
  st.best_pixel_mask = get_tensor(rd);
  rd.finish();
  if (!st.patch.defined() || st.patch.rank() != 3 || st.patch.dim(2) != 3) throw FormatError("SVPS1: malformed patch");
  if (st.source != MaskSource::parametric &&
      (!st.pixel_mask.defined() || st.pixel_mask.shape() != Shape{st.patch.dim(0), st.patch.dim(1)})) {
    throw FormatError("SVPS1: malformed pixel mask");
  }
  return st;
}

void save_state(const std::filesystem::path& path, const AttackState& state, std::uint64_t config_hash) {
  io::write_all(path.string(), encode_state(state, config_hash));
}

AttackState load_state(const std::filesystem::path& path, std::uint64_t expected_hash) {
  return decode_state(io::read_all(path.string()), expected_hash);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace svp
