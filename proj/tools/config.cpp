#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"

namespace svp::cli {

using nlohmann::json;

namespace {

// Reads one JSON object and rejects keys that were never asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("section '" + name_ + "' must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& raw(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }

  double number(const char* key, double def) {
    used_.insert(key);
    if (!j_.contains(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number()) fail(key, "a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(key, "a finite number");
    return d;
  }

  std::uint64_t count(const char* key, std::uint64_t def) {
    used_.insert(key);
    if (!j_.contains(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned()) fail(key, "a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  std::string text(const char* key, const std::string& def, bool required = false) {
    used_.insert(key);
    if (!j_.contains(key)) {
      if (required) throw ConfigError("section '" + name_ + "' is missing '" + key + "'");
      return def;
    }
    const json& v = j_.at(key);
    if (!v.is_string()) fail(key, "a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const char* key, std::vector<double> def) {
    used_.insert(key);
    if (!j_.contains(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_array()) fail(key, "an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ConfigError("unknown key '" + key + "' in section '" + name_ + "'");
    }
  }

 private:
  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError("'" + name_ + "." + key + "' must be " + what);
  }
  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

const std::vector<std::pair<RobustTransform, std::vector<double>>>& default_robustness() {
  static const std::vector<std::pair<RobustTransform, std::vector<double>>> grid = {
      {RobustTransform::jpeg, {90, 70, 50, 30, 10}},
      {RobustTransform::bit_depth, {8, 6, 4, 3, 2}},
      {RobustTransform::gaussian_noise, {0.01, 0.03, 0.05, 0.1}},
      {RobustTransform::median_blur, {3, 5, 7}},
  };
  return grid;
}

void check_strength(RobustTransform t, double s) {
  const bool integral = s == std::floor(s);
  switch (t) {
    case RobustTransform::jpeg:
      if (!integral || s < 1 || s > 100) throw ConfigError("jpeg quality must be an integer in [1, 100]");
      break;
    case RobustTransform::bit_depth:
      if (!integral || s < 1 || s > 8) throw ConfigError("bit depth must be an integer in [1, 8]");
      break;
    case RobustTransform::gaussian_noise:
      if (s < 0) throw ConfigError("noise sigma must be nonnegative");
      break;
    case RobustTransform::median_blur:
      if (!integral || s < 3 || static_cast<long>(s) % 2 == 0) throw ConfigError("median kernel must be odd and >= 3");
      break;
  }
}

json sections_json(const ExperimentConfig& c, bool with_all) {
  const AttackConfig& a = c.attack;
  json j;
  j["object"] = {{"image", c.object_image}, {"mask", c.object_mask}};
  j["scenes"] = {{"directory", c.scenes_dir}};
  json model = {{"min_depth", a.conversion.min_depth}, {"max_depth", a.conversion.max_depth}};
  if (c.surrogate_seed) model["surrogate_seed"] = *c.surrogate_seed;
  if (!c.weights.empty()) model["weights"] = c.weights;
  j["model"] = model;
  j["attack"] = {
      {"mode", to_string(a.mode)},
      {"offset", a.offset},
      {"shape", to_string(a.shape)},
      {"steps", a.steps},
      {"batch", a.batch},
      {"budget", a.budget},
      {"lambda_depth", a.weights.depth},
      {"lambda_tv", a.weights.tv},
      {"lambda_nps", a.weights.nps},
      {"lambda_area", a.weights.area},
      {"lr_patch", a.lr_patch},
      {"lr_shape", a.lr_shape},
      {"decay_factor", a.decay_factor},
      {"decay_period", a.decay_period},
      {"seed", a.seed},
      {"eval_seed", a.eval_seed},
      {"eval_batch", a.eval_batch},
      {"log_interval", a.log_interval},
      {"palette", c.palette},
      {"transforms",
       {{"scale_min", a.ranges.scale_min},
        {"scale_max", a.ranges.scale_max},
        {"rotation_deg", a.ranges.rotation_deg},
        {"brightness", a.ranges.brightness},
        {"contrast", a.ranges.contrast},
        {"saturation", a.ranges.saturation}}},
  };
  if (!with_all) return j;

  json robust = json::object();
  for (const auto& [t, strengths] : c.robustness) robust[to_string(t)] = strengths;
  j["eval"] = {{"alpha_reference", to_string(a.alpha_reference)},
               {"robustness", robust},
               {"sweep_budgets", c.sweep_budgets}};
  j["baselines"] = {{"de",
                     {{"population", c.de.population},
                      {"control_points", c.de.control_points},
                      {"F", c.de.differential_weight},
                      {"CR", c.de.crossover},
                      {"generations", c.de.generations},
                      {"max_evaluations", c.de.max_evaluations},
                      {"seed", c.de.seed},
                      {"batch", c.de.batch},
                      {"stage1_steps", c.de_stage1_steps}}}};
  j["output"] = {{"directory", c.output_dir}};
  return j;
}

}  // namespace

fs::path ExperimentConfig::resolve(const std::string& p) const {
  const fs::path path(p);
  return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
}

ExperimentConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  c.base_dir = base_dir;
  Section root(doc, "root");
  for (const char* required : {"object", "scenes"}) {
    if (!root.has(required)) throw ConfigError(std::string("config is missing section '") + required + "'");
  }

  Section object(root.raw("object"), "object");
  c.object_image = object.text("image", "", true);
  c.object_mask = object.text("mask", "", true);
  object.finish();

  Section scenes(root.raw("scenes"), "scenes");
  c.scenes_dir = scenes.text("directory", "", true);
  scenes.finish();

  AttackConfig& a = c.attack;
  if (root.has("model")) {
    Section model(root.raw("model"), "model");
    if (model.has("surrogate_seed")) c.surrogate_seed = model.count("surrogate_seed", 0);
    c.weights = model.text("weights", "");
    a.conversion.min_depth = model.number("min_depth", a.conversion.min_depth);
    a.conversion.max_depth = model.number("max_depth", a.conversion.max_depth);
    model.finish();
  }
  if (c.surrogate_seed && !c.weights.empty()) throw ConfigError("model: give either surrogate_seed or weights, not both");
  if (!c.surrogate_seed && c.weights.empty()) c.surrogate_seed = 0;
  if (!(a.conversion.min_depth > 0.0 && a.conversion.min_depth < a.conversion.max_depth)) {
    throw ConfigError("model: need 0 < min_depth < max_depth");
  }

  if (root.has("attack")) {
    Section s(root.raw("attack"), "attack");
    try {
      a.mode = parse_attack_mode(s.text("mode", to_string(a.mode)));
      a.shape = parse_mask_family(s.text("shape", to_string(a.shape)));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("attack: ") + e.what());
    }
    a.offset = s.number("offset", a.offset);
    a.steps = s.count("steps", a.steps);
    a.batch = s.count("batch", a.batch);
    a.budget = s.number("budget", a.budget);
    a.weights.depth = s.number("lambda_depth", a.weights.depth);
    a.weights.tv = s.number("lambda_tv", a.weights.tv);
    a.weights.nps = s.number("lambda_nps", a.weights.nps);
    a.weights.area = s.number("lambda_area", a.weights.area);
    a.lr_patch = s.number("lr_patch", a.lr_patch);
    a.lr_shape = s.number("lr_shape", a.lr_shape);
    a.decay_factor = s.number("decay_factor", a.decay_factor);
    a.decay_period = s.count("decay_period", a.decay_period);
    a.seed = s.count("seed", a.seed);
    a.eval_seed = s.count("eval_seed", a.eval_seed);
    a.eval_batch = s.count("eval_batch", a.eval_batch);
    a.log_interval = s.count("log_interval", a.log_interval);
    c.palette = s.text("palette", "");
    if (s.has("transforms")) {
      Section t(s.raw("transforms"), "attack.transforms");
      a.ranges.scale_min = t.number("scale_min", a.ranges.scale_min);
      a.ranges.scale_max = t.number("scale_max", a.ranges.scale_max);
      a.ranges.rotation_deg = t.number("rotation_deg", a.ranges.rotation_deg);
      a.ranges.brightness = t.number("brightness", a.ranges.brightness);
      a.ranges.contrast = t.number("contrast", a.ranges.contrast);
      a.ranges.saturation = t.number("saturation", a.ranges.saturation);
      t.finish();
    }
    s.finish();
  }

  c.robustness = default_robustness();
  c.sweep_budgets = {0.05, 0.11, 0.18, 0.33};
  if (root.has("eval")) {
    Section s(root.raw("eval"), "eval");
    try {
      a.alpha_reference = parse_alpha_reference(s.text("alpha_reference", "benign"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("eval: ") + e.what());
    }
    if (s.has("robustness")) {
      Section r(s.raw("robustness"), "eval.robustness");
      c.robustness.clear();
      for (const auto& [t, def] : default_robustness()) {
        const std::string key = to_string(t);
        if (r.has(key.c_str())) c.robustness.emplace_back(t, r.numbers(key.c_str(), {}));
      }
      r.finish();
    }
    c.sweep_budgets = s.numbers("sweep_budgets", c.sweep_budgets);
    s.finish();
  }
  for (const auto& [t, strengths] : c.robustness) {
    for (double v : strengths) check_strength(t, v);
  }
  for (double b : c.sweep_budgets) {
    if (!(b > 0.0 && b <= 1.0)) throw ConfigError("eval.sweep_budgets must lie in (0, 1]");
  }

  if (root.has("baselines")) {
    Section s(root.raw("baselines"), "baselines");
    if (s.has("de")) {
      Section d(s.raw("de"), "baselines.de");
      c.de.population = d.count("population", c.de.population);
      c.de.control_points = d.count("control_points", c.de.control_points);
      c.de.differential_weight = d.number("F", c.de.differential_weight);
      c.de.crossover = d.number("CR", c.de.crossover);
      c.de.generations = d.count("generations", c.de.generations);
      c.de.max_evaluations = d.count("max_evaluations", c.de.max_evaluations);
      c.de.seed = d.count("seed", c.de.seed);
      c.de.batch = d.count("batch", c.de.batch);
      c.de_stage1_steps = d.count("stage1_steps", c.de_stage1_steps);
      d.finish();
    }
    s.finish();
  }

  if (root.has("output")) {
    Section s(root.raw("output"), "output");
    c.output_dir = s.text("directory", c.output_dir);
    s.finish();
  }
  root.finish();

  try {
    a.validate();
    c.de.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  auto must_exist = [&](const std::string& p, const char* what, bool directory) {
    const fs::path full = c.resolve(p);
    if (directory ? !fs::is_directory(full) : !fs::is_regular_file(full)) {
      throw ConfigError(std::string(what) + " not found: " + full.string());
    }
  };
  must_exist(c.object_image, "object image", false);
  must_exist(c.object_mask, "object mask", false);
  must_exist(c.scenes_dir, "scene directory", true);
  if (!c.weights.empty()) must_exist(c.weights, "model weights", false);
  if (!c.palette.empty()) {
    must_exist(c.palette, "palette", false);
    try {
      a.palette = Palette::load(c.resolve(c.palette));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string serialize_config(const ExperimentConfig& config) { return sections_json(config, true).dump(2) + "\n"; }

std::uint64_t config_hash(const ExperimentConfig& config) { return fnv1a64(sections_json(config, false).dump()); }

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace svp::cli
