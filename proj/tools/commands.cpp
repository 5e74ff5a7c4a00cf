#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "cli.hpp"
#include "svp/synthetic.hpp"

namespace svp::cli {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("short write to " + path.string());
}

ObjectSample load_object(const ExperimentConfig& c) {
  const Tensor image = read_ppm(c.resolve(c.object_image)).to_tensor();
  const Gray8Image mask8 = read_pgm8(c.resolve(c.object_mask));
  if (mask8.width != image.dim(1) || mask8.height != image.dim(0)) {
    throw ConfigError("object mask dims differ from the object image");
  }
  std::vector<double> m(mask8.samples.size());
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = mask8.samples[k] >= 128 ? 1.0 : 0.0;
  return ObjectSample(image, Tensor::from({mask8.height, mask8.width}, std::move(m)));
}

std::vector<Tensor> load_scenes(const ExperimentConfig& c) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(c.resolve(c.scenes_dir))) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("scene directory has no .ppm files: " + c.resolve(c.scenes_dir).string());
  std::vector<Tensor> scenes;
  for (const auto& f : files) {
    scenes.push_back(read_ppm(f).to_tensor());
    if (scenes.back().shape() != scenes.front().shape()) throw ConfigError("scenes differ in size: " + f.string());
  }
  const auto& s = scenes.front();
  if (s.dim(0) % 8 != 0 || s.dim(1) % 8 != 0) throw ConfigError("scene dims must be multiples of 8");
  return scenes;
}

}  // namespace

Workspace load_workspace(const ExperimentConfig& c) {
  SurrogateWeights w =
      c.weights.empty() ? SurrogateWeights::random(c.surrogate_seed.value_or(0)) : load_weights(c.resolve(c.weights));
  return {load_object(c), load_scenes(c), std::make_unique<SurrogateModel>(std::move(w))};
}

namespace {

struct Options {
  std::string config;
  std::string state;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<double> budgets;
  std::size_t synth_scenes = 4;
  std::uint64_t synth_seed = 0;
};

ExperimentConfig configure(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  ExperimentConfig c = load_config(o.config);
  if (o.seed) c.attack.seed = *o.seed;
  return c;
}

fs::path output_dir(const ExperimentConfig& c, const Options& o) {
  const fs::path dir = o.out.empty() ? c.resolve(c.output_dir) : fs::path(o.out);
  fs::create_directories(dir);
  return dir;
}

AttackState require_state(const ExperimentConfig& c, const Options& o) {
  if (o.state.empty()) throw ConfigError("--state is required");
  return load_state(o.state, config_hash(c));
}

void write_patch_artifacts(const fs::path& dir, const std::string& stem, const AttackState& st) {
  write_ppm(dir / (stem + "patch.ppm"), Rgb8Image::from_tensor(st.patch));
  write_pgm8(dir / (stem + "mask.pgm"), Gray8Image::from_tensor(st.binary_mask()));
}

int cmd_attack(const Options& o, std::ostream& out) {
  const ExperimentConfig c = configure(o);
  const Workspace ws = load_workspace(c);
  const std::uint64_t hash = config_hash(c);
  AttackState st = o.state.empty() ? initial_state(c.attack, ws.object) : load_state(o.state, hash);
  const auto rows = run_attack(c.attack, ws.object, ws.scenes, *ws.model, st);
  const fs::path dir = output_dir(c, o);
  write_text(dir / "train_log.csv", format_log(rows));
  write_patch_artifacts(dir, "", st);
  save_state(dir / "state.svps", st, hash);
  const BatchEval be = evaluate(c.attack, ws.object, ws.scenes, *ws.model, st);
  write_text(dir / "metrics.csv", metrics_csv_header() + metrics_csv_row(hash_hex(hash), c.attack, be.row));
  out << "attack finished at step " << st.step << ", held-out L_total " << be.row.total << ", alpha "
      << be.row.metrics.alpha << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const ExperimentConfig c = configure(o);
  const AttackState st = require_state(c, o);
  const Workspace ws = load_workspace(c);
  const BatchEval be = evaluate(c.attack, ws.object, ws.scenes, *ws.model, st);
  const std::string csv = metrics_csv_header() + metrics_csv_row(hash_hex(config_hash(c)), c.attack, be.row);
  write_text(output_dir(c, o) / "metrics.csv", csv);
  out << csv;
  return kExitOk;
}

int cmd_robust(const Options& o, std::ostream& out) {
  const ExperimentConfig c = configure(o);
  const AttackState st = require_state(c, o);
  const Workspace ws = load_workspace(c);
  const auto rows = robustness_grid(c.attack, ws.object, ws.scenes, *ws.model, st, c.robustness);
  write_text(output_dir(c, o) / "robust.csv", format_robust(rows));
  out << "wrote " << rows.size() << " robustness rows\n";
  return kExitOk;
}

int cmd_render(const Options& o, std::ostream& out) {
  const ExperimentConfig c = configure(o);
  const AttackState st = require_state(c, o);
  const Workspace ws = load_workspace(c);
  const BatchEval be = evaluate(c.attack, ws.object, ws.scenes, *ws.model, st, true);
  const fs::path dir = output_dir(c, o);
  const Scenario& sc = be.scenarios.front();
  const double scale = c.attack.conversion.max_depth;
  write_pgm16(dir / "depth_benign.pgm", disparity_to_depth(ws.model->forward(sc.benign), c.attack.conversion), scale);
  write_pgm16(dir / "depth_adv.pgm", disparity_to_depth(ws.model->forward(sc.adversarial), c.attack.conversion), scale);
  write_ppm(dir / "benign.ppm", Rgb8Image::from_tensor(sc.benign));
  write_ppm(dir / "adversarial.ppm", Rgb8Image::from_tensor(sc.adversarial));
  out << "rendered scenario 0 of the held-out batch\n";
  return kExitOk;
}

int cmd_baseline_de(const Options& o, std::ostream& out) {
  const ExperimentConfig c = configure(o);
  const Workspace ws = load_workspace(c);
  AttackConfig stage1 = c.attack;
  if (c.de_stage1_steps > 0) stage1.steps = c.de_stage1_steps;
  AttackState st = initial_state_fixed(stage1, ws.object, ws.object.mask);
  run_attack(stage1, ws.object, ws.scenes, *ws.model, st);
  const DeResult r = de_optimize(c.attack, c.de, ws.object, st.patch, ws.scenes, *ws.model);
  const fs::path dir = output_dir(c, o);
  write_text(dir / "de_points.txt", r.best.serialize());
  write_pgm8(dir / "de_mask.pgm",
             Gray8Image::from_tensor(rasterize_spline(r.best, ws.object.height(), ws.object.width())));
  write_ppm(dir / "de_patch.ppm", Rgb8Image::from_tensor(st.patch));
  std::ostringstream log;
  log << "generation,best_fitness\n";
  char buf[64];
  for (std::size_t g = 0; g < r.history.size(); ++g) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g\n", g, r.history[g]);
    log << buf;
  }
  write_text(dir / "de_log.csv", log.str());
  out << "DE best fitness " << r.best_fitness << " after " << r.evaluations << " evaluations\n";
  return kExitOk;
}

int cmd_baseline_gaussian(const Options& o, std::ostream& out) {
  const ExperimentConfig c = configure(o);
  const Workspace ws = load_workspace(c);
  const AggregateResult r = gaussian_aggregate(c.attack, ws.object, ws.scenes, *ws.model);
  const fs::path dir = output_dir(c, o);
  write_text(dir / "gaussian_log.csv", format_log(r.log));
  write_pgm8(dir / "gaussian_mask.pgm", Gray8Image::from_tensor(r.mask));
  write_ppm(dir / "gaussian_patch.ppm", Rgb8Image::from_tensor(r.state.patch));
  AttackState final_state = initial_state_fixed(c.attack, ws.object, r.mask);
  final_state.patch = r.state.patch;
  final_state.step = r.state.step;
  const BatchEval be = evaluate(c.attack, ws.object, ws.scenes, *ws.model, final_state);
  write_text(dir / "gaussian_metrics.csv",
             metrics_csv_header() + metrics_csv_row(hash_hex(config_hash(c)), c.attack, be.row));
  out << "gaussian aggregation finished, held-out alpha " << be.row.metrics.alpha << "\n";
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const ExperimentConfig c = configure(o);
  const Workspace ws = load_workspace(c);
  const auto budgets = o.budgets.empty() ? c.sweep_budgets : o.budgets;
  const auto rows = sweep_patch_size(budgets, c.attack, ws.object, ws.scenes, *ws.model);
  write_text(output_dir(c, o) / "sweep.csv", format_sweep(rows));
  out << "wrote " << rows.size() << " sweep rows\n";
  return kExitOk;
}

int cmd_synth_data(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("--out is required");
  const fs::path dir(o.out);
  fs::create_directories(dir / "scenes");
  const ObjectSample car = synthetic_car(64, 96, o.synth_seed);
  write_ppm(dir / "car.ppm", Rgb8Image::from_tensor(car.image));
  write_pgm8(dir / "car_mask.pgm", Gray8Image::from_tensor(car.mask));
  const auto scenes = synthetic_scenes(o.synth_scenes, 96, 192, derive_seed(o.synth_seed, 1));
  for (std::size_t k = 0; k < scenes.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%02zu.ppm", k);
    write_ppm(dir / "scenes" / name, Rgb8Image::from_tensor(scenes[k]));
  }
  out << "wrote synthetic object and " << scenes.size() << " scenes to " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shape-varying adversarial patch engine for monocular depth models", "svpatch"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub, bool needs_state) {
    sub->add_option("--config", o.config, "Experiment JSON")->required();
    auto* st = sub->add_option("--state", o.state, "SVPS1 state file");
    if (needs_state) st->required();
    sub->add_option("--out", o.out, "Output directory (overrides output.directory)");
    sub->add_option("--seed", seed, "Attack seed (overrides attack.seed)");
  };
  auto* attack = app.add_subcommand("attack", "Optimize patch and shape; --state resumes");
  common(attack, false);
  auto* eval = app.add_subcommand("eval", "Metrics of a state on the held-out batch");
  common(eval, true);
  auto* robust = app.add_subcommand("robust", "Metrics under input transformations");
  common(robust, true);
  auto* render = app.add_subcommand("render", "16-bit depth maps of a benign and adversarial scene");
  common(render, true);
  auto* de = app.add_subcommand("baseline-de", "Two-stage differential evolution over spline masks");
  common(de, false);
  auto* gauss = app.add_subcommand("baseline-gaussian", "Per-pixel mask with Gaussian aggregation");
  common(gauss, false);
  auto* sweep = app.add_subcommand("sweep", "One attack per patch budget");
  common(sweep, false);
  sweep->add_option("--budgets", o.budgets, "Budgets (default eval.sweep_budgets)");
  auto* synth = app.add_subcommand("synth-data", "Write a synthetic object and scenes");
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--scenes", o.synth_scenes, "Number of scenes");
  synth->add_option("--seed", o.synth_seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  for (auto* sub : {attack, eval, robust, render, de, gauss, sweep}) {
    if (sub->parsed() && sub->count("--seed") > 0) o.seed = seed;
  }

  try {
    if (attack->parsed()) return cmd_attack(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (robust->parsed()) return cmd_robust(o, out);
    if (render->parsed()) return cmd_render(o, out);
    if (de->parsed()) return cmd_baseline_de(o, out);
    if (gauss->parsed()) return cmd_baseline_gaussian(o, out);
    if (sweep->parsed()) return cmd_sweep(o, out);
    if (synth->parsed()) return cmd_synth_data(o, out);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const FormatError& e) {
    err << "invalid input file: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace svp::cli
