#ifndef SVP_TOOLS_CLI_HPP
#define SVP_TOOLS_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "svp/attack.hpp"
#include "svp/baselines.hpp"
#include "svp/harness.hpp"

namespace svp::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNumerical = 3;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parsed experiment document. Paths are kept as written and resolved
/// against base_dir.
struct ExperimentConfig {
  fs::path base_dir;

  std::string object_image;
  std::string object_mask;
  std::string scenes_dir;

  std::optional<std::uint64_t> surrogate_seed;
  std::string weights;

  AttackConfig attack;
  std::string palette;  // empty selects the built-in palette

  std::vector<std::pair<RobustTransform, std::vector<double>>> robustness;
  std::vector<double> sweep_budgets;

  DeConfig de;
  std::size_t de_stage1_steps = 0;  // 0 uses attack.steps

  std::string output_dir = "out";

  fs::path resolve(const std::string& p) const;
};

ExperimentConfig parse_config(const std::string& json_text, const fs::path& base_dir = {});
ExperimentConfig load_config(const fs::path& path);
/// Canonical JSON with every field present and keys sorted.
std::string serialize_config(const ExperimentConfig& config);
/// Hash of the object, scenes, model and attack sections.
std::uint64_t config_hash(const ExperimentConfig& config);
std::string hash_hex(std::uint64_t hash);

struct Workspace {
  ObjectSample object;
  std::vector<Tensor> scenes;
  std::unique_ptr<DisparityModel> model;
};

Workspace load_workspace(const ExperimentConfig& config);

/// Full command line; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace svp::cli

#endif  // SVP_TOOLS_CLI_HPP
