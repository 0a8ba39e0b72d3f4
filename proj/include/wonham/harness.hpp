#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wonham/markov.hpp"

namespace wonham {

enum class ExperimentKind {
  FilterRun,
  Stability,
  Bounds,
  Identify,
  Classify,
  Counterexample,
  SmootherCheck,
};

std::string_view to_string(ExperimentKind kind) noexcept;
std::optional<ExperimentKind> parse_kind(std::string_view name) noexcept;
const std::vector<ExperimentKind>& all_kinds();

/// Parsed and validated experiment description. See configs/example.cfg for
/// the file format.
struct ExperimentConfig {
  std::optional<ExperimentKind> kind;
  std::optional<Matrix> generator;
  std::optional<Vector> h;
  double sigma = 1.0;
  std::vector<std::size_t> classes;  // optional per-state class labels
  std::optional<Vector> nu;
  std::optional<Vector> beta;
  double horizon = 10.0;
  double dt = 1e-3;
  std::size_t trials = 100;
  std::vector<double> r_grid;
  std::vector<double> report_times;
  std::size_t blocks = 100;
  std::size_t min_blocks = 50;
  std::uint64_t seed = 0;
  std::string output = "out";
  std::string source;  // original text, echoed into the manifest
};

/// Strict parser: unknown or repeated keys, malformed values and inconsistent
/// lengths raise Error(ConfigInvalid) whose message starts with "line N:" when
/// the problem is local to one entry.
ExperimentConfig validate_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

struct RunOptions {
  std::optional<ExperimentKind> kind;  // overrides the config's kind
  std::optional<std::uint64_t> seed;   // overrides the config's seed
  std::optional<std::string> out_dir;  // overrides the config's output
  unsigned threads = 1;
  bool quiet = true;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigInvalid = 2;
inline constexpr int kExitExperimentFailed = 3;

struct RunResult {
  int exit_code = kExitOk;
  std::string error_category;  // empty on success
  std::string error_message;
  std::vector<std::string> artifacts;  // file names inside the output directory
  std::string summary;                 // human-readable text report
};

/// Dispatches to the named experiment and writes its CSV artifacts, a
/// summary.txt and a manifest.json into the output directory. The manifest is
/// written on failure too, carrying the error category.
RunResult run(const ExperimentConfig& config, const RunOptions& options);

/// Writes a failure manifest for errors raised before a config exists.
void write_failure_manifest(const std::string& out_dir, std::string_view category,
                            std::string_view message);

std::string_view code_version() noexcept;

}  // namespace wonham
