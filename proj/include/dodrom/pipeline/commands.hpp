#pragma once

#include "dodrom/pipeline/config.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dodrom::pipeline {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitTraining = 4 };

/// Missing or inconsistent inputs: absent stores, skipped pipeline stages, fingerprint mismatches.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Files under the output directory.
struct Layout {
  std::filesystem::path root;

  [[nodiscard]] std::string train_store() const { return (root / "data" / "train").string(); }
  [[nodiscard]] std::string test_store() const { return (root / "data" / "test").string(); }
  [[nodiscard]] std::filesystem::path pod_dir() const { return root / "pod"; }
  [[nodiscard]] std::string pod_basis() const { return (pod_dir() / "pre_reduction").string(); }
  [[nodiscard]] std::filesystem::path dod_dir() const { return root / "dod"; }
  [[nodiscard]] std::filesystem::path model_dir(roms::Variant v) const { return root / "models" / roms::variant_name(v); }
  [[nodiscard]] std::filesystem::path reports() const { return root / "reports"; }
};

/// Each command returns its one-line summary and throws ConfigError, DataError or
/// TrainingFailure (or a library error mapped by run_command).
std::string cmd_generate(const RunConfig& cfg, const Layout& layout);
std::string cmd_pod(const RunConfig& cfg, const Layout& layout);
std::string cmd_train_dod(const RunConfig& cfg, const Layout& layout);
std::string cmd_train_rom(const RunConfig& cfg, const Layout& layout, roms::Variant variant);

struct EvaluateOptions {
  std::vector<roms::Variant> variants;  // empty: every trained model
  bool timing = true;
};
std::string cmd_evaluate(const RunConfig& cfg, const Layout& layout, const EvaluateOptions& options);

struct SweepOptions {
  bool parallel = false;
  unsigned threads = 1;
};
std::string cmd_sweep(const RunConfig& cfg, const Layout& layout, const SweepOptions& options);
std::string cmd_knw(const RunConfig& cfg, const Layout& layout, Index n_max);

/// Matrix stores become one CSV row per matrix row; network checkpoints become
/// layer,kind,row,col,value records.
std::string cmd_export(const std::string& input, const std::string& output);

/// Runs `body`, prints its summary to `out` or the error to `err`, and returns the exit code.
int run_command(const std::function<std::string()>& body, std::ostream& out, std::ostream& err);

}  // namespace dodrom::pipeline
