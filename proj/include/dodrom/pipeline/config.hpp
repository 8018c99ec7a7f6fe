#pragma once

#include "dodrom/eval/eval.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace dodrom::pipeline {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Environment variable that overrides paths.output.
inline constexpr const char* kOutputDirEnv = "DODROM_OUTPUT_DIR";

/// Everything a pipeline run needs. Sections of the INI file:
///   [benchmark] nx ny final_time n_t n_geom n_phys n_test seed test_seed threads
///               mu1 mu2 nu1 nu2 (each "lo, hi")
///   [dims]      n n_prime big_n n_a
///   [rom]       preset dfnn_hidden decoder_hidden
///   [dod]       preset ell seed_hidden head_hidden
///   [training] and [dod_training]
///               lr weight_decay batch_size max_epochs patience factor threshold min_lr
///               omega_h alpha init_seed shuffle_seed
///   [sweep]     presets reps fom_seed
///   [preset.<name>] dfnn_hidden decoder_hidden dod_ell dod_seed_hidden dod_head_hidden
///   [paths]     output
/// Every seed must be given explicitly; unknown keys are rejected.
struct RunConfig {
  fom::BenchmarkConfig benchmark;
  Index n_test = 20;
  std::uint64_t test_seed = 0;
  roms::RomDims dims;
  eval::Preset model;  // architecture used by train-dod and train-rom
  train::TrainConfig training;
  train::TrainConfig dod_training;
  std::vector<eval::Preset> presets = eval::default_presets();
  int timing_reps = eval::kMinTimingReps;
  std::uint64_t fom_seed = 0;
  std::string output = "out";

  [[nodiscard]] dod::DodDims dod_dims() const;
  [[nodiscard]] eval::SweepConfig sweep_config() const;

  /// Throws ConfigError; dimension messages name the violated inequality of
  /// n <= N' < N < N_A <= N_h.
  void validate() const;
};

/// Parses and validates. Relative paths.output resolve against the config file's directory.
RunConfig load_config(const std::filesystem::path& path);

/// paths.output unless the environment override is set.
std::filesystem::path output_dir(const RunConfig& cfg);

}  // namespace dodrom::pipeline
