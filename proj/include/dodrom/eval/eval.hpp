#pragma once

#include "dodrom/roms/roms.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dodrom::eval {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// sqrt(sum_k |u_k - uhat_k|_G^2) / sqrt(sum_k |u_k|_G^2) over the columns of one trajectory
/// (the 1/N_t factors cancel). NaN when the reference has zero norm.
double trajectory_error(const Eigen::MatrixXd& u, const Eigen::MatrixXd& uhat, const Vector& g);

struct TupleError {
  Index trajectory = 0;
  fom::GeomParams mu;
  fom::PhysParams nu;
  double error = 0.0;
  bool excluded = false;  // zero reference norm
};

struct ErrorSummary {
  std::vector<TupleError> tuples;
  double e_r = 0.0;           // mean of the per-trajectory errors
  double e_r_integral = 0.0;  // one ratio over all trajectories and times (diagnostic)
  std::vector<std::string> warnings;
  [[nodiscard]] Index excluded() const;
};

using TrajectoryPredictor = std::function<Eigen::MatrixXd(const fom::GeomParams&, const fom::PhysParams&,
                                                          const std::vector<double>&)>;

/// Trajectories with a zero reference are excluded from both aggregates with a warning.
ErrorSummary relative_error(const fom::SnapshotSet& test, const TrajectoryPredictor& predict);
ErrorSummary relative_error(const roms::Rom& rom, const fom::SnapshotSet& test);

/// E_R of the G-orthogonal projection onto V_{mu,t} = A V~_{mu,t}, the best approximation any
/// coefficient model in the DOD basis can reach.
ErrorSummary dod_projection_error(const dod::DodModel& model, const fom::SnapshotSet& test);
/// E_R of the G-orthogonal projection onto a fixed G-orthonormal basis.
ErrorSummary basis_projection_error(const Eigen::MatrixXd& basis, const fom::SnapshotSet& test);

/// Refuses to evaluate a model on the store it was trained on.
void check_disjoint(const roms::Rom& rom, std::uint64_t test_fingerprint);

inline constexpr int kMinTimingReps = 20;

struct TimingStats {
  double median_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  int reps = 0;
};

/// Median wall time of fn over `reps` calls after `warmup` untimed calls.
TimingStats time_median(const std::function<void()>& fn, int reps = kMinTimingReps, int warmup = 2);

/// t_fom / t_fwd; both must be positive.
double speedup(double t_fom, double t_fwd);

/// Darcy plus transport for one tuple drawn from the ranges of `like` with `seed`, on the same
/// grid and time axis.
TimingStats fom_reference_time(const fom::SnapshotSet& like, std::uint64_t seed, int reps = kMinTimingReps);

/// Inference of a full trajectory (all output times) for the first test tuple.
TimingStats forward_time(const roms::Rom& rom, const fom::SnapshotSet& test, int reps = kMinTimingReps);

struct EvalOptions {
  bool timing = true;
  int reps = kMinTimingReps;
  double t_fom_ms = 0.0;  // measured when 0
  std::uint64_t fom_seed = 12345;
  std::optional<std::uint64_t> test_fingerprint;
};

struct EvalReport {
  roms::Variant variant = roms::Variant::kPodDlRom;
  ErrorSummary errors;
  std::optional<TimingStats> forward;
  double t_fom_ms = 0.0;
  double speedup = 0.0;
  std::size_t active_weights = 0;
};

EvalReport evaluate(const roms::Rom& rom, const fom::SnapshotSet& test, const EvalOptions& options = {});

/// `<base>.csv`: one row per test tuple; `<base>_summary.csv`: key,value aggregates. Both start
/// with a versioned schema comment. Timing entries are left empty when not measured.
void save_eval_report(const std::string& base, const EvalReport& report);

/// One rung of a width ladder: ROM networks and the DOD hidden layers (reduced dimensions come
/// from the sweep's RomDims).
struct Preset {
  std::string name;
  roms::Arch rom;
  Index dod_ell = 8;
  std::vector<Index> dod_seed_hidden{32, 32};
  std::vector<Index> dod_head_hidden{32};
};

/// Three rungs with strictly increasing widths.
std::vector<Preset> default_presets();

struct SweepConfig {
  std::vector<Preset> presets = default_presets();
  std::vector<roms::Variant> variants{roms::Variant::kPodDlRom, roms::Variant::kDodDlRom, roms::Variant::kDodDfnn};
  roms::RomDims dims;
  train::TrainConfig rom_training;
  train::TrainConfig dod_training;
  bool parallel = false;  // cells on `threads` workers; timing columns are then left empty
  unsigned threads = 1;
  int reps = kMinTimingReps;
  double t_fom_ms = 0.0;  // measured when 0 and timing is on
  std::uint64_t fom_seed = 12345;
};

struct SweepRow {
  roms::Variant variant = roms::Variant::kPodDlRom;
  std::string preset;
  Index preset_index = 0;
  std::size_t weights = 0;
  double weight_ratio = 0.0;  // against POD-DL-ROM at the same preset
  double e_r = 0.0;
  std::optional<double> t_fwd_ms;
  std::optional<double> t_fwd_ratio;
  std::optional<double> speedup;
  Index epochs = 0;
  double best_val = 0.0;
  std::string failure;  // empty when the cell trained
  [[nodiscard]] bool ok() const { return failure.empty(); }
};

struct SweepTable {
  std::vector<SweepRow> rows;  // sorted by variant, then weights
  std::optional<double> t_fom_ms;
};

/// Trains one DOD per preset (shared by both DOD variants) and every (variant, preset) cell
/// with the configured seeds. A failing cell yields a row with `failure` set and the sweep
/// continues.
SweepTable weight_error_sweep(const fom::SnapshotSet& train, const fom::SnapshotSet& test, const SweepConfig& cfg);

void save_sweep_csv(const std::string& path, const SweepTable& table);

}  // namespace dodrom::eval
