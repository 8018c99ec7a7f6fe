#include "dodrom/eval/eval.hpp"

#include "dodrom/fom/darcy.hpp"
#include "dodrom/io/binary.hpp"
#include "dodrom/util/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace dodrom::eval {

namespace {

constexpr const char* kEvalSchema = "# dodrom-eval-report v1";
constexpr const char* kSummarySchema = "# dodrom-eval-summary v1";
constexpr const char* kSweepSchema = "# dodrom-sweep v1";

double g_norm2(const Eigen::MatrixXd& m, const Vector& g) { return (m.array().square().colwise() * g.array()).sum(); }

std::ofstream open_csv(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw EvalError("cannot write " + path);
  os.precision(17);
  return os;
}

std::string optional_number(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

}  // namespace

namespace {

// Projections need the reference columns, which the predictor signature does not carry.
Index test_trajectory_of(const fom::SnapshotSet& test, const fom::GeomParams& mu, const fom::PhysParams& nu) {
  for (Index r = 0; r < test.n_traj(); ++r) {
    const auto& ref = test.trajectories[std::size_t(r)];
    if (test.geom[std::size_t(ref.geom)] == mu && test.phys[std::size_t(ref.phys)] == nu) return r;
  }
  throw EvalError("parameter tuple not in the test set");
}

}  // namespace

double trajectory_error(const Eigen::MatrixXd& u, const Eigen::MatrixXd& uhat, const Vector& g) {
  if (u.rows() != uhat.rows() || u.cols() != uhat.cols() || u.rows() != g.size()) {
    throw EvalError("prediction and reference shapes differ");
  }
  const double den = g_norm2(u, g);
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(g_norm2(u - uhat, g) / den);
}

Index ErrorSummary::excluded() const {
  return Index(std::count_if(tuples.begin(), tuples.end(), [](const TupleError& t) { return t.excluded; }));
}

ErrorSummary relative_error(const fom::SnapshotSet& test, const TrajectoryPredictor& predict) {
  if (test.n_traj() == 0) throw EvalError("empty test set");
  const Vector g = test.mass();
  ErrorSummary out;
  double sum = 0.0, num_all = 0.0, den_all = 0.0;
  Index used = 0;
  for (Index r = 0; r < test.n_traj(); ++r) {
    const auto& ref = test.trajectories[std::size_t(r)];
    TupleError te{r, test.geom[std::size_t(ref.geom)], test.phys[std::size_t(ref.phys)], 0.0, false};
    const Eigen::MatrixXd u = test.trajectory(r);
    const Eigen::MatrixXd uhat = predict(te.mu, te.nu, test.times);
    te.error = trajectory_error(u, uhat, g);
    if (std::isnan(te.error) && g_norm2(u, g) == 0.0) {
      te.excluded = true;
      out.warnings.push_back("trajectory " + std::to_string(r) + " has a zero reference norm and is excluded");
    } else {
      sum += te.error;
      num_all += g_norm2(u - uhat, g);
      den_all += g_norm2(u, g);
      ++used;
    }
    out.tuples.push_back(te);
  }
  if (used == 0) throw EvalError("every test trajectory has a zero reference norm");
  out.e_r = sum / double(used);
  out.e_r_integral = std::sqrt(num_all / den_all);
  return out;
}

ErrorSummary relative_error(const roms::Rom& rom, const fom::SnapshotSet& test) {
  if (rom.n_h() != test.n_h()) throw EvalError("model and test set have different N_h");
  return relative_error(test, [&](const fom::GeomParams& mu, const fom::PhysParams& nu, const std::vector<double>& t) {
    return rom.infer_trajectory(mu, nu, t);
  });
}

ErrorSummary dod_projection_error(const dod::DodModel& model, const fom::SnapshotSet& test) {
  if (model.basis().rows() != test.n_h()) throw EvalError("DOD basis and test set have different N_h");
  const Vector g = test.mass();
  return relative_error(test, [&](const fom::GeomParams& mu, const fom::PhysParams& nu,
                                  const std::vector<double>& times) {
    const Index r = test_trajectory_of(test, mu, nu);
    const Eigen::MatrixXd u = test.trajectory(r);
    const Vector m = (Vector(2) << mu.mu1, mu.mu2).finished();
    Eigen::MatrixXd out(u.rows(), u.cols());
    for (std::size_t k = 0; k < times.size(); ++k) {
      const Eigen::MatrixXd v = model.full_basis(m, times[k]);
      out.col(Index(k)) = v * (v.transpose() * (g.asDiagonal() * u.col(Index(k))));
    }
    return out;
  });
}

ErrorSummary basis_projection_error(const Eigen::MatrixXd& basis, const fom::SnapshotSet& test) {
  if (basis.rows() != test.n_h()) throw EvalError("basis and test set have different N_h");
  const Vector g = test.mass();
  return relative_error(test, [&](const fom::GeomParams& mu, const fom::PhysParams& nu, const std::vector<double>&) {
    const Eigen::MatrixXd u = test.trajectory(test_trajectory_of(test, mu, nu));
    return Eigen::MatrixXd(basis * (basis.transpose() * (g.asDiagonal() * u)));
  });
}

void check_disjoint(const roms::Rom& rom, std::uint64_t test_fingerprint) {
  if (rom.data_fingerprint == test_fingerprint) {
    throw EvalError("test store fingerprint " + io::hex64(test_fingerprint) +
                    " equals the training fingerprint of the model");
  }
}

TimingStats time_median(const std::function<void()>& fn, int reps, int warmup) {
  if (reps < kMinTimingReps) throw std::invalid_argument("timing needs at least 20 repetitions");
  for (int i = 0; i < warmup; ++i) fn();
  std::vector<double> ms;
  ms.reserve(std::size_t(reps));
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  const std::size_t n = ms.size();
  const double median = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  return {median, ms.front(), ms.back(), reps};
}

double speedup(double t_fom, double t_fwd) {
  if (!(t_fom > 0.0) || !(t_fwd > 0.0)) throw std::invalid_argument("timings must be positive");
  return t_fom / t_fwd;
}

TimingStats fom_reference_time(const fom::SnapshotSet& like, std::uint64_t seed, int reps) {
  std::mt19937_64 rng(seed);
  const auto mu = fom::sample_geom(rng, 1, like.ranges).front();
  const auto nu = fom::sample_phys(rng, 1, like.ranges).front();
  const Index n_t = like.n_t();
  volatile double sink = 0.0;
  return time_median(
      [&] {
        const auto flow = fom::solve_darcy(like.grid, mu, like.ranges);
        const auto u = fom::solve_transport(like.grid, flow, mu, nu, like.final_time, n_t);
        sink = sink + u(0, 0);
      },
      reps);
}

TimingStats forward_time(const roms::Rom& rom, const fom::SnapshotSet& test, int reps) {
  if (test.n_traj() == 0) throw EvalError("empty test set");
  const auto& ref = test.trajectories.front();
  const auto& mu = test.geom[std::size_t(ref.geom)];
  const auto& nu = test.phys[std::size_t(ref.phys)];
  volatile double sink = 0.0;
  return time_median([&] { sink = sink + rom.infer_trajectory(mu, nu, test.times)(0, 0); }, reps);
}

EvalReport evaluate(const roms::Rom& rom, const fom::SnapshotSet& test, const EvalOptions& options) {
  if (options.test_fingerprint) check_disjoint(rom, *options.test_fingerprint);
  EvalReport report;
  report.variant = rom.variant();
  report.active_weights = rom.active_weights();
  report.errors = relative_error(rom, test);
  if (options.timing) {
    report.forward = forward_time(rom, test, options.reps);
    report.t_fom_ms = options.t_fom_ms > 0.0 ? options.t_fom_ms
                                             : fom_reference_time(test, options.fom_seed, options.reps).median_ms;
    report.speedup = speedup(report.t_fom_ms, report.forward->median_ms);
  }
  return report;
}

void save_eval_report(const std::string& base, const EvalReport& report) {
  auto os = open_csv(base + ".csv");
  os << kEvalSchema << "\n";
  os << "trajectory,mu1,mu2,nu1,nu2,relative_error,excluded\n";
  for (const auto& t : report.errors.tuples) {
    os << t.trajectory << ',' << t.mu.mu1 << ',' << t.mu.mu2 << ',' << t.nu.nu1 << ',' << t.nu.nu2 << ','
       << (t.excluded ? std::string() : optional_number(t.error)) << ',' << int(t.excluded) << "\n";
  }
  auto ss = open_csv(base + "_summary.csv");
  ss << kSummarySchema << "\n";
  ss << "key,value\n";
  ss << "variant," << roms::variant_name(report.variant) << "\n";
  ss << "active_weights," << report.active_weights << "\n";
  ss << "n_test," << report.errors.tuples.size() << "\n";
  ss << "n_excluded," << report.errors.excluded() << "\n";
  ss << "E_R," << report.errors.e_r << "\n";
  ss << "E_R_integral," << report.errors.e_r_integral << "\n";
  const bool timed = report.forward.has_value();
  ss << "t_fwd_ms," << (timed ? optional_number(report.forward->median_ms) : "") << "\n";
  ss << "t_fom_ms," << (timed ? optional_number(report.t_fom_ms) : "") << "\n";
  ss << "speedup," << (timed ? optional_number(report.speedup) : "") << "\n";
}

std::vector<Preset> default_presets() {
  std::vector<Preset> p(3);
  p[0].name = "low";
  p[0].rom = {{8, 8}, {8}};
  p[0].dod_ell = 4;
  p[0].dod_seed_hidden = {8};
  p[0].dod_head_hidden = {8};
  p[1].name = "medium";
  p[1].rom = {{32, 32}, {32}};
  p[1].dod_ell = 8;
  p[1].dod_seed_hidden = {32, 32};
  p[1].dod_head_hidden = {32};
  p[2].name = "high";
  p[2].rom = {{64, 64, 64}, {64}};
  p[2].dod_ell = 16;
  p[2].dod_seed_hidden = {64, 64};
  p[2].dod_head_hidden = {64};
  return p;
}

namespace {

dod::DodDims dod_dims(const Preset& p, const roms::RomDims& dims) {
  dod::DodDims d;
  d.ell = p.dod_ell;
  d.n_a = dims.n_a;
  d.n_prime = dims.n_prime;
  d.seed_hidden = p.dod_seed_hidden;
  d.head_hidden = p.dod_head_hidden;
  return d;
}

std::unique_ptr<roms::Rom> train_cell(roms::Variant v, const fom::SnapshotSet& train, const dod::DodModel* model,
                                      const Preset& p, const SweepConfig& cfg) {
  switch (v) {
    case roms::Variant::kPodDlRom:
      return roms::train_pod_dl_rom(train, cfg.dims, p.rom, cfg.rom_training);
    case roms::Variant::kDodDfnn:
      return roms::train_dod_dfnn(train, *model, cfg.dims, p.rom, cfg.rom_training);
    case roms::Variant::kDodDlRom:
      return roms::train_dod_dl_rom(train, *model, cfg.dims, p.rom, cfg.rom_training);
  }
  throw std::logic_error("unknown variant");
}

}  // namespace

SweepTable weight_error_sweep(const fom::SnapshotSet& train, const fom::SnapshotSet& test, const SweepConfig& cfg) {
  if (cfg.presets.empty() || cfg.variants.empty()) throw EvalError("sweep needs presets and variants");
  const bool timing = !cfg.parallel;
  const unsigned threads = cfg.parallel ? std::max(1u, cfg.threads) : 1u;
  const Index n_presets = Index(cfg.presets.size());
  const bool needs_dod = std::any_of(cfg.variants.begin(), cfg.variants.end(),
                                     [](roms::Variant v) { return v != roms::Variant::kPodDlRom; });

  std::vector<std::optional<dod::DodModel>> dods(static_cast<std::size_t>(n_presets));
  std::vector<std::string> dod_failure(static_cast<std::size_t>(n_presets));
  if (needs_dod) {
    util::parallel_for(n_presets, threads, [&](Index i) {
      try {
        dods[std::size_t(i)] = dod::fit_dod(train, dod_dims(cfg.presets[std::size_t(i)], cfg.dims), cfg.dod_training).model;
      } catch (const std::exception& e) {
        dod_failure[std::size_t(i)] = std::string("DOD training failed: ") + e.what();
      }
    });
  }

  SweepTable table;
  if (timing) {
    table.t_fom_ms = cfg.t_fom_ms > 0.0 ? cfg.t_fom_ms : fom_reference_time(test, cfg.fom_seed, cfg.reps).median_ms;
  }

  const Index n_variants = Index(cfg.variants.size());
  std::vector<SweepRow> rows(static_cast<std::size_t>(n_presets * n_variants));
  util::parallel_for(Index(rows.size()), threads, [&](Index c) {
    const Index vi = c / n_presets, pi = c % n_presets;
    const Preset& p = cfg.presets[std::size_t(pi)];
    SweepRow& row = rows[std::size_t(c)];
    row.variant = cfg.variants[std::size_t(vi)];
    row.preset = p.name;
    row.preset_index = pi;
    const bool dod_variant = row.variant != roms::Variant::kPodDlRom;
    if (dod_variant && !dods[std::size_t(pi)]) {
      row.failure = dod_failure[std::size_t(pi)];
      return;
    }
    try {
      const auto rom = train_cell(row.variant, train, dod_variant ? &*dods[std::size_t(pi)] : nullptr, p, cfg);
      row.weights = rom->active_weights();
      row.epochs = rom->history.epochs();
      row.best_val = rom->history.best_val;
      row.e_r = relative_error(*rom, test).e_r;
      if (timing) {
        row.t_fwd_ms = forward_time(*rom, test, cfg.reps).median_ms;
        row.speedup = speedup(*table.t_fom_ms, *row.t_fwd_ms);
      }
    } catch (const std::exception& e) {
      row.failure = e.what();
      if (row.failure.empty()) row.failure = "training failed";
    }
  });

  for (auto& row : rows) {
    const auto pod = std::find_if(rows.begin(), rows.end(), [&](const SweepRow& r) {
      return r.variant == roms::Variant::kPodDlRom && r.preset_index == row.preset_index && r.ok();
    });
    if (!row.ok() || pod == rows.end()) continue;
    row.weight_ratio = double(row.weights) / double(pod->weights);
    if (row.t_fwd_ms && pod->t_fwd_ms) row.t_fwd_ratio = *row.t_fwd_ms / *pod->t_fwd_ms;
  }
  auto variant_rank = [&](roms::Variant v) {
    return std::find(cfg.variants.begin(), cfg.variants.end(), v) - cfg.variants.begin();
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const SweepRow& a, const SweepRow& b) {
    if (a.variant != b.variant) return variant_rank(a.variant) < variant_rank(b.variant);
    return a.weights < b.weights;
  });
  table.rows = std::move(rows);
  return table;
}

void save_sweep_csv(const std::string& path, const SweepTable& table) {
  auto os = open_csv(path);
  os << kSweepSchema << " t_fom_ms=" << optional_number(table.t_fom_ms) << "\n";
  os << "variant,preset,omega,omega_ratio,E_R,t_fwd_ms,t_fwd_ratio,speedup,epochs,best_val,status,failure\n";
  for (const auto& r : table.rows) {
    std::string failure = r.failure;
    std::replace(failure.begin(), failure.end(), ',', ';');
    std::replace(failure.begin(), failure.end(), '\n', ' ');
    os << roms::variant_name(r.variant) << ',' << r.preset << ',';
    if (r.ok()) {
      os << r.weights << ',' << optional_number(r.weight_ratio == 0.0 ? std::nullopt : std::optional(r.weight_ratio))
         << ',' << r.e_r << ',' << optional_number(r.t_fwd_ms) << ',' << optional_number(r.t_fwd_ratio) << ','
         << optional_number(r.speedup) << ',' << r.epochs << ',' << r.best_val << ",ok,\n";
    } else {
      os << ",,,,,,,,failed," << failure << "\n";
    }
  }
}

}  // namespace dodrom::eval
