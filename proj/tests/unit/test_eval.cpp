#include <doctest.h>

#include "dodrom/eval/eval.hpp"
#include "support/curve_set.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace dodrom;
using namespace dodrom::eval;
using dodrom::testing::curve_set;
using dodrom::testing::random_matrix;

namespace {

// Two trajectories of three outputs on a 2x2 grid (G = 0.25 I); the second is 20 times larger.
fom::SnapshotSet small_set(std::mt19937_64& rng) {
  fom::SnapshotSet set;
  set.grid = fom::Grid(2, 2);
  set.geom = {{0.15, 0.1}, {0.25, -0.2}};
  set.phys = {{0.2, 0.5}, {0.12, 0.9}};
  set.times = {0.4, 0.8, 1.2};
  set.final_time = 1.2;
  set.trajectories = {{0, 0}, {1, 1}};
  set.U = random_matrix(rng, 4, 6, 0.0, 1.0);
  set.U.middleCols(3, 3) *= 20.0;
  return set;
}

// Loop oracle for the per-trajectory error with explicit cell areas.
double oracle_error(const Eigen::MatrixXd& u, const Eigen::MatrixXd& uhat, double area) {
  double num = 0.0, den = 0.0;
  for (Index k = 0; k < u.cols(); ++k) {
    for (Index i = 0; i < u.rows(); ++i) {
      num += area * (u(i, k) - uhat(i, k)) * (u(i, k) - uhat(i, k));
      den += area * u(i, k) * u(i, k);
    }
  }
  return std::sqrt((num / double(u.cols())) / (den / double(u.cols())));
}

TrajectoryPredictor from_matrix(const fom::SnapshotSet& set, const Eigen::MatrixXd& pred) {
  return [&set, pred](const fom::GeomParams& mu, const fom::PhysParams&, const std::vector<double>&) {
    const Index r = mu == set.geom[0] ? 0 : 1;
    return Eigen::MatrixXd(pred.middleCols(r * set.n_t(), set.n_t()));
  };
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "dodrom_test_eval";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("relative error trivial cases") {
  std::mt19937_64 rng(1);
  const auto set = small_set(rng);
  CHECK(relative_error(set, from_matrix(set, set.U)).e_r == 0.0);
  CHECK(relative_error(set, from_matrix(set, Eigen::MatrixXd::Zero(4, 6))).e_r == doctest::Approx(1.0).epsilon(1e-15));
  const auto scaled = relative_error(set, from_matrix(set, 1.05 * set.U));
  CHECK(std::abs(scaled.e_r - 0.05) <= 1e-12);
  CHECK(scaled.tuples.size() == 2);
  CHECK(scaled.tuples[1].mu == set.geom[1]);
}

TEST_CASE("relative error matches the loop oracle and differs from the integral form") {
  std::mt19937_64 rng(2);
  const auto set = small_set(rng);
  const Eigen::MatrixXd pred = set.U + random_matrix(rng, 4, 6, -0.1, 0.1);
  const auto s = relative_error(set, from_matrix(set, pred));
  const double area = 0.25;
  const double e0 = oracle_error(set.U.leftCols(3), pred.leftCols(3), area);
  const double e1 = oracle_error(set.U.rightCols(3), pred.rightCols(3), area);
  CHECK(s.tuples[0].error == doctest::Approx(e0).epsilon(1e-13));
  CHECK(s.tuples[1].error == doctest::Approx(e1).epsilon(1e-13));
  CHECK(s.e_r == doctest::Approx(0.5 * (e0 + e1)).epsilon(1e-13));
  const double integral = oracle_error(set.U, pred, area);
  CHECK(s.e_r_integral == doctest::Approx(integral).epsilon(1e-13));
  CHECK(std::abs(s.e_r - s.e_r_integral) > 1e-3);

  // Same positive factor on predictions and targets.
  fom::SnapshotSet big = set;
  big.U *= 7.5;
  const auto t = relative_error(big, from_matrix(big, 7.5 * pred));
  CHECK(t.e_r == doctest::Approx(s.e_r).epsilon(1e-13));
}

TEST_CASE("zero reference trajectories are excluded with a warning") {
  std::mt19937_64 rng(3);
  auto set = small_set(rng);
  set.U.leftCols(3).setZero();
  const Eigen::MatrixXd pred = 1.1 * set.U;
  const auto s = relative_error(set, from_matrix(set, pred));
  CHECK(s.tuples[0].excluded);
  CHECK(s.excluded() == 1);
  CHECK(s.warnings.size() == 1);
  CHECK(s.e_r == doctest::Approx(0.1).epsilon(1e-12));
  set.U.setZero();
  CHECK_THROWS_AS(relative_error(set, from_matrix(set, set.U)), EvalError);
}

TEST_CASE("speedup") {
  CHECK(std::lround(speedup(22000.0, 32.17)) == 684);
  CHECK(std::lround(speedup(22000.0, 30.86)) == 713);
  CHECK(speedup(3.5, 3.5) == 1.0);
  CHECK_THROWS_AS(speedup(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(speedup(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("median timing") {
  int calls = 0;
  const auto t = time_median([&] { ++calls; }, 21, 3);
  CHECK(calls == 24);
  CHECK(t.reps == 21);
  CHECK(t.min_ms <= t.median_ms);
  CHECK(t.median_ms <= t.max_ms);
  CHECK_THROWS_AS(time_median([] {}, 5), std::invalid_argument);
  const auto slow = time_median([] { std::this_thread::sleep_for(std::chrono::milliseconds(2)); });
  CHECK(slow.median_ms >= 2.0);
}

TEST_CASE("report files and disjointness") {
  const auto set = curve_set(3, 2, 4, 5, 9);
  const auto test = curve_set(2, 2, 4, 6, 9);
  train::TrainConfig cfg;
  cfg.max_epochs = 3;
  roms::RomDims dims;
  dims.n = 2;
  dims.big_n = 3;
  const auto rom = roms::train_pod_dl_rom(set, dims, roms::Arch{{4}, {4}}, cfg);
  CHECK_THROWS_AS(check_disjoint(*rom, rom->data_fingerprint), EvalError);
  CHECK_NOTHROW(check_disjoint(*rom, rom->data_fingerprint + 1));

  EvalOptions opt;
  opt.t_fom_ms = 10.0;
  const auto report = evaluate(*rom, test, opt);
  CHECK(report.errors.tuples.size() == 4);
  REQUIRE(report.forward);
  CHECK(report.speedup == doctest::Approx(10.0 / report.forward->median_ms));
  CHECK(report.active_weights == rom->active_weights());

  const auto base = scratch("report").string();
  save_eval_report(base, report);
  std::ifstream is(base + ".csv");
  std::string line;
  std::getline(is, line);
  CHECK(line == "# dodrom-eval-report v1");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 5);
  std::ifstream ss(base + "_summary.csv");
  std::getline(ss, line);
  CHECK(line == "# dodrom-eval-summary v1");
}

TEST_CASE("presets grow strictly") {
  const auto presets = default_presets();
  REQUIRE(presets.size() == 3);
  for (auto v : {roms::Variant::kPodDlRom, roms::Variant::kDodDfnn}) {
    std::size_t last = 0;
    for (const auto& p : presets) {
      const bool pod = v == roms::Variant::kPodDlRom;
      auto nets = roms::Networks::make(p.rom, 2, pod ? std::optional<Index>(8) : std::nullopt);
      nets.init(1);
      dod::DodDims d;
      d.ell = p.dod_ell;
      d.seed_hidden = p.dod_seed_hidden;
      d.head_hidden = p.dod_head_hidden;
      dod::DodModel m(d, Eigen::MatrixXd::Identity(16, 10));
      m.init(1);
      const std::size_t w = nets.active_weights() + (pod ? 0 : m.active_weights());
      CHECK(w > last);
      last = w;
    }
  }
}

TEST_CASE("sweep completeness, ordering and failure records") {
  const auto train = curve_set(4, 3, 5, 11, 21);
  const auto test = curve_set(2, 2, 5, 12, 21);
  SweepConfig cfg;
  cfg.presets.resize(2);
  cfg.presets[0].name = "a";
  cfg.presets[0].rom = {{4}, {4}};
  cfg.presets[0].dod_ell = 2;
  cfg.presets[0].dod_seed_hidden = {4};
  cfg.presets[0].dod_head_hidden = {4};
  cfg.presets[1].name = "b";
  cfg.presets[1].rom = {{8, 8}, {8}};
  cfg.dims.n = 3;
  cfg.dims.n_prime = 2;
  cfg.dims.big_n = 3;
  cfg.dims.n_a = 4;
  cfg.rom_training.max_epochs = 5;
  cfg.dod_training.max_epochs = 5;
  cfg.t_fom_ms = 5.0;

  const auto table = weight_error_sweep(train, test, cfg);
  REQUIRE(table.rows.size() == 6);
  CHECK(*table.t_fom_ms == 5.0);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const auto rank = [&](roms::Variant v) { return std::find(cfg.variants.begin(), cfg.variants.end(), v); };
    if (i > 0) {
      const auto& prev = table.rows[i - 1];
      CHECK(rank(prev.variant) <= rank(r.variant));
      if (prev.variant == r.variant) CHECK(prev.weights <= r.weights);
    }
    if (r.variant == roms::Variant::kDodDlRom) {
      // n = 3 exceeds N' = 2.
      CHECK_FALSE(r.ok());
      continue;
    }
    INFO(r.failure);
    REQUIRE(r.ok());
    CHECK(r.weights > 0);
    CHECK(std::isfinite(r.e_r));
    REQUIRE(r.t_fwd_ms);
    CHECK(*r.speedup == doctest::Approx(5.0 / *r.t_fwd_ms));
    if (r.variant == roms::Variant::kPodDlRom) CHECK(r.weight_ratio == 1.0);
  }

  const auto path = scratch("sweep.csv").string();
  save_sweep_csv(path, table);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  CHECK(line.rfind("# dodrom-sweep v1", 0) == 0);
  std::getline(is, line);
  CHECK(line == "variant,preset,omega,omega_ratio,E_R,t_fwd_ms,t_fwd_ratio,speedup,epochs,best_val,status,failure");
  int failed = 0, rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    failed += line.find(",failed,") != std::string::npos;
  }
  CHECK(rows == 6);
  CHECK(failed == 2);

  cfg.parallel = true;
  cfg.threads = 3;
  const auto par = weight_error_sweep(train, test, cfg);
  CHECK_FALSE(par.t_fom_ms);
  for (std::size_t i = 0; i < par.rows.size(); ++i) {
    CHECK(par.rows[i].e_r == table.rows[i].e_r);
    CHECK_FALSE(par.rows[i].t_fwd_ms);
  }
}
