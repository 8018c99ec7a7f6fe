#include "dodrom/pipeline/commands.hpp"

#include "dodrom/autodiff/checkpoint.hpp"
#include "dodrom/io/binary.hpp"
#include "dodrom/io/matrix_store.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <array>
#include <fstream>
#include <sstream>

namespace dodrom::pipeline {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

constexpr const char* kProvenance = "provenance.ini";

std::string fmt(double v) { return io::format_double(v); }

fom::SnapshotSet load_store(const std::string& base, const char* what) {
  if (!fs::exists(base + ".bin")) {
    throw DataError(std::string("no ") + what + " snapshot store at " + base + ": run `generate` first");
  }
  return fom::load_snapshots(base);
}

void check_grid(const RunConfig& cfg, const fom::SnapshotSet& set) {
  if (set.grid.nx() != cfg.benchmark.nx || set.grid.ny() != cfg.benchmark.ny) {
    throw DataError("snapshot store grid differs from the config: rerun `generate`");
  }
}

void write_provenance(const fs::path& dir, std::uint64_t fingerprint) {
  pt::ptree tree;
  tree.put("source.data_fingerprint", io::hex64(fingerprint));
  pt::write_ini((dir / kProvenance).string(), tree);
}

void check_provenance(const fs::path& dir, std::uint64_t fingerprint, const std::string& stage) {
  pt::ptree tree;
  try {
    pt::read_ini((dir / kProvenance).string(), tree);
  } catch (const pt::ini_parser_error&) {
    throw DataError("missing provenance in " + dir.string() + ": rerun `" + stage + "`");
  }
  const std::string recorded = tree.get<std::string>("source.data_fingerprint", "");
  if (recorded != io::hex64(fingerprint)) {
    throw DataError(dir.string() + " was built from snapshot store " + recorded + " but the current store is " +
                    io::hex64(fingerprint) + ": rerun `" + stage + "`");
  }
}

void save_history(const std::string& path, const train::TrainHistory& h) {
  std::vector<std::vector<double>> rows;
  for (int e = 0; e < h.epochs(); ++e) {
    rows.push_back({double(e), h.train_loss[std::size_t(e)], h.val_loss[std::size_t(e)], h.lr[std::size_t(e)]});
  }
  io::save_csv(path, {"epoch", "train_loss", "val_loss", "lr"}, rows);
}

dod::DodModel load_trained_dod(const RunConfig& cfg, const Layout& layout, std::uint64_t fingerprint,
                               const std::string& requester) {
  if (!fs::exists(layout.dod_dir() / "dod.ini")) {
    throw DataError(requester + " needs a trained DOD (serial training): run `train-dod` first");
  }
  check_provenance(layout.dod_dir(), fingerprint, "train-dod");
  auto model = dod::load_dod(layout.dod_dir().string());
  const auto& d = model.dims();
  if (d.n_a != cfg.dims.n_a || d.n_prime != cfg.dims.n_prime) {
    throw DataError("trained DOD dimensions differ from the config: rerun `train-dod`");
  }
  return model;
}

template <class F>
auto guarded_training(F&& f) {
  try {
    return f();
  } catch (const train::TrainingDiverged& e) {
    throw TrainingFailure(std::string("training diverged: ") + e.what());
  } catch (const dod::DegenerateBasis& e) {
    throw TrainingFailure(std::string("degenerate DOD basis: ") + e.what());
  }
}

std::string history_tail(const train::TrainHistory& h) {
  std::ostringstream os;
  os << h.epochs() << " epochs, best validation " << fmt(h.best_val) << " at epoch " << h.best_epoch;
  if (h.early_stopped) os << " (early stop)";
  return os.str();
}

}  // namespace

std::string cmd_generate(const RunConfig& cfg, const Layout& layout) {
  fs::create_directories(fs::path(layout.train_store()).parent_path());
  const auto train = fom::generate_snapshots(cfg.benchmark);
  fom::save_snapshots(layout.train_store(), train);
  const auto test = fom::generate_test_set(cfg.benchmark, cfg.n_test, cfg.test_seed);
  fom::save_snapshots(layout.test_store(), test);
  std::ostringstream os;
  os << "generate: " << train.n_h() << " x " << train.n_data() << " training snapshots (" << train.n_traj()
     << " trajectories), " << test.n_traj() << " test trajectories, fingerprint "
     << io::hex64(fom::snapshot_fingerprint(layout.train_store()));
  return os.str();
}

std::string cmd_pod(const RunConfig& cfg, const Layout& layout) {
  const auto set = load_store(layout.train_store(), "training");
  check_grid(cfg, set);
  const auto basis = reduction::pod(set.U, set.mass(), cfg.dims.n_a, reduction::normalized_weight(set.n_data()));
  fs::create_directories(layout.pod_dir());
  reduction::save_basis(layout.pod_basis(), basis);
  write_provenance(layout.pod_dir(), fom::snapshot_fingerprint(layout.train_store()));
  const double total = basis.eigenvalues.sum();
  std::ostringstream os;
  os << "pod: " << cfg.dims.n_a << " modes, relative eigenvalue tail "
     << fmt(total > 0.0 ? reduction::eigen_tail(basis.eigenvalues, cfg.dims.n_a) / total : 0.0);
  return os.str();
}

std::string cmd_train_dod(const RunConfig& cfg, const Layout& layout) {
  const auto set = load_store(layout.train_store(), "training");
  check_grid(cfg, set);
  const auto fingerprint = fom::snapshot_fingerprint(layout.train_store());
  if (!fs::exists(layout.pod_basis() + ".bin")) {
    throw DataError("train-dod needs the pre-reduction basis: run `pod` first");
  }
  check_provenance(layout.pod_dir(), fingerprint, "pod");
  const auto basis = reduction::load_basis(layout.pod_basis());
  if (basis.modes.cols() != cfg.dims.n_a) throw DataError("pre-reduction basis has a different N_A: rerun `pod`");
  const auto fitted = guarded_training([&] { return dod::fit_dod(set, basis.modes, cfg.dod_dims(), cfg.dod_training); });
  fs::remove_all(layout.dod_dir());
  dod::save_dod(layout.dod_dir().string(), fitted.model);
  save_history((layout.dod_dir() / "history.csv").string(), fitted.training.history);
  write_provenance(layout.dod_dir(), fingerprint);
  return "train-dod: " + std::to_string(fitted.model.active_weights()) + " active weights, " +
         history_tail(fitted.training.history);
}

std::string cmd_train_rom(const RunConfig& cfg, const Layout& layout, roms::Variant variant) {
  const auto set = load_store(layout.train_store(), "training");
  check_grid(cfg, set);
  const auto fingerprint = fom::snapshot_fingerprint(layout.train_store());
  const std::string name = roms::variant_name(variant);
  std::unique_ptr<roms::Rom> rom;
  if (variant == roms::Variant::kPodDlRom) {
    rom = guarded_training([&] { return roms::train_pod_dl_rom(set, cfg.dims, cfg.model.rom, cfg.training); });
  } else {
    const auto model = load_trained_dod(cfg, layout, fingerprint, "train-rom --variant " + name);
    rom = guarded_training([&]() -> std::unique_ptr<roms::Rom> {
      if (variant == roms::Variant::kDodDfnn) return roms::train_dod_dfnn(set, model, cfg.dims, cfg.model.rom, cfg.training);
      return roms::train_dod_dl_rom(set, model, cfg.dims, cfg.model.rom, cfg.training);
    });
  }
  rom->data_fingerprint = fingerprint;
  const fs::path dir = layout.model_dir(variant);
  fs::remove_all(dir);
  rom->save(dir.string());
  return "train-rom " + name + ": " + std::to_string(rom->active_weights()) + " active weights, " +
         history_tail(rom->history);
}

std::string cmd_evaluate(const RunConfig& cfg, const Layout& layout, const EvaluateOptions& options) {
  const auto test = load_store(layout.test_store(), "test");
  check_grid(cfg, test);
  const auto train_fp = fom::snapshot_fingerprint(layout.train_store());
  const auto test_fp = fom::snapshot_fingerprint(layout.test_store());

  std::vector<roms::Variant> variants = options.variants;
  const bool explicit_list = !variants.empty();
  if (!explicit_list) {
    for (auto v : {roms::Variant::kPodDlRom, roms::Variant::kDodDfnn, roms::Variant::kDodDlRom}) {
      if (fs::exists(layout.model_dir(v) / "manifest.ini")) variants.push_back(v);
    }
    if (variants.empty()) throw DataError("no trained models in " + (layout.root / "models").string() + ": run `train-rom`");
  }

  fs::create_directories(layout.reports());
  eval::EvalOptions opt;
  opt.timing = options.timing;
  opt.reps = cfg.timing_reps;
  opt.fom_seed = cfg.fom_seed;
  opt.test_fingerprint = test_fp;
  if (options.timing) opt.t_fom_ms = eval::fom_reference_time(test, cfg.fom_seed, cfg.timing_reps).median_ms;

  std::ostringstream os;
  os << "evaluate:";
  for (auto v : variants) {
    const fs::path dir = layout.model_dir(v);
    if (!fs::exists(dir / "manifest.ini")) {
      throw DataError("no trained " + roms::variant_name(v) + " model: run `train-rom --variant " + roms::variant_name(v) + "`");
    }
    const auto rom = roms::load_rom(dir.string());
    if (rom->data_fingerprint != train_fp) {
      throw DataError(roms::variant_name(v) + " was trained on snapshot store " + io::hex64(rom->data_fingerprint) +
                      " but the training store is " + io::hex64(train_fp) + ": retrain it");
    }
    eval::EvalReport report;
    try {
      report = eval::evaluate(*rom, test, opt);
    } catch (const eval::EvalError& e) {
      throw DataError(e.what());
    }
    eval::save_eval_report((layout.reports() / roms::variant_name(v)).string(), report);
    os << " " << roms::variant_name(v) << " E_R=" << fmt(report.errors.e_r);
    if (report.forward) os << " speedup=" << fmt(std::round(report.speedup * 10.0) / 10.0);
  }

  // Best reachable error of the DOD basis against POD with the same number of modes.
  if (fs::exists(layout.dod_dir() / "dod.ini") && fs::exists(layout.pod_basis() + ".bin")) {
    check_provenance(layout.dod_dir(), train_fp, "train-dod");
    const auto model = dod::load_dod(layout.dod_dir().string());
    const auto pod = reduction::load_basis(layout.pod_basis());
    const Index n = model.dims().n_prime;
    const double e_dod = eval::dod_projection_error(model, test).e_r;
    const double e_pod = eval::basis_projection_error(pod.modes.leftCols(n), test).e_r;
    io::save_csv((layout.reports() / "projection.csv").string(), {"basis", "dimension", "E_R"},
                 {{0.0, double(n), e_dod}, {1.0, double(n), e_pod}}, "basis 0 = DOD V_{mu,t}, 1 = POD");
    os << " | projection DOD " << fmt(e_dod) << " POD " << fmt(e_pod);
  }
  return os.str();
}

std::string cmd_sweep(const RunConfig& cfg, const Layout& layout, const SweepOptions& options) {
  const auto train = load_store(layout.train_store(), "training");
  const auto test = load_store(layout.test_store(), "test");
  check_grid(cfg, train);
  auto sc = cfg.sweep_config();
  sc.parallel = options.parallel;
  sc.threads = options.threads;
  const auto table = eval::weight_error_sweep(train, test, sc);
  fs::create_directories(layout.reports());
  eval::save_sweep_csv((layout.reports() / "sweep.csv").string(), table);
  std::size_t failed = 0;
  for (const auto& r : table.rows) failed += !r.ok();
  std::ostringstream os;
  os << "sweep: " << table.rows.size() << " cells, " << failed << " failed";
  if (failed) throw TrainingFailure(os.str() + " (see " + (layout.reports() / "sweep.csv").string() + ")");
  return os.str();
}

std::string cmd_knw(const RunConfig& cfg, const Layout& layout, Index n_max) {
  const auto set = load_store(layout.train_store(), "training");
  check_grid(cfg, set);
  if (!set.is_tensor_product()) throw DataError("knw needs the tensor-product training store");
  if (n_max <= 0) n_max = std::min(cfg.dims.n_a, cfg.benchmark.n_phys);
  if (n_max > cfg.benchmark.n_phys) throw ConfigError("knw --n-max cannot exceed the number of physical samples");
  const auto rows = reduction::knw_curves(set, cfg.dims.n_a, n_max);
  fs::create_directories(layout.reports());
  reduction::save_knw_csv((layout.reports() / "knw.csv").string(), rows);
  std::ostringstream os;
  os << "knw: " << rows.size() << " rows";
  return os.str();
}

std::string cmd_export(const std::string& input, const std::string& output) {
  std::ifstream is(input, std::ios::binary);
  if (!is) throw DataError("cannot read " + input);
  std::array<char, 8> magic{};
  is.read(magic.data(), 8);
  is.close();
  const std::string tag(magic.data(), 5);
  if (tag == "DRMAT") {
    const auto m = io::load_matrix(input);
    std::vector<std::string> header;
    for (Index c = 0; c < m.cols(); ++c) header.push_back("c" + std::to_string(c));
    std::vector<std::vector<double>> rows(std::size_t(m.rows()));
    for (Index r = 0; r < m.rows(); ++r) rows[std::size_t(r)] = std::vector<double>(m.row(r).begin(), m.row(r).end());
    io::save_csv(output, header, rows);
    return "export: " + std::to_string(m.rows()) + " x " + std::to_string(m.cols()) + " matrix -> " + output;
  }
  if (tag == "DRNET") {
    const Mlp net = load_network(input);
    std::vector<std::vector<double>> rows;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      const auto& layer = net.layers()[l];
      for (Index i = 0; i < layer.weight.values.rows(); ++i)
        for (Index j = 0; j < layer.weight.values.cols(); ++j) rows.push_back({double(l), 0.0, double(i), double(j), layer.weight.values(i, j)});
      for (Index j = 0; j < layer.bias.values.cols(); ++j) rows.push_back({double(l), 1.0, 0.0, double(j), layer.bias.values(0, j)});
    }
    io::save_csv(output, {"layer", "kind", "row", "col", "value"}, rows, "kind 0 = weight, 1 = bias");
    return "export: network with " + std::to_string(net.layers().size()) + " layers -> " + output;
  }
  throw DataError(input + " is neither a matrix store nor a network checkpoint");
}

int run_command(const std::function<std::string()>& body, std::ostream& out, std::ostream& err) {
  try {
    out << body() << std::endl;
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const TrainingFailure& e) {
    err << "training failure: " << e.what() << std::endl;
    return kExitTraining;
  } catch (const train::TrainingDiverged& e) {
    err << "training failure: " << e.what() << std::endl;
    return kExitTraining;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << std::endl;
    return kExitData;
  }
}

}  // namespace dodrom::pipeline
