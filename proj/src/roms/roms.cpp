#include "dodrom/roms/roms.hpp"

#include "dodrom/autodiff/checkpoint.hpp"
#include "dodrom/io/binary.hpp"
#include "dodrom/io/matrix_store.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <fstream>

namespace dodrom::roms {

namespace fs = std::filesystem;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kPodDlRom: return "pod-dl-rom";
    case Variant::kDodDfnn: return "dod-dfnn";
    case Variant::kDodDlRom: return "dod-dl-rom";
  }
  return "unknown";
}

Variant parse_variant(const std::string& s) {
  if (s == "pod-dl-rom") return Variant::kPodDlRom;
  if (s == "dod-dfnn") return Variant::kDodDfnn;
  if (s == "dod-dl-rom") return Variant::kDodDlRom;
  throw std::invalid_argument("unknown ROM variant '" + s + "' (pod-dl-rom, dod-dfnn, dod-dl-rom)");
}

const std::vector<std::string>& input_names() {
  static const std::vector<std::string> names{"mu1", "mu2", "nu1", "nu2", "t"};
  return names;
}

Networks Networks::make(const Arch& arch, Index latent, std::optional<Index> out) {
  Networks n;
  std::vector<Index> w{kInputFeatures};
  w.insert(w.end(), arch.dfnn_hidden.begin(), arch.dfnn_hidden.end());
  w.push_back(latent);
  n.dfnn = Mlp(w);
  if (out) {
    std::vector<Index> d{latent};
    d.insert(d.end(), arch.decoder_hidden.begin(), arch.decoder_hidden.end());
    d.push_back(*out);
    n.decoder = Mlp(d);
    std::vector<Index> e(d.rbegin(), d.rend());
    n.encoder = Mlp(e);
  }
  return n;
}

void Networks::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  dfnn.init(rng);
  if (decoder) decoder->init(rng);
  if (encoder) encoder->init(rng);
}

std::vector<ParamRef> Networks::parameters() {
  auto out = dfnn.parameters();
  for (auto* net : {decoder ? &*decoder : nullptr, encoder ? &*encoder : nullptr}) {
    if (!net) continue;
    auto p = net->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::size_t Networks::active_weights() const {
  std::size_t n = dfnn.active_weights();
  if (decoder) n += decoder->active_weights();
  if (encoder) n += encoder->active_weights();
  return n;
}

Matrix Networks::predict(const Matrix& x) const {
  Matrix z = dfnn.forward(x);
  return decoder ? decoder->forward(z) : z;
}

Matrix snapshot_inputs(const fom::SnapshotSet& set) {
  Matrix x(set.n_data(), kInputFeatures);
  for (Index r = 0; r < set.n_traj(); ++r) {
    const auto& ref = set.trajectories[std::size_t(r)];
    const auto& mu = set.geom[std::size_t(ref.geom)];
    const auto& nu = set.phys[std::size_t(ref.phys)];
    for (Index k = 0; k < set.n_t(); ++k) {
      x.row(set.column(r, k)) << mu.mu1, mu.mu2, nu.nu1, nu.nu2, set.times[std::size_t(k)];
    }
  }
  return x;
}

LossParts rom_loss(Tape& tape, Networks& nets, const Matrix& x, const Matrix& y, double omega_h) {
  const double inv = 1.0 / double(x.rows());
  const Var xv = tape.constant(x);
  const Var yv = tape.constant(y);
  const Var z = nets.dfnn.forward(tape, xv);
  LossParts out;
  if (!nets.decoder) {
    out.reconstruction = tape.scale(tape.sum_squares(tape.sub(yv, z)), inv);
    out.total = out.reconstruction;
    return out;
  }
  const Var y_hat = nets.decoder->forward(tape, z);
  out.reconstruction = tape.scale(tape.sum_squares(tape.sub(yv, y_hat)), 0.5 * inv);
  const Var z_enc = nets.encoder->forward(tape, yv);
  out.latent = tape.scale(tape.sum_squares(tape.sub(z_enc, z)), 0.5 * inv);
  out.total = tape.add(tape.scale(out.reconstruction, omega_h), tape.scale(*out.latent, 1.0 - omega_h));
  return out;
}

namespace {

Matrix gather(const Matrix& m, std::span<const Index> rows) {
  Matrix out(Index(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(Index(r)) = m.row(rows[r]);
  return out;
}

}  // namespace

FitResult fit_networks(Networks& nets, const RomData& data, const train::TrainConfig& cfg, const Normalizer* fixed) {
  if (data.inputs.rows() != data.targets.rows() || Index(data.unit.size()) != data.inputs.rows()) {
    throw ShapeError("ROM data rows are inconsistent");
  }
  if (!(cfg.omega_h >= 0.0 && cfg.omega_h <= 1.0)) throw std::invalid_argument("omega_h must lie in [0, 1]");
  FitResult out;
  out.split = train::split_units(data.n_units, cfg.alpha, cfg.shuffle_seed);
  std::vector<char> is_train(std::size_t(data.n_units), 0);
  for (Index u : out.split.train) is_train[std::size_t(u)] = 1;
  std::vector<Index> train_rows, val_rows;
  for (Index r = 0; r < data.inputs.rows(); ++r) {
    (is_train[std::size_t(data.unit[std::size_t(r)])] ? train_rows : val_rows).push_back(r);
  }
  if (val_rows.empty()) val_rows = train_rows;

  if (fixed) {
    out.normalizer = *fixed;
  } else {
    out.normalizer.inputs = train::MinMax::fit(gather(data.inputs, train_rows));
    out.normalizer.solution = train::ScalarRange::fit(gather(data.targets, train_rows));
  }
  const Matrix x = out.normalizer.inputs.transform(data.inputs);
  const Matrix y = out.normalizer.solution.transform(data.targets);
  const Matrix x_val = gather(x, val_rows);
  const Matrix y_val = gather(y, val_rows);

  nets.init(cfg.init_seed);
  auto params = nets.parameters();
  std::vector<Index> rows;
  auto batch_loss = [&](Tape& tape, std::span<const Index> batch) {
    rows.clear();
    for (Index b : batch) rows.push_back(train_rows[std::size_t(b)]);
    return rom_loss(tape, nets, gather(x, rows), gather(y, rows), cfg.omega_h).total;
  };
  auto validation = [&] {
    Tape tape;
    return tape.scalar(rom_loss(tape, nets, x_val, y_val, cfg.omega_h).total);
  };
  out.history = train::run_training(params, Index(train_rows.size()), cfg, batch_loss, validation);
  return out;
}

Vector Rom::infer(const fom::GeomParams& mu, const fom::PhysParams& nu, double t) const {
  return infer_trajectory(mu, nu, {t}).col(0);
}

namespace {

Matrix rom_inputs(const fom::GeomParams& mu, const fom::PhysParams& nu, const std::vector<double>& times) {
  Matrix x(Index(times.size()), kInputFeatures);
  for (std::size_t k = 0; k < times.size(); ++k) x.row(Index(k)) << mu.mu1, mu.mu2, nu.nu1, nu.nu2, times[k];
  return x;
}

Matrix coefficients(const Rom& rom, const fom::GeomParams& mu, const fom::PhysParams& nu,
                    const std::vector<double>& times) {
  return rom.normalizer.solution.inverse(rom.nets.predict(rom.normalizer.inputs.transform(rom_inputs(mu, nu, times))));
}

}  // namespace

Eigen::MatrixXd PodDlRom::infer_trajectory(const fom::GeomParams& mu, const fom::PhysParams& nu,
                                           const std::vector<double>& times) const {
  return basis * coefficients(*this, mu, nu, times).transpose();
}

Eigen::MatrixXd DodRom::infer_trajectory(const fom::GeomParams& mu, const fom::PhysParams& nu,
                                         const std::vector<double>& times) const {
  const Matrix c = coefficients(*this, mu, nu, times);
  const auto q = dod.inner_columns(dod::trajectory_inputs(mu, times));
  Matrix pre = Matrix::Zero(c.rows(), dod.dims().n_a);
  for (std::size_t i = 0; i < q.size(); ++i) pre += c.col(Index(i)).asDiagonal() * q[i];
  return dod.basis() * pre.transpose();
}

RomData pod_data(const fom::SnapshotSet& set, const Eigen::MatrixXd& basis) {
  RomData d;
  d.inputs = snapshot_inputs(set);
  d.targets = reduction::pre_reduce(set.U, basis, set.mass()).transpose();
  for (Index r = 0; r < set.n_traj(); ++r) d.unit.insert(d.unit.end(), std::size_t(set.n_t()), r);
  d.n_units = set.n_traj();
  return d;
}

RomData dod_data(const fom::SnapshotSet& set, const dod::DodModel& model) {
  if (model.basis().rows() != set.n_h()) throw ShapeError("DOD basis does not match the snapshot grid");
  const Eigen::MatrixXd pre = reduction::pre_reduce(set.U, model.basis(), set.mass());
  RomData d;
  d.inputs = snapshot_inputs(set);
  d.targets.resize(set.n_data(), model.dims().n_prime);
  for (Index r = 0; r < set.n_traj(); ++r) {
    const auto& mu = set.geom[std::size_t(set.trajectories[std::size_t(r)].geom)];
    const auto q = model.inner_columns(dod::trajectory_inputs(mu, set.times));
    for (Index k = 0; k < set.n_t(); ++k) {
      const Index c = set.column(r, k);
      for (std::size_t i = 0; i < q.size(); ++i) d.targets(c, Index(i)) = q[i].row(k).dot(pre.col(c));
    }
    d.unit.insert(d.unit.end(), std::size_t(set.n_t()), r);
  }
  d.n_units = set.n_traj();
  return d;
}

namespace {

void check_positive(const RomDims& dims) {
  if (dims.n < 1 || dims.n_prime < 1 || dims.big_n < 1 || dims.n_a < 1) {
    throw std::invalid_argument("reduced dimensions must be positive");
  }
}

void adopt(Rom& rom, FitResult&& fit, const train::TrainConfig& cfg) {
  rom.history = std::move(fit.history);
  rom.normalizer = fit.normalizer;
  rom.omega_h = cfg.omega_h;
  rom.seed = cfg.init_seed;
}

void check_dod(const dod::DodModel& model, const RomDims& dims, const fom::SnapshotSet& set) {
  if (model.dims().n_prime != dims.n_prime) throw std::invalid_argument("DOD width differs from N'");
  if (model.dims().n_a != dims.n_a) throw std::invalid_argument("DOD pre-reduction differs from N_A");
  if (model.basis().rows() != set.n_h()) throw std::invalid_argument("DOD basis does not match the snapshot grid");
}

}  // namespace

std::unique_ptr<PodDlRom> train_pod_dl_rom(const fom::SnapshotSet& set, const RomDims& dims, const Arch& arch,
                                           const train::TrainConfig& cfg) {
  check_positive(dims);
  if (dims.n > dims.big_n) throw std::invalid_argument("POD-DL-ROM needs n <= N");
  auto rom = std::make_unique<PodDlRom>();
  rom->dims = dims;
  const auto pod = reduction::pod(set.U, set.mass(), dims.big_n, reduction::normalized_weight(set.n_data()));
  rom->basis = pod.modes;
  rom->eigenvalues = pod.eigenvalues;
  rom->nets = Networks::make(arch, dims.n, dims.big_n);
  adopt(*rom, fit_networks(rom->nets, pod_data(set, rom->basis), cfg), cfg);
  return rom;
}

std::unique_ptr<DodRom> train_dod_dfnn(const fom::SnapshotSet& set, const dod::DodModel& model,
                                       const RomDims& dims, const Arch& arch, const train::TrainConfig& cfg) {
  check_positive(dims);
  check_dod(model, dims, set);
  auto rom = std::make_unique<DodRom>(Variant::kDodDfnn, model);
  rom->dims = dims;
  rom->nets = Networks::make(arch, dims.n_prime, std::nullopt);
  adopt(*rom, fit_networks(rom->nets, dod_data(set, model), cfg), cfg);
  return rom;
}

std::unique_ptr<DodRom> train_dod_dl_rom(const fom::SnapshotSet& set, const dod::DodModel& model,
                                         const RomDims& dims, const Arch& arch, const train::TrainConfig& cfg) {
  check_positive(dims);
  check_dod(model, dims, set);
  if (dims.n > dims.n_prime) throw std::invalid_argument("DOD-DL-ROM needs n <= N'");
  auto rom = std::make_unique<DodRom>(Variant::kDodDlRom, model);
  rom->dims = dims;
  rom->nets = Networks::make(arch, dims.n, dims.n_prime);
  adopt(*rom, fit_networks(rom->nets, dod_data(set, model), cfg), cfg);
  return rom;
}

namespace {

void save_common(const Rom& rom, const RomDims& dims, const fs::path& d) {
  fs::create_directories(d);
  boost::property_tree::ptree pt;
  pt.put("model.variant", variant_name(rom.variant()));
  pt.put("model.omega_h", io::format_double(rom.omega_h));
  pt.put("model.seed", rom.seed);
  pt.put("model.data_fingerprint", io::hex64(rom.data_fingerprint));
  pt.put("model.active_weights", rom.active_weights());
  pt.put("dims.n", dims.n);
  pt.put("dims.n_prime", dims.n_prime);
  pt.put("dims.big_n", dims.big_n);
  pt.put("dims.n_a", dims.n_a);
  boost::property_tree::write_ini((d / "manifest.ini").string(), pt);
  save_network((d / "dfnn.net").string(), rom.nets.dfnn);
  if (rom.nets.decoder) save_network((d / "decoder.net").string(), *rom.nets.decoder);
  if (rom.nets.encoder) save_network((d / "encoder.net").string(), *rom.nets.encoder);
  train::save_scaling((d / "normalizer.csv").string(), rom.normalizer.inputs, input_names(),
                      &rom.normalizer.solution);
  std::vector<std::vector<double>> rows;
  for (int e = 0; e < rom.history.epochs(); ++e) {
    rows.push_back({double(e), rom.history.train_loss[std::size_t(e)], rom.history.val_loss[std::size_t(e)],
                    rom.history.lr[std::size_t(e)]});
  }
  io::save_csv((d / "history.csv").string(), {"epoch", "train_loss", "val_loss", "lr"}, rows);
}

void load_common(Rom& rom, RomDims& dims, const fs::path& d, const boost::property_tree::ptree& pt) {
  rom.omega_h = pt.get<double>("model.omega_h");
  rom.seed = pt.get<std::uint64_t>("model.seed");
  rom.data_fingerprint = std::stoull(pt.get<std::string>("model.data_fingerprint"), nullptr, 16);
  dims.n = pt.get<Index>("dims.n");
  dims.n_prime = pt.get<Index>("dims.n_prime");
  dims.big_n = pt.get<Index>("dims.big_n");
  dims.n_a = pt.get<Index>("dims.n_a");
  rom.nets.dfnn = load_network((d / "dfnn.net").string());
  if (fs::exists(d / "decoder.net")) rom.nets.decoder = load_network((d / "decoder.net").string());
  if (fs::exists(d / "encoder.net")) rom.nets.encoder = load_network((d / "encoder.net").string());
  rom.normalizer.inputs = train::load_feature_scaling((d / "normalizer.csv").string(), &rom.normalizer.solution);
  const auto table = io::load_csv((d / "history.csv").string());
  for (const auto& row : table.rows) {
    if (row.size() != 4) throw io::FormatError("history row has wrong arity");
    rom.history.train_loss.push_back(std::stod(row[1]));
    rom.history.val_loss.push_back(std::stod(row[2]));
    rom.history.lr.push_back(std::stod(row[3]));
  }
}

}  // namespace

void PodDlRom::save(const std::string& dir) const {
  save_common(*this, dims, dir);
  reduction::PodBasis b;
  b.modes = basis;
  b.eigenvalues = eigenvalues;
  b.weight = 1.0;
  reduction::save_basis((fs::path(dir) / "pod").string(), b);
}

void DodRom::save(const std::string& dir) const {
  save_common(*this, dims, dir);
  dod::save_dod((fs::path(dir) / "dod").string(), dod);
}

std::unique_ptr<Rom> load_rom(const std::string& dir) {
  const fs::path d(dir);
  if (!fs::exists(d / "manifest.ini")) throw io::FormatError("no model manifest in " + dir);
  boost::property_tree::ptree pt;
  boost::property_tree::read_ini((d / "manifest.ini").string(), pt);
  const Variant v = parse_variant(pt.get<std::string>("model.variant"));
  if (v == Variant::kPodDlRom) {
    auto rom = std::make_unique<PodDlRom>();
    load_common(*rom, rom->dims, d, pt);
    const auto b = reduction::load_basis((d / "pod").string());
    rom->basis = b.modes;
    rom->eigenvalues = b.eigenvalues;
    return rom;
  }
  auto rom = std::make_unique<DodRom>(v, dod::load_dod((d / "dod").string()));
  load_common(*rom, rom->dims, d, pt);
  return rom;
}

}  // namespace dodrom::roms
