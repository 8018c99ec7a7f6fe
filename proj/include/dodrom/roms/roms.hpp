#pragma once

#include "dodrom/dod/dod.hpp"
#include "dodrom/reduction/pod.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dodrom::roms {

enum class Variant { kPodDlRom, kDodDfnn, kDodDlRom };
std::string variant_name(Variant v);
Variant parse_variant(const std::string& s);

/// Reduced dimensions: latent n, DOD width N', POD width N, pre-reduction N_A.
struct RomDims {
  Index n = 2;
  Index n_prime = 2;
  Index big_n = 8;
  Index n_a = 10;
};

/// Hidden widths of the parameter network and of the decoder; the encoder mirrors the decoder.
struct Arch {
  std::vector<Index> dfnn_hidden{32, 32};
  std::vector<Index> decoder_hidden{32};
};

inline constexpr Index kInputFeatures = 5;  // mu1, mu2, nu1, nu2, t
const std::vector<std::string>& input_names();

/// Per-feature ranges of (mu, nu, t) and one range for all reduced solution coefficients.
struct Normalizer {
  train::MinMax inputs = train::MinMax::identity(kInputFeatures);
  train::ScalarRange solution{0.0, 1.0};
  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

/// Parameter network plus, for DL-ROMs, decoder and encoder.
struct Networks {
  Mlp dfnn;
  std::optional<Mlp> decoder;
  std::optional<Mlp> encoder;

  /// dfnn: 5 -> hidden -> latent; decoder: latent -> hidden -> out; encoder mirrors it.
  static Networks make(const Arch& arch, Index latent, std::optional<Index> out);
  void init(std::uint64_t seed);
  [[nodiscard]] std::vector<ParamRef> parameters();
  [[nodiscard]] std::size_t active_weights() const;
  /// Normalized inputs to normalized reduced coefficients.
  [[nodiscard]] Matrix predict(const Matrix& x) const;
  friend bool operator==(const Networks&, const Networks&) = default;
};

/// Supervised data: one row per snapshot column.
struct RomData {
  Matrix inputs;   // rows x 5, raw
  Matrix targets;  // rows x dim, raw reduced coefficients
  std::vector<Index> unit;  // trajectory of each row
  Index n_units = 0;
};

/// Raw inputs of every snapshot column in order.
Matrix snapshot_inputs(const fom::SnapshotSet& set);

struct LossParts {
  Var total;
  Var reconstruction;  // 1/2 mean |y - dec(dfnn(x))|^2, or mean |y - dfnn(x)|^2 without decoder
  std::optional<Var> latent;  // 1/2 mean |enc(y) - dfnn(x)|^2
};
/// Records the loss on normalized rows: DL-ROM form omega_h rec + (1 - omega_h) lat, or the
/// plain regression form when there is no decoder.
LossParts rom_loss(Tape& tape, Networks& nets, const Matrix& x, const Matrix& y, double omega_h);

struct FitResult {
  train::TrainHistory history;
  train::Split split;  // over trajectories
  Normalizer normalizer;
};
/// Splits by trajectory, fits the normalizer on training rows (unless `fixed` is given),
/// initialises the networks from cfg.init_seed and trains.
FitResult fit_networks(Networks& nets, const RomData& data, const train::TrainConfig& cfg,
                       const Normalizer* fixed = nullptr);

class Rom {
 public:
  virtual ~Rom() = default;
  [[nodiscard]] virtual Variant variant() const = 0;
  [[nodiscard]] virtual Index n_h() const = 0;
  /// Approximate trajectory (N_h x times) for one parameter tuple.
  [[nodiscard]] virtual Eigen::MatrixXd infer_trajectory(const fom::GeomParams& mu, const fom::PhysParams& nu,
                                                         const std::vector<double>& times) const = 0;
  [[nodiscard]] virtual std::size_t active_weights() const = 0;
  virtual void save(const std::string& dir) const = 0;

  [[nodiscard]] Vector infer(const fom::GeomParams& mu, const fom::PhysParams& nu, double t) const;

  train::TrainHistory history;
  Normalizer normalizer;
  Networks nets;
  double omega_h = 0.5;
  std::uint64_t seed = 0;
  std::uint64_t data_fingerprint = 0;
};

class PodDlRom : public Rom {
 public:
  Eigen::MatrixXd basis;  // A_P, N_h x N
  Vector eigenvalues;
  RomDims dims;

  [[nodiscard]] Variant variant() const override { return Variant::kPodDlRom; }
  [[nodiscard]] Index n_h() const override { return basis.rows(); }
  [[nodiscard]] Eigen::MatrixXd infer_trajectory(const fom::GeomParams& mu, const fom::PhysParams& nu,
                                                 const std::vector<double>& times) const override;
  [[nodiscard]] std::size_t active_weights() const override { return nets.active_weights(); }
  void save(const std::string& dir) const override;
};

/// DOD-based variants share the frozen DOD; the DFNN alone or decoder(DFNN) yields the
/// coefficients in the adaptive basis.
class DodRom : public Rom {
 public:
  DodRom(Variant v, dod::DodModel model) : variant_(v), dod(std::move(model)) {}
  [[nodiscard]] Variant variant() const override { return variant_; }
  [[nodiscard]] Index n_h() const override { return dod.basis().rows(); }
  [[nodiscard]] Eigen::MatrixXd infer_trajectory(const fom::GeomParams& mu, const fom::PhysParams& nu,
                                                 const std::vector<double>& times) const override;
  [[nodiscard]] std::size_t active_weights() const override { return nets.active_weights() + dod.active_weights(); }
  void save(const std::string& dir) const override;

  RomDims dims;

 private:
  Variant variant_;

 public:
  dod::DodModel dod;
};

/// Rows u_red = A_P^T G u of every snapshot.
RomData pod_data(const fom::SnapshotSet& set, const Eigen::MatrixXd& basis);
/// Rows V~_{mu,t}^T A^T G u of every snapshot, evaluated with the frozen DOD.
RomData dod_data(const fom::SnapshotSet& set, const dod::DodModel& model);

std::unique_ptr<PodDlRom> train_pod_dl_rom(const fom::SnapshotSet& set, const RomDims& dims, const Arch& arch,
                                           const train::TrainConfig& cfg);
std::unique_ptr<DodRom> train_dod_dfnn(const fom::SnapshotSet& set, const dod::DodModel& model,
                                       const RomDims& dims, const Arch& arch, const train::TrainConfig& cfg);
std::unique_ptr<DodRom> train_dod_dl_rom(const fom::SnapshotSet& set, const dod::DodModel& model,
                                         const RomDims& dims, const Arch& arch, const train::TrainConfig& cfg);

/// Model bundle directory: manifest.ini, networks, normalizer.csv and the basis (POD) or the
/// DOD bundle in dod/.
std::unique_ptr<Rom> load_rom(const std::string& dir);

}  // namespace dodrom::roms
