#include "dodrom/dod/dod.hpp"

#include "dodrom/autodiff/checkpoint.hpp"
#include "dodrom/io/binary.hpp"
#include "dodrom/io/matrix_store.hpp"
#include "dodrom/reduction/pod.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <filesystem>
#include <sstream>

namespace dodrom::dod {

void DodDims::validate() const {
  if (p < 1 || ell < 1 || n_a < 1 || n_prime < 1) throw std::invalid_argument("DOD dimensions must be positive");
  if (n_prime > n_a) throw std::invalid_argument("DOD needs N' <= N_A");
  for (Index h : seed_hidden) if (h < 1) throw std::invalid_argument("DOD hidden widths must be positive");
  for (Index h : head_hidden) if (h < 1) throw std::invalid_argument("DOD hidden widths must be positive");
}

namespace {

// Unit vector orthogonal to the given rows of `q` (row b of each), from canonical directions.
Eigen::RowVectorXd fallback_direction(const std::vector<Matrix>& q, Index b, Index dim) {
  for (Index k = 0; k < dim; ++k) {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Unit(dim, k);
    for (const auto& qj : q) r -= qj.row(b).dot(r) * qj.row(b);
    const double n = r.norm();
    if (n > 0.5) return r / n;
  }
  throw DegenerateBasis("no fallback direction available");
}

Eigen::VectorXd leading_signs(const Matrix& q) {
  Eigen::VectorXd s = Eigen::VectorXd::Ones(q.rows());
  for (Index b = 0; b < q.rows(); ++b) {
    for (Index c = 0; c < q.cols(); ++c) {
      if (std::abs(q(b, c)) > 1e-12) {
        if (q(b, c) < 0.0) s[b] = -1.0;
        break;
      }
    }
  }
  return s;
}

void report_degenerate(Index column, Index count, const OrthOptions& opt) {
  if (opt.strict) {
    throw DegenerateBasis("column " + std::to_string(column) + " is rank deficient in " +
                          std::to_string(count) + " sample(s)");
  }
  if (opt.counter) *opt.counter += std::size_t(count);
}

}  // namespace

std::vector<Matrix> orthonormalize(const std::vector<Matrix>& w, const OrthOptions& opt) {
  std::vector<Matrix> q;
  for (std::size_t i = 0; i < w.size(); ++i) {
    Matrix v = w[i];
    for (const auto& qj : q) {
      const Eigen::VectorXd c = (qj.array() * v.array()).rowwise().sum();
      v -= c.asDiagonal() * qj;
    }
    Eigen::VectorXd n = v.rowwise().norm();
    Index bad = 0;
    for (Index b = 0; b < v.rows(); ++b) {
      if (n[b] < kDegenerateNorm) {
        ++bad;
        if (!opt.strict) {
          v.row(b) = fallback_direction(q, b, v.cols());
          n[b] = 1.0;
        }
      }
    }
    if (bad > 0) report_degenerate(Index(i), bad, opt);
    v = n.cwiseInverse().asDiagonal() * v;
    v = leading_signs(v).asDiagonal() * v;
    q.push_back(std::move(v));
  }
  return q;
}

std::vector<Var> orthonormalize(Tape& tape, std::span<const Var> w, const OrthOptions& opt) {
  std::vector<Var> q;
  std::vector<Matrix> q_values;
  for (std::size_t i = 0; i < w.size(); ++i) {
    Var v = w[i];
    for (Var qj : q) v = tape.sub(v, tape.mul_col(qj, tape.row_dot(qj, v)));
    Var n = tape.row_norm(v);
    const Matrix& nv = tape.value(n);
    Index bad = 0;
    for (Index b = 0; b < nv.rows(); ++b) bad += nv(b, 0) < kDegenerateNorm;
    if (bad > 0) {
      report_degenerate(Index(i), bad, opt);
      const Index rows = nv.rows();
      const Index dim = tape.value(v).cols();
      Matrix keep = Matrix::Ones(rows, 1);
      Matrix fill = Matrix::Zero(rows, dim);
      for (Index b = 0; b < rows; ++b) {
        if (nv(b, 0) < kDegenerateNorm) {
          keep(b, 0) = 0.0;
          fill.row(b) = fallback_direction(q_values, b, dim);
        }
      }
      v = tape.add(tape.mul_col(v, tape.constant(keep)), tape.constant(fill));
      n = tape.row_norm(v);
    }
    Var u = tape.div_col(v, n);
    const Matrix signs = leading_signs(tape.value(u));
    u = tape.mul_col(u, tape.constant(signs));
    q_values.push_back(tape.value(u));
    q.push_back(u);
  }
  return q;
}

DodModel::DodModel(DodDims dims, Eigen::MatrixXd basis) : dims_(std::move(dims)), basis_(std::move(basis)) {
  dims_.validate();
  if (basis_.cols() != dims_.n_a) throw std::invalid_argument("pre-reduction basis must have N_A columns");
  std::vector<Index> sw{dims_.p + 1};
  sw.insert(sw.end(), dims_.seed_hidden.begin(), dims_.seed_hidden.end());
  sw.push_back(dims_.ell);
  seed_ = Mlp(sw);
  std::vector<Index> hw{dims_.ell};
  hw.insert(hw.end(), dims_.head_hidden.begin(), dims_.head_hidden.end());
  hw.push_back(dims_.n_a);
  for (Index i = 0; i < dims_.n_prime; ++i) heads_.emplace_back(hw);
  inputs = train::MinMax::identity(dims_.p + 1);
}

void DodModel::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  seed_.init(rng);
  for (auto& h : heads_) h.init(rng);
}

std::vector<ParamRef> DodModel::parameters() {
  auto out = seed_.parameters();
  for (auto& h : heads_) {
    auto p = h.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::size_t DodModel::active_weights() const {
  std::size_t n = seed_.active_weights();
  for (const auto& h : heads_) n += h.active_weights();
  return n;
}

std::vector<Matrix> DodModel::inner_columns(const Matrix& raw, const OrthOptions& opt) const {
  const Matrix z = seed_.forward(inputs.transform(raw));
  std::vector<Matrix> w;
  w.reserve(heads_.size());
  for (const auto& h : heads_) w.push_back(h.forward(z));
  return orthonormalize(w, opt);
}

std::vector<Var> DodModel::inner_columns(Tape& tape, Var normalized, const OrthOptions& opt) {
  const Var z = seed_.forward(tape, normalized);
  std::vector<Var> w;
  w.reserve(heads_.size());
  for (auto& h : heads_) w.push_back(h.forward(tape, z));
  return orthonormalize(tape, w, opt);
}

Eigen::MatrixXd DodModel::inner(const Vector& mu, double t) const {
  if (mu.size() != dims_.p) throw ShapeError("DOD: wrong number of geometric parameters");
  Matrix raw(1, dims_.p + 1);
  raw.leftCols(dims_.p) = mu.transpose();
  raw(0, dims_.p) = t;
  const auto cols = inner_columns(raw);
  Eigen::MatrixXd v(dims_.n_a, dims_.n_prime);
  for (Index i = 0; i < dims_.n_prime; ++i) v.col(i) = cols[std::size_t(i)].row(0).transpose();
  return v;
}

Eigen::MatrixXd DodModel::full_basis(const Vector& mu, double t) const { return basis_ * inner(mu, t); }

bool operator==(const DodModel& a, const DodModel& b) {
  return a.dims_.p == b.dims_.p && a.dims_.ell == b.dims_.ell && a.dims_.n_a == b.dims_.n_a &&
         a.dims_.n_prime == b.dims_.n_prime && a.basis_ == b.basis_ && a.seed_ == b.seed_ &&
         a.heads_ == b.heads_ && a.inputs == b.inputs;
}

Matrix trajectory_inputs(const fom::GeomParams& mu, const std::vector<double>& times) {
  Matrix raw(Index(times.size()), 3);
  for (std::size_t k = 0; k < times.size(); ++k) raw.row(Index(k)) << mu.mu1, mu.mu2, times[k];
  return raw;
}

SliceData make_slices(const fom::SnapshotSet& set, const Eigen::MatrixXd& pre) {
  if (!set.is_tensor_product()) throw std::invalid_argument("DOD training needs a tensor-product snapshot set");
  if (pre.cols() != set.n_data()) throw ShapeError("pre-reduced data has the wrong number of columns");
  const Index n_geom = Index(set.geom.size());
  const Index n_phys = Index(set.phys.size());
  const Index rows = n_geom * set.n_t();
  SliceData d;
  d.inputs.resize(rows, 3);
  d.columns.assign(std::size_t(n_phys), Matrix(rows, pre.rows()));
  for (Index i = 0; i < n_geom; ++i) {
    for (Index k = 0; k < set.n_t(); ++k) {
      const Index s = i * set.n_t() + k;
      d.inputs.row(s) << set.geom[std::size_t(i)].mu1, set.geom[std::size_t(i)].mu2, set.times[std::size_t(k)];
      for (Index j = 0; j < n_phys; ++j) d.columns[std::size_t(j)].row(s) = pre.col(set.column(j * n_geom + i, k)).transpose();
      d.geom.push_back(i);
      d.time.push_back(k);
    }
  }
  return d;
}

namespace {

Matrix gather(const Matrix& m, std::span<const Index> rows) {
  Matrix out(Index(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(Index(r)) = m.row(rows[r]);
  return out;
}

}  // namespace

Var dod_loss(Tape& tape, DodModel& model, const SliceData& data, std::span<const Index> rows,
             const OrthOptions& opt) {
  const Var x = tape.constant(model.inputs.transform(gather(data.inputs, rows)));
  const auto q = model.inner_columns(tape, x, opt);
  Var total = tape.constant(0.0);
  for (const auto& cols : data.columns) {
    const Var s = tape.constant(gather(cols, rows));
    Var r = s;
    for (Var qi : q) r = tape.sub(r, tape.mul_col(qi, tape.row_dot(qi, s)));
    total = tape.add(total, tape.sum_squares(r));
  }
  return tape.scale(total, 1.0 / double(rows.size() * data.columns.size()));
}

Vector slice_losses(const DodModel& model, const SliceData& data) {
  const auto q = model.inner_columns(data.inputs);
  Vector out = Vector::Zero(data.rows());
  for (const auto& s : data.columns) {
    Matrix r = s;
    for (const auto& qi : q) {
      const Eigen::VectorXd c = (qi.array() * s.array()).rowwise().sum();
      r -= c.asDiagonal() * qi;
    }
    out += r.rowwise().squaredNorm();
  }
  return out / double(data.n_phys());
}

double dod_loss(const DodModel& model, const SliceData& data, std::span<const Index> rows) {
  const Vector all = slice_losses(model, data);
  double s = 0.0;
  for (Index r : rows) s += all[r];
  return s / double(rows.size());
}

DodTraining train_dod(DodModel& model, const SliceData& data, Index n_geom, const train::TrainConfig& cfg) {
  DodTraining out;
  out.split = train::split_units(n_geom, cfg.alpha, cfg.shuffle_seed);
  std::vector<char> is_train(std::size_t(n_geom), 0);
  for (Index g : out.split.train) is_train[std::size_t(g)] = 1;
  std::vector<Index> train_rows, val_rows;
  for (Index r = 0; r < data.rows(); ++r) (is_train[std::size_t(data.geom[std::size_t(r)])] ? train_rows : val_rows).push_back(r);
  if (val_rows.empty()) val_rows = train_rows;

  model.inputs = train::MinMax::fit(gather(data.inputs, train_rows));
  model.init(cfg.init_seed);
  auto params = model.parameters();
  std::size_t degenerate = 0;
  OrthOptions lenient{false, &degenerate};

  std::vector<Index> batch_rows;
  auto batch_loss = [&](Tape& tape, std::span<const Index> batch) {
    batch_rows.clear();
    for (Index b : batch) batch_rows.push_back(train_rows[std::size_t(b)]);
    return dod_loss(tape, model, data, batch_rows, lenient);
  };
  auto validation = [&] {
    Tape tape;
    return tape.scalar(dod_loss(tape, model, data, val_rows, lenient));
  };
  try {
    out.history = train::run_training(params, Index(train_rows.size()), cfg, batch_loss, validation);
  } catch (train::TrainingDiverged& e) {
    e.history.degenerate_events = degenerate;
    throw;
  }
  out.history.degenerate_events = degenerate;
  return out;
}

FittedDod fit_dod(const fom::SnapshotSet& set, const DodDims& dims, const train::TrainConfig& cfg) {
  const auto a = reduction::pod(set.U, set.mass(), dims.n_a, reduction::normalized_weight(set.n_data()));
  return fit_dod(set, a.modes, dims, cfg);
}

FittedDod fit_dod(const fom::SnapshotSet& set, const Eigen::MatrixXd& basis, const DodDims& dims,
                  const train::TrainConfig& cfg) {
  if (!set.is_tensor_product()) throw std::invalid_argument("DOD training needs a tensor-product snapshot set");
  if (basis.rows() != set.n_h() || basis.cols() != dims.n_a) {
    throw std::invalid_argument("pre-reduction basis does not match N_h x N_A");
  }
  const SliceData slices = make_slices(set, reduction::pre_reduce(set.U, basis, set.mass()));
  FittedDod out{DodModel(dims, basis), {}};
  out.training = train_dod(out.model, slices, Index(set.geom.size()), cfg);
  return out;
}

namespace {

std::string join(const std::vector<Index>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<Index> split_list(const std::string& s) {
  std::vector<Index> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoll(item));
  }
  return out;
}

}  // namespace

void save_dod(const std::string& dir, const DodModel& model) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path d(dir);
  boost::property_tree::ptree pt;
  const auto& dims = model.dims();
  pt.put("dims.p", dims.p);
  pt.put("dims.ell", dims.ell);
  pt.put("dims.n_a", dims.n_a);
  pt.put("dims.n_prime", dims.n_prime);
  pt.put("dims.seed_hidden", join(dims.seed_hidden));
  pt.put("dims.head_hidden", join(dims.head_hidden));
  boost::property_tree::write_ini((d / "dod.ini").string(), pt);
  save_network((d / "seed.net").string(), model.seed_net());
  for (std::size_t i = 0; i < model.heads().size(); ++i) {
    save_network((d / ("head_" + std::to_string(i) + ".net")).string(), model.heads()[i]);
  }
  io::save_matrix((d / "basis.bin").string(), model.basis());
  train::save_scaling((d / "inputs.csv").string(), model.inputs, {"mu1", "mu2", "t"});
}

DodModel load_dod(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path d(dir);
  if (!fs::exists(d / "dod.ini")) throw io::FormatError("no trained DOD in " + dir);
  boost::property_tree::ptree pt;
  boost::property_tree::read_ini((d / "dod.ini").string(), pt);
  DodDims dims;
  dims.p = pt.get<Index>("dims.p");
  dims.ell = pt.get<Index>("dims.ell");
  dims.n_a = pt.get<Index>("dims.n_a");
  dims.n_prime = pt.get<Index>("dims.n_prime");
  dims.seed_hidden = split_list(pt.get<std::string>("dims.seed_hidden"));
  dims.head_hidden = split_list(pt.get<std::string>("dims.head_hidden"));
  DodModel m(dims, io::load_matrix((d / "basis.bin").string()));
  m.seed_net() = load_network((d / "seed.net").string());
  for (Index i = 0; i < dims.n_prime; ++i) {
    m.heads()[std::size_t(i)] = load_network((d / ("head_" + std::to_string(i) + ".net")).string());
  }
  m.inputs = train::load_feature_scaling((d / "inputs.csv").string());
  return m;
}

}  // namespace dodrom::dod
