#include <doctest.h>

#include "dodrom/dod/dod.hpp"
#include "dodrom/reduction/pod.hpp"
#include "support/finite_difference.hpp"
#include "support/primitive_cases.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace dodrom;
using namespace dodrom::dod;
using dodrom::testing::random_matrix;

namespace {

double orth_defect(const Eigen::MatrixXd& v) {
  return (v.transpose() * v - Eigen::MatrixXd::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff();
}

DodDims tiny_dims(Index n_a, Index n_prime) {
  DodDims d;
  d.n_a = n_a;
  d.n_prime = n_prime;
  d.ell = 4;
  d.seed_hidden = {8};
  d.head_hidden = {8};
  return d;
}

Eigen::MatrixXd identity_basis(Index n_h, Index n_a) { return Eigen::MatrixXd::Identity(n_h, n_a); }

// Slices on a geometry x time grid whose samples lie in plane(t) = R(angle t) [e1, e2].
SliceData plane_data(Index n_geom, Index n_t, Index n_phys, Index n_a, double angle, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  SliceData d;
  const Index rows = n_geom * n_t;
  d.inputs.resize(rows, 3);
  d.columns.assign(std::size_t(n_phys), Matrix::Zero(rows, n_a));
  for (Index i = 0; i < n_geom; ++i) {
    const double mu1 = 0.1 + 0.2 * uniform01(rng);
    const double mu2 = -0.7 + 1.4 * uniform01(rng);
    for (Index k = 0; k < n_t; ++k) {
      const Index s = i * n_t + k;
      const double t = double(k + 1) / double(n_t);
      d.inputs.row(s) << mu1, mu2, t;
      const double c = std::cos(angle * t), sn = std::sin(angle * t);
      for (Index j = 0; j < n_phys; ++j) {
        const double a = nd(rng), b = nd(rng);
        auto row = d.columns[std::size_t(j)].row(s);
        row[0] = a * c;
        row[2] = a * sn;
        row[1] = b * c;
        row[3] = b * sn;
      }
      d.geom.push_back(i);
      d.time.push_back(k);
    }
  }
  return d;
}

train::TrainConfig synthetic_config() {
  train::TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.weight_decay = 0.0;
  cfg.batch_size = 2;
  cfg.max_epochs = 3000;
  cfg.plateau.patience = 30;
  return cfg;
}

}  // namespace

TEST_CASE("orthonormalization keeps orthonormal input") {
  std::mt19937_64 rng(1);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, 6, 3));
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(6, 3);
  for (Index c = 0; c < 3; ++c) if (q(0, c) < 0) q.col(c) *= -1.0;
  std::vector<Matrix> w;
  for (Index c = 0; c < 3; ++c) w.push_back(q.col(c).transpose());
  const auto v = orthonormalize(w);
  for (Index c = 0; c < 3; ++c) CHECK((v[std::size_t(c)] - w[std::size_t(c)]).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("orthonormalization of random batches") {
  std::mt19937_64 rng(2);
  const Index b = 50, n_a = 7, n_prime = 3;
  std::vector<Matrix> w;
  for (Index i = 0; i < n_prime; ++i) w.push_back(random_matrix(rng, b, n_a));
  const auto q = orthonormalize(w);
  for (Index r = 0; r < b; ++r) {
    Eigen::MatrixXd v(n_a, n_prime), wm(n_a, n_prime);
    for (Index i = 0; i < n_prime; ++i) {
      v.col(i) = q[std::size_t(i)].row(r).transpose();
      wm.col(i) = w[std::size_t(i)].row(r).transpose();
      Index lead = 0;
      while (std::abs(v(lead, i)) <= 1e-12) ++lead;
      CHECK(v(lead, i) > 0.0);
    }
    CHECK(orth_defect(v) <= 1e-10);
    CHECK((wm - v * (v.transpose() * wm)).norm() <= 1e-8 * wm.norm());
  }

  Tape tape;
  std::vector<Var> vars;
  for (const auto& m : w) vars.push_back(tape.constant(m));
  const auto qt = orthonormalize(tape, vars);
  for (Index i = 0; i < n_prime; ++i) CHECK((tape.value(qt[std::size_t(i)]) - q[std::size_t(i)]).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("degenerate columns") {
  Matrix a(1, 3), b(1, 3);
  a << 1.0, 0.0, 0.0;
  b << 2.0, 0.0, 0.0;
  CHECK_THROWS_AS(orthonormalize({a, b}), DegenerateBasis);
  std::size_t counter = 0;
  const auto q = orthonormalize({a, b}, {false, &counter});
  CHECK(counter == 1);
  CHECK(q[1](0, 1) == doctest::Approx(1.0));
  Tape tape;
  std::vector<Var> v{tape.constant(a), tape.constant(b)};
  CHECK_THROWS_AS(orthonormalize(tape, v), DegenerateBasis);
  const auto qt = orthonormalize(tape, v, {false, &counter});
  CHECK(counter == 2);
  CHECK(tape.value(qt[1])(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("gram-schmidt gradients match finite differences") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n_a = 3 + trial % 4, n_prime = 1 + trial % 2, b = 3;
    std::vector<Matrix> w;
    for (Index i = 0; i < n_prime; ++i) w.push_back(random_matrix(rng, b, n_a));
    const Matrix s = random_matrix(rng, b, n_a);
    const Matrix weights = random_matrix(rng, b, n_a);
    auto build = [&](Tape& t, std::vector<Var>& vars) {
      vars.clear();
      for (const auto& m : w) vars.push_back(t.constant(m));
      const auto q = orthonormalize(t, vars);
      Var r = t.constant(s);
      for (Var qi : q) r = t.sub(r, t.mul_col(qi, t.row_dot(qi, r)));
      Var out = t.sum_squares(r);
      for (Var qi : q) out = t.add(out, t.sum(t.mul(qi, t.constant(weights))));
      return out;
    };
    Tape tape;
    std::vector<Var> vars;
    tape.backward(build(tape, vars));
    std::vector<Matrix> analytic, numeric;
    for (std::size_t i = 0; i < w.size(); ++i) {
      analytic.push_back(tape.grad(vars[i]));
      numeric.push_back(dodrom::testing::central_difference_input(w[i], [&] {
        Tape t;
        std::vector<Var> vs;
        return t.scalar(build(t, vs));
      }));
    }
    CHECK(dodrom::testing::relative_gap(analytic, numeric) <= 1e-4);
  }
}

TEST_CASE("dod bases are orthonormal") {
  std::mt19937_64 rng(4);
  const Index n_h = 12;
  const Vector g = Vector::LinSpaced(n_h, 0.5, 1.5);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, n_h, 5));
  const Eigen::MatrixXd a = g.cwiseSqrt().cwiseInverse().asDiagonal() *
                            (qr.householderQ() * Eigen::MatrixXd::Identity(n_h, 5));
  DodModel m(tiny_dims(5, 2), a);
  m.init(9);
  for (int probe = 0; probe < 100; ++probe) {
    Vector mu(2);
    mu << uniform01(rng), uniform01(rng);
    const auto v = m.inner(mu, uniform01(rng));
    CHECK(orth_defect(v) <= 1e-10);
    const auto full = m.full_basis(mu, 0.3);
    const Eigen::MatrixXd gram = full.transpose() * g.asDiagonal() * full;
    CHECK((gram - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-9);
    const Eigen::VectorXd u = full * random_matrix(rng, 2, 1);
    const Eigen::VectorXd proj = full * (full.transpose() * g.asDiagonal() * u);
    CHECK((u - proj).norm() <= 1e-8 * u.norm());
  }

  DodModel sq(tiny_dims(6, 3), identity_basis(6, 6));
  sq.init(1);
  Vector mu(2);
  mu << 0.2, 0.1;
  const auto v = sq.full_basis(mu, 0.5);
  const auto vt = sq.inner(mu, 0.5);
  const Eigen::VectorXd x = random_matrix(rng, 3, 1);
  CHECK((v * x).norm() == doctest::Approx((vt * x).norm()).epsilon(1e-12));
}

TEST_CASE("dod loss values and bounds") {
  const auto data = plane_data(3, 4, 3, 4, 0.0, 5);
  DodModel m(tiny_dims(4, 2), identity_basis(4, 4));
  m.init(2);
  std::vector<Index> all(std::size_t(data.rows()));
  for (Index r = 0; r < data.rows(); ++r) all[std::size_t(r)] = r;

  // Heads with zero weights and fixed biases span exactly the data plane, or its complement.
  auto pin = [&](int first, int second) {
    for (auto& h : m.heads()) {
      for (auto& l : h.layers()) l.weight.values.setZero();
      h.layers().back().bias.values.setZero();
    }
    m.heads()[0].layers().back().bias.values(0, first) = 1.0;
    m.heads()[1].layers().back().bias.values(0, second) = 1.0;
  };
  pin(0, 1);
  CHECK(dod_loss(m, data, all) <= 1e-28);
  pin(2, 3);
  double mean_sq = 0.0;
  for (const auto& c : data.columns) mean_sq += c.squaredNorm();
  mean_sq /= double(data.rows() * data.n_phys());
  CHECK(dod_loss(m, data, all) == doctest::Approx(mean_sq).epsilon(1e-12));

  m.init(3);
  Tape tape;
  CHECK(tape.scalar(dod_loss(tape, m, data, all)) == doctest::Approx(dod_loss(m, data, all)).epsilon(1e-12));

  // Per-slice loss is bounded below by the slice eigen-tail beyond N'.
  const auto rot = plane_data(2, 5, 4, 4, 1.0, 6);
  DodDims d1 = tiny_dims(4, 1);
  DodModel one(d1, identity_basis(4, 4));
  one.init(4);
  const Vector per = slice_losses(one, rot);
  for (Index r = 0; r < rot.rows(); ++r) {
    Eigen::MatrixXd s(4, rot.n_phys());
    for (Index j = 0; j < rot.n_phys(); ++j) s.col(j) = rot.columns[std::size_t(j)].row(r).transpose();
    const auto ev = reduction::symmetric_eigen(s.transpose() * s / double(rot.n_phys())).values;
    CHECK(per[r] >= reduction::eigen_tail(ev.cwiseMax(0.0), 1) - 1e-8);
  }
}

TEST_CASE("training finds a fixed plane") {
  const auto data = plane_data(10, 6, 3, 4, 0.0, 7);
  DodModel m(tiny_dims(4, 2), identity_basis(4, 4));
  const auto result = train_dod(m, data, 10, synthetic_config());
  CHECK(result.history.best_val <= 1e-6);
    std::vector<Index> all(std::size_t(data.rows()));
  for (Index r = 0; r < data.rows(); ++r) all[std::size_t(r)] = r;
  CHECK(dod_loss(m, data, all) <= 1e-5);
}

TEST_CASE("training follows a rotating plane") {
  const auto data = plane_data(10, 10, 3, 4, std::numbers::pi / 3.0, 8);
  DodModel m(tiny_dims(4, 2), identity_basis(4, 4));
  const auto result = train_dod(m, data, 10, synthetic_config());
  MESSAGE("rotating plane best validation loss " << result.history.best_val);
  CHECK(result.history.best_val <= 1e-4);

  // Structural orthonormality after training.
  std::mt19937_64 rng(1);
  for (int probe = 0; probe < 100; ++probe) {
    Vector mu(2);
    mu << 0.1 + 0.2 * uniform01(rng), -0.7 + 1.4 * uniform01(rng);
    CHECK(orth_defect(m.inner(mu, uniform01(rng))) <= 1e-8);
  }
  // Loss trend: the windowed mean over the last 20 epochs is below the first 20.
  const auto& tl = result.history.train_loss;
  REQUIRE(tl.size() >= 40);
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    head += tl[i];
    tail += tl[tl.size() - 1 - i];
  }
  CHECK(tail < head);
}

TEST_CASE("dod bundle round trip and determinism") {
  const auto data = plane_data(3, 4, 2, 4, 0.5, 9);
  train::TrainConfig cfg;
  cfg.max_epochs = 5;
  cfg.batch_size = 4;
  DodModel a(tiny_dims(4, 2), identity_basis(4, 4));
  DodModel b(tiny_dims(4, 2), identity_basis(4, 4));
  const auto ha = train_dod(a, data, 3, cfg).history;
  const auto hb = train_dod(b, data, 3, cfg).history;
  CHECK(ha.train_loss == hb.train_loss);
  CHECK(a == b);

  const auto dir = (std::filesystem::temp_directory_path() / "dodrom_test_dod").string();
  save_dod(dir, a);
  const auto l = load_dod(dir);
  CHECK(l == a);
  Vector mu(2);
  mu << 0.2, 0.1;
  CHECK(l.full_basis(mu, 0.4) == a.full_basis(mu, 0.4));
  CHECK_THROWS(load_dod(dir + "_missing"));
}
