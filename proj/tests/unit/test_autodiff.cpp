#include <doctest.h>

#include "support/finite_difference.hpp"
#include "support/primitive_cases.hpp"

#include "dodrom/autodiff/checkpoint.hpp"
#include "dodrom/autodiff/mlp.hpp"
#include "dodrom/autodiff/optim.hpp"
#include "dodrom/io/binary.hpp"

#include <cmath>
#include <sstream>

using namespace dodrom;
using dodrom::testing::random_matrix;

TEST_CASE("leaky_relu matches its definition") {
  CHECK(leaky_relu(std::vector<double>{2.0, -1.0}, 0.1) == std::vector<double>{2.0, -0.1});
  CHECK(leaky_relu(std::vector<double>{0.0}, 0.1) == std::vector<double>{0.0});
  CHECK(leaky_relu(std::vector<double>{-10.0, 10.0}, 0.5) == std::vector<double>{-5.0, 10.0});
}

TEST_CASE("single linear layer gradient is y x^T") {
  DenseLayer layer(3, 2, Activation::kIdentity);
  layer.weight.values << 1.0, -2.0, 0.5, 0.25, 3.0, -1.0;
  layer.bias_mask.setConstant(false);
  Mlp net(std::vector<DenseLayer>{layer});
  Matrix x(1, 3);
  x << 0.3, -0.7, 1.1;
  auto params = net.parameters();
  auto r = value_and_grad(params, [&](Tape& t) {
    Var y = net.forward(t, t.constant(x));
    return t.scale(t.sum_squares(y), 0.5);
  });
  Matrix y = x * layer.weight.values.transpose();
  CHECK(r.value == doctest::Approx(0.5 * y.squaredNorm()));
  Matrix expected = y.transpose() * x;
  CHECK((r.grads[0] - expected).norm() < 1e-14);
  CHECK(r.grads[1].norm() == 0.0);
}

TEST_CASE("constant loss gives zero gradients") {
  std::mt19937_64 rng(3);
  Mlp net({2, 4, 1});
  net.init(rng);
  auto params = net.parameters();
  auto r = value_and_grad(params, [&](Tape& t) {
    net.forward(t, t.constant(Matrix::Ones(2, 2)));
    return t.constant(4.0);
  });
  CHECK(r.value == 4.0);
  for (const auto& g : r.grads) CHECK(g.norm() == 0.0);
}

TEST_CASE("network gradients match central differences") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Index in = 1 + Index(rng() % 4);
    const Index hidden = 2 + Index(rng() % 15);
    const Index out = 1 + Index(rng() % 4);
    Mlp net({in, hidden, hidden, out});
    net.init(rng);
    for (auto& layer : net.layers()) {
      layer.bias.values = random_matrix(rng, 1, layer.out_dim(), -0.5, 0.5);
    }
    Matrix x = random_matrix(rng, 3, in);
    Matrix target = random_matrix(rng, 3, out);
    auto params = net.parameters();
    auto build = [&](Tape& t) {
      Var y = net.forward(t, t.constant(x));
      return t.mean(t.mul(t.sub(y, t.constant(target)), t.sub(y, t.constant(target))));
    };
    auto r = value_and_grad(params, build);
    auto fd = dodrom::testing::central_difference(params, [&] {
      Tape t;
      return t.scalar(build(t));
    });
    CHECK(dodrom::testing::relative_gap(r.grads, fd) <= 1e-5);
  }
}

TEST_CASE("every primitive matches central differences") {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 5; ++round) {
    auto cases = dodrom::testing::primitive_cases(rng);
    for (auto& pc : cases) {
      CAPTURE(pc.name);
      CHECK(dodrom::testing::check_primitive(pc, rng) <= 1e-5);
    }
  }
}

TEST_CASE("shape mismatch names the primitive") {
  Tape t;
  Var a = t.constant(Matrix::Ones(2, 3));
  Var b = t.constant(Matrix::Ones(2, 3));
  CHECK_THROWS_WITH_AS(t.matmul(a, b), doctest::Contains("matmul"), ShapeError);
  CHECK_THROWS_WITH_AS(t.row_dot(a, t.constant(Matrix::Ones(3, 2))), doctest::Contains("row_dot"),
                       ShapeError);
  CHECK_THROWS_WITH_AS(t.backward(a), doctest::Contains("backward"), ShapeError);
}

TEST_CASE("masked entries receive zero gradient and stay zero") {
  std::mt19937_64 rng(8);
  Mlp net({3, 6, 2});
  for (auto& layer : net.layers()) {
    for (Index i = 0; i < layer.weight_mask.rows(); ++i)
      for (Index j = 0; j < layer.weight_mask.cols(); ++j) layer.weight_mask(i, j) = (i + j) % 2 == 0;
    layer.bias_mask(0, 0) = false;
  }
  net.init(rng);
  auto params = net.parameters();
  OptimizerState opt(params, AdamWConfig{});
  Matrix x = random_matrix(rng, 5, 3);
  for (int step = 0; step < 50; ++step) {
    auto r = value_and_grad(params, [&](Tape& t) { return t.sum_squares(net.forward(t, t.constant(x))); });
    for (std::size_t i = 0; i < params.size(); ++i) {
      CHECK((params[i].mask->select(Matrix::Zero(r.grads[i].rows(), r.grads[i].cols()).array(),
                                    r.grads[i].array()))
                .abs()
                .maxCoeff() == 0.0);
    }
    adamw_step(params, opt);
  }
  for (const auto& p : params) {
    for (Index k = 0; k < p.tensor->values.size(); ++k) {
      if (!p.mask->data()[k]) CHECK(p.tensor->values.data()[k] == 0.0);
    }
  }
}

TEST_CASE("count_active_weights") {
  Mlp net({2, 3, 1});
  CHECK(count_active_weights(net) == 13);
  for (auto& layer : net.layers()) layer.bias_mask.setConstant(false);
  CHECK(count_active_weights(net) == 9);

  DenseLayer layer(4, 4, Activation::kIdentity);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) layer.weight_mask(i, j) = (i + j) % 2 == 0;
  layer.bias_mask.setConstant(false);
  CHECK(count_active_weights(Mlp(std::vector<DenseLayer>{layer})) == 8);
}

TEST_CASE("AdamW update") {
  auto single = [](double theta, double grad, AdamWConfig cfg) {
    Tensor t(Matrix::Constant(1, 1, theta));
    t.ensure_grad()(0, 0) = grad;
    std::vector<ParamRef> params{{&t, nullptr}};
    OptimizerState st(params, cfg);
    adamw_step(params, st);
    return t.values(0, 0);
  };
  SUBCASE("zero gradient without decay leaves parameters") {
    CHECK(single(0.7, 0.0, AdamWConfig{.weight_decay = 0.0}) == 0.7);
  }
  SUBCASE("decoupled decay alone") {
    CHECK(single(1.0, 0.0, AdamWConfig{.lr = 0.1, .weight_decay = 0.01}) == doctest::Approx(0.999).epsilon(1e-15));
  }
  SUBCASE("first step with unit gradient moves by lr") {
    // m_hat = v_hat = 1 after bias correction, so the step is lr / (1 + eps).
    const double expected = -1e-3 / (1.0 + 1e-8);
    CHECK(single(0.0, 1.0, AdamWConfig{}) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("non-finite gradient aborts without touching state") {
    Tensor t(Matrix::Constant(1, 1, 2.0));
    t.ensure_grad()(0, 0) = std::nan("");
    std::vector<ParamRef> params{{&t, nullptr}};
    OptimizerState st(params, AdamWConfig{});
    CHECK_THROWS_AS(adamw_step(params, st), NonFiniteGradient);
    CHECK(st.step == 0);
    CHECK(t.values(0, 0) == 2.0);
  }
}

TEST_CASE("plateau scheduler") {
  SUBCASE("improving losses keep the rate") {
    SchedulerState s(PlateauConfig{});
    double lr = 1e-3;
    for (double loss : {1.0, 0.5, 0.25}) lr = scheduler_step(s, lr, loss);
    CHECK(lr == 1e-3);
  }
  SUBCASE("flat losses reduce after patience is exceeded") {
    SchedulerState s(PlateauConfig{.factor = 0.5, .patience = 2});
    double lr = 1e-3;
    lr = scheduler_step(s, lr, 1.0);  // baseline
    lr = scheduler_step(s, lr, 1.0);
    lr = scheduler_step(s, lr, 1.0);
    CHECK(lr == 1e-3);
    lr = scheduler_step(s, lr, 1.0);  // third flat epoch
    CHECK(lr == 5e-4);
    CHECK_FALSE(s.early_stop);
  }
  SUBCASE("exhausted patience at min rate signals early stop") {
    SchedulerState s(PlateauConfig{.patience = 1, .min_lr = 1e-6});
    double lr = 1e-6;
    for (int i = 0; i < 3; ++i) lr = scheduler_step(s, lr, 1.0);
    CHECK(s.early_stop);
    CHECK(lr == 1e-6);
  }
  SUBCASE("rate sequence is non-increasing and floored") {
    std::mt19937_64 rng(2);
    SchedulerState s(PlateauConfig{.patience = 1});
    double lr = 1e-3;
    for (int i = 0; i < 500; ++i) {
      const double next = scheduler_step(s, lr, uniform01(rng));
      CHECK(next <= lr);
      CHECK(next >= 1e-6);
      lr = next;
    }
  }
}

TEST_CASE("network checkpoint round trip is bit-exact") {
  std::mt19937_64 rng(21);
  Mlp net({3, 7, 5, 2}, 0.2);
  net.layers()[1].weight_mask(2, 3) = false;
  net.layers()[2].bias_mask(0, 1) = false;
  net.init(rng);
  std::stringstream ss;
  write_network(ss, net);
  const std::string bytes = ss.str();
  Mlp back = read_network(ss);
  CHECK(back == net);
  std::stringstream again;
  write_network(again, back);
  CHECK(again.str() == bytes);
  // 8 magic + 4 version + 4 count, then per layer 4+4+1+8 header bytes.
  CHECK(bytes.substr(0, 5) == "DRNET");
}

TEST_CASE("checkpoint rejects wrong magic and truncation") {
  std::stringstream bad("NOTANET!");
  CHECK_THROWS_AS(read_network(bad), io::FormatError);
  Mlp net({2, 2});
  std::stringstream ss;
  write_network(ss, net);
  std::stringstream cut(ss.str().substr(0, ss.str().size() - 3));
  CHECK_THROWS_AS(read_network(cut), io::FormatError);
}

TEST_CASE("training trajectories are bit-identical for equal seeds") {
  auto run = [] {
    std::mt19937_64 rng(99);
    Mlp net({2, 8, 1});
    net.init(rng);
    auto params = net.parameters();
    OptimizerState opt(params, AdamWConfig{});
    Matrix x = random_matrix(rng, 16, 2);
    Matrix y = random_matrix(rng, 16, 1);
    for (int i = 0; i < 30; ++i) {
      value_and_grad(params, [&](Tape& t) {
        return t.mean(t.mul(t.sub(net.forward(t, t.constant(x)), t.constant(y)),
                            t.sub(net.forward(t, t.constant(x)), t.constant(y))));
      });
      adamw_step(params, opt);
    }
    return net;
  };
  CHECK(run() == run());
}
