#include "dodrom/autodiff/tape.hpp"

#include <cmath>
#include <sstream>

namespace dodrom {

namespace {

std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << '(' << m.rows() << 'x' << m.cols() << ')';
  return os.str();
}

[[noreturn]] void mismatch(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": incompatible operands " + dims(a) + " and " + dims(b));
}

void require_same(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch(op, a, b);
}

void require_column(const char* op, const Matrix& x, const Matrix& s) {
  if (s.cols() != 1 || s.rows() != x.rows()) mismatch(op, x, s);
}

}  // namespace

Var Tape::push(Matrix value, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Var Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::constant(double value) { return push(Matrix::Constant(1, 1, value), nullptr); }

Var Tape::parameter(Tensor& tensor, const BoolMatrix* mask) {
  if (mask && (mask->rows() != tensor.values.rows() || mask->cols() != tensor.values.cols())) {
    throw ShapeError("parameter: mask shape differs from tensor " + dims(tensor.values));
  }
  Var v = push(tensor.values, nullptr);
  nodes_[v.id].param = &tensor;
  nodes_[v.id].mask = mask;
  return v;
}

double Tape::scalar(Var v) const {
  const Matrix& m = nodes_[v.id].value;
  if (m.size() != 1) throw ShapeError("scalar: node is " + dims(m) + ", expected (1x1)");
  return m(0, 0);
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.rows()) mismatch("matmul", A, B);
  return push(A * B, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g * t.value(b).transpose());
    t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.cols()) mismatch("matmul_nt", A, B);
  return push(A * B.transpose(), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g * t.value(b));
    t.accumulate(b, g.transpose() * t.value(a));
  });
}

Var Tape::transpose(Var a) {
  return push(value(a).transpose(),
              [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var Tape::add(Var a, Var b) {
  require_same("add", value(a), value(b));
  return push(value(a) + value(b), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var Tape::sub(Var a, Var b) {
  require_same("sub", value(a), value(b));
  return push(value(a) - value(b), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var Tape::mul(Var a, Var b) {
  require_same("mul", value(a), value(b));
  return push(value(a).cwiseProduct(value(b)), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(t.value(b)));
    t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

Var Tape::add_row(Var x, Var row) {
  const Matrix& X = value(x);
  const Matrix& R = value(row);
  if (R.rows() != 1 || R.cols() != X.cols()) mismatch("add_row", X, R);
  Matrix out = X.rowwise() + R.row(0);
  return push(std::move(out), [x, row](Tape& t, const Matrix& g) {
    t.accumulate(x, g);
    t.accumulate(row, g.colwise().sum());
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var Tape::leaky_relu(Var a, double slope) {
  Matrix out = value(a).unaryExpr([slope](double x) { return x >= 0.0 ? x : slope * x; });
  return push(std::move(out), [a, slope](Tape& t, const Matrix& g) {
    Matrix d = t.value(a).unaryExpr([slope](double x) { return x >= 0.0 ? 1.0 : slope; });
    t.accumulate(a, g.cwiseProduct(d));
  });
}

Var Tape::sum(Var a) {
  return push(Matrix::Constant(1, 1, value(a).sum()), [a](Tape& t, const Matrix& g) {
    const Matrix& A = t.value(a);
    t.accumulate(a, Matrix::Constant(A.rows(), A.cols(), g(0, 0)));
  });
}

Var Tape::mean(Var a) {
  const Matrix& A = value(a);
  if (A.size() == 0) throw ShapeError("mean: empty operand");
  return push(Matrix::Constant(1, 1, A.mean()), [a](Tape& t, const Matrix& g) {
    const Matrix& A = t.value(a);
    t.accumulate(a, Matrix::Constant(A.rows(), A.cols(), g(0, 0) / double(A.size())));
  });
}

Var Tape::sum_squares(Var a) {
  return push(Matrix::Constant(1, 1, value(a).squaredNorm()),
              [a](Tape& t, const Matrix& g) { t.accumulate(a, 2.0 * g(0, 0) * t.value(a)); });
}

Var Tape::reshape(Var a, Index rows, Index cols) {
  const Matrix& A = value(a);
  if (rows * cols != A.size()) {
    throw ShapeError("reshape: cannot view " + dims(A) + " as (" + std::to_string(rows) + "x" +
                     std::to_string(cols) + ")");
  }
  Matrix out = Eigen::Map<const Matrix>(A.data(), rows, cols);
  return push(std::move(out), [a](Tape& t, const Matrix& g) {
    const Matrix& A = t.value(a);
    t.accumulate(a, Eigen::Map<const Matrix>(g.data(), A.rows(), A.cols()));
  });
}

Var Tape::slice_cols(Var a, Index start, Index count) {
  const Matrix& A = value(a);
  if (start < 0 || count < 0 || start + count > A.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " + dims(A));
  }
  Matrix out = A.middleCols(start, count);
  return push(std::move(out), [a, start, count](Tape& t, const Matrix& g) {
    const Matrix& A = t.value(a);
    Matrix full = Matrix::Zero(A.rows(), A.cols());
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const Index rows = value(parts[0]).rows();
  Index cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) mismatch("concat_cols", value(parts[0]), value(p));
    cols += value(p).cols();
  }
  Matrix out(rows, cols);
  Index c = 0;
  for (Var p : parts) {
    out.middleCols(c, value(p).cols()) = value(p);
    c += value(p).cols();
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return push(std::move(out), [ids](Tape& t, const Matrix& g) {
    Index c = 0;
    for (Var p : ids) {
      const Index w = t.value(p).cols();
      t.accumulate(p, g.middleCols(c, w));
      c += w;
    }
  });
}

Var Tape::row_dot(Var a, Var b) {
  require_same("row_dot", value(a), value(b));
  Matrix out = value(a).cwiseProduct(value(b)).rowwise().sum();
  return push(std::move(out), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, t.value(b).array().colwise() * g.col(0).array());
    t.accumulate(b, t.value(a).array().colwise() * g.col(0).array());
  });
}

Var Tape::row_norm(Var a) {
  Matrix out = value(a).rowwise().norm();
  const Var self{nodes_.size()};
  return push(std::move(out), [a, self](Tape& t, const Matrix& g) {
    const auto n = t.value(self).col(0).array();
    // d|x|/dx = x/|x|; a zero row has no defined direction and receives no gradient.
    Eigen::ArrayXd w = (n > 0.0).select(g.col(0).array() / n, 0.0);
    t.accumulate(a, t.value(a).array().colwise() * w);
  });
}

Var Tape::mul_col(Var x, Var s) {
  require_column("mul_col", value(x), value(s));
  Matrix out = value(x).array().colwise() * value(s).col(0).array();
  return push(std::move(out), [x, s](Tape& t, const Matrix& g) {
    t.accumulate(x, g.array().colwise() * t.value(s).col(0).array());
    t.accumulate(s, g.cwiseProduct(t.value(x)).rowwise().sum());
  });
}

Var Tape::div_col(Var x, Var s) {
  require_column("div_col", value(x), value(s));
  Matrix out = value(x).array().colwise() / value(s).col(0).array();
  return push(std::move(out), [x, s](Tape& t, const Matrix& g) {
    const auto sv = t.value(s).col(0).array();
    t.accumulate(x, g.array().colwise() / sv);
    Matrix gs = -(g.cwiseProduct(t.value(x)).rowwise().sum()).array() / (sv * sv);
    t.accumulate(s, gs);
  });
}

void Tape::backward(Var loss) {
  const Matrix& L = value(loss);
  if (L.size() != 1) throw ShapeError("backward: target is " + dims(L) + ", expected (1x1)");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[loss.id].grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) {
      Matrix g = n.grad;
      n.backward(*this, g);
    } else if (n.param) {
      Matrix& dst = n.param->ensure_grad();
      if (n.mask) {
        dst += n.mask->select(n.grad.array(), 0.0).matrix();
      } else {
        dst += n.grad;
      }
    }
  }
}

}  // namespace dodrom
