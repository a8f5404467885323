#include "fhm/tape.hpp"

#include <algorithm>
#include <cmath>

#include "fhm/error.hpp"

namespace fhm::ad {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::hadamard: return "hadamard";
    case Op::scale: return "scale";
    case Op::transpose: return "transpose";
    case Op::tanh: return "tanh";
    case Op::sigmoid: return "sigmoid";
    case Op::softsign: return "softsign";
    case Op::relu: return "relu";
    case Op::sign: return "sign";
    case Op::abs: return "abs";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::sq_norm: return "sq_norm";
    case Op::l2_norm: return "l2_norm";
    case Op::normalize_rows: return "normalize_rows";
    case Op::center_rows: return "center_rows";
    case Op::gather_rows: return "gather_rows";
  }
  return "?";
}

Tape& Var::tape() const {
  if (tape_ == nullptr) throw UsageError("use of an unbound Var");
  return *tape_;
}

Shape Var::shape() const { return tape().shape(*this); }

const Matrix& Gradients::operator[](Var leaf) const {
  if (tape_ == nullptr || leaf.tape_ != tape_ || leaf.id() >= grads_.size() ||
      !tape_->nodes_[leaf.id()].learnable) {
    throw UsageError("gradient requested for a node that is not a learnable leaf of this pass");
  }
  return grads_[leaf.id()];
}

void Tape::check_owner(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw UsageError("Var does not belong to this tape");
  }
}

Var Tape::variable(Matrix value) {
  Node node;
  node.shape = value.shape();
  node.learnable = true;
  node.needs_grad = true;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  Node node;
  node.shape = value.shape();
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::assign(Var leaf, Matrix value) {
  check_owner(leaf);
  Node& node = nodes_[leaf.id()];
  if (node.op != Op::leaf) throw UsageError("assign() on a non-leaf node");
  if (value.shape() != node.shape) {
    throw DimensionError("assign: leaf is " + node.shape.str() + ", value is " +
                         value.shape().str());
  }
  node.value = std::move(value);
  evaluated_ = std::min(evaluated_, leaf.id() + 1);
}

Shape Tape::shape(Var v) const {
  check_owner(v);
  return nodes_[v.id()].shape;
}

Op Tape::op(Var v) const {
  check_owner(v);
  return nodes_[v.id()].op;
}

bool Tape::evaluated(Var v) const {
  check_owner(v);
  return nodes_[v.id()].op == Op::leaf || v.id() < evaluated_;
}

Var Tape::push(Op op, std::span<const Var> parents, Shape shape, double k,
               std::vector<std::size_t> index) {
  Node node;
  node.op = op;
  node.arity = parents.size();
  for (std::size_t i = 0; i < parents.size(); ++i) {
    check_owner(parents[i]);
    node.parents[i] = parents[i].id();
    node.needs_grad = node.needs_grad || nodes_[parents[i].id()].needs_grad;
  }
  node.shape = shape;
  node.k = k;
  node.index = std::move(index);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

namespace {

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename F>
Matrix map(const Matrix& a, F f) {
  Matrix out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

void add_into(Matrix& acc, const Matrix& g) {
  if (acc.empty() && g.size() != 0) {
    acc = g;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
}

}  // namespace

void Tape::evaluate(Node& node) {
  if (node.op == Op::leaf) {
    if (!all_finite(node.value)) throw NumericError("non-finite value bound to a leaf");
    return;
  }
  const Matrix& a = nodes_[node.parents[0]].value;
  const Matrix* b = node.arity > 1 ? &nodes_[node.parents[1]].value : nullptr;
  Matrix out;
  switch (node.op) {
    case Op::leaf: break;
    case Op::matmul: out = fhm::matmul(a, *b); break;
    case Op::add:
      if (a.shape() == b->shape()) {
        out = a + *b;
      } else {
        out = a;
        for (std::size_t r = 0; r < a.rows(); ++r)
          for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) += (*b)[c];
      }
      break;
    case Op::sub: out = a - *b; break;
    case Op::hadamard: out = fhm::hadamard(a, *b); break;
    case Op::scale: out = node.k * a; break;
    case Op::transpose: out = fhm::transpose(a); break;
    case Op::tanh: out = map(a, [](double x) { return std::tanh(x); }); break;
    case Op::sigmoid: out = map(a, sigmoid_scalar); break;
    case Op::softsign: out = map(a, [](double x) { return x / (1.0 + std::abs(x)); }); break;
    case Op::relu: out = map(a, [](double x) { return x > 0.0 ? x : 0.0; }); break;
    case Op::sign: out = fhm::sign(a); break;
    case Op::abs: out = fhm::abs(a); break;
    case Op::sum: {
      double s = 0.0;
      for (double v : a.values()) s += v;
      out = Matrix::scalar(s);
      break;
    }
    case Op::mean: {
      double s = 0.0;
      for (double v : a.values()) s += v;
      out = Matrix::scalar(a.size() == 0 ? 0.0 : s / static_cast<double>(a.size()));
      break;
    }
    case Op::sq_norm: {
      double s = 0.0;
      for (double v : a.values()) s += v * v;
      out = Matrix::scalar(s);
      break;
    }
    case Op::l2_norm: out = Matrix::scalar(frobenius_norm(a)); break;
    case Op::normalize_rows: {
      out = a;
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double n = 0.0;
        for (double v : a.row(r)) n += v * v;
        n = std::sqrt(n);
        for (double& v : out.row(r)) v = n > 0.0 ? v / n : 0.0;
      }
      break;
    }
    case Op::center_rows: {
      out = a;
      for (std::size_t c = 0; c < a.cols(); ++c) {
        double m = 0.0;
        for (std::size_t r = 0; r < a.rows(); ++r) m += a(r, c);
        m /= static_cast<double>(a.rows());
        for (std::size_t r = 0; r < a.rows(); ++r) out(r, c) -= m;
      }
      break;
    }
    case Op::gather_rows: {
      out = Matrix(node.index.size(), a.cols());
      for (std::size_t k = 0; k < node.index.size(); ++k) {
        auto src = a.row(node.index[k]);
        std::copy(src.begin(), src.end(), out.row(k).begin());
      }
      break;
    }
  }
  if (!all_finite(out)) {
    throw NumericError("non-finite value produced by " + std::string(op_name(node.op)));
  }
  node.value = std::move(out);
}

const Matrix& Tape::forward(Var root) {
  check_owner(root);
  for (std::size_t i = evaluated_; i <= root.id(); ++i) evaluate(nodes_[i]);
  evaluated_ = std::max(evaluated_, root.id() + 1);
  return nodes_[root.id()].value;
}

const Matrix& Tape::value(Var v) const {
  if (!evaluated(v)) {
    throw UsageError("value of node " + std::to_string(v.id()) + " (" +
                     std::string(op_name(nodes_[v.id()].op)) + ") read before forward()");
  }
  return nodes_[v.id()].value;
}

void Tape::accumulate(const Node& node, const Matrix& g, std::vector<Matrix>& grads) const {
  const std::size_t pa = node.parents[0];
  const std::size_t pb = node.parents[1];
  const Node& na = nodes_[pa];
  const bool ga = na.needs_grad;
  const bool gb = node.arity > 1 && nodes_[pb].needs_grad;
  const Matrix& a = na.value;
  const Matrix& y = node.value;

  auto elementwise = [&](auto dydx) {
    Matrix d(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = g[i] * dydx(a[i], y[i]);
    add_into(grads[pa], d);
  };

  switch (node.op) {
    case Op::leaf: break;
    case Op::matmul: {
      const Matrix& b = nodes_[pb].value;
      if (ga) add_into(grads[pa], fhm::matmul(g, fhm::transpose(b)));
      if (gb) add_into(grads[pb], fhm::matmul(fhm::transpose(a), g));
      break;
    }
    case Op::add: {
      if (ga) add_into(grads[pa], g);
      if (gb) {
        const Matrix& b = nodes_[pb].value;
        if (b.shape() == g.shape()) {
          add_into(grads[pb], g);
        } else {
          Matrix col(1, g.cols());
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) col[c] += g(r, c);
          add_into(grads[pb], col);
        }
      }
      break;
    }
    case Op::sub:
      if (ga) add_into(grads[pa], g);
      if (gb) add_into(grads[pb], -1.0 * g);
      break;
    case Op::hadamard: {
      const Matrix& b = nodes_[pb].value;
      if (ga) add_into(grads[pa], fhm::hadamard(g, b));
      if (gb) add_into(grads[pb], fhm::hadamard(g, a));
      break;
    }
    case Op::scale:
      if (ga) add_into(grads[pa], node.k * g);
      break;
    case Op::transpose:
      if (ga) add_into(grads[pa], fhm::transpose(g));
      break;
    case Op::tanh:
      if (ga) elementwise([](double, double t) { return 1.0 - t * t; });
      break;
    case Op::sigmoid:
      if (ga) elementwise([](double, double s) { return s * (1.0 - s); });
      break;
    case Op::softsign:
      if (ga) elementwise([](double x, double) {
        const double d = 1.0 + std::abs(x);
        return 1.0 / (d * d);
      });
      break;
    case Op::relu:
      if (ga) elementwise([](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
      break;
    case Op::sign: break;
    case Op::abs:
      if (ga) elementwise([](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
      break;
    case Op::sum:
      if (ga) add_into(grads[pa], Matrix(a.shape(), g.item()));
      break;
    case Op::mean:
      if (ga) add_into(grads[pa], Matrix(a.shape(), g.item() / static_cast<double>(a.size())));
      break;
    case Op::sq_norm:
      if (ga) add_into(grads[pa], (2.0 * g.item()) * a);
      break;
    case Op::l2_norm:
      if (ga) {
        const double n = y.item();
        add_into(grads[pa], n > 0.0 ? (g.item() / n) * a : Matrix(a.shape()));
      }
      break;
    case Op::normalize_rows:
      if (ga) {
        Matrix d(a.shape());
        for (std::size_t r = 0; r < a.rows(); ++r) {
          double n = 0.0;
          for (double v : a.row(r)) n += v * v;
          n = std::sqrt(n);
          if (n == 0.0) continue;
          double dot = 0.0;
          for (std::size_t c = 0; c < a.cols(); ++c) dot += y(r, c) * g(r, c);
          for (std::size_t c = 0; c < a.cols(); ++c) d(r, c) = (g(r, c) - y(r, c) * dot) / n;
        }
        add_into(grads[pa], d);
      }
      break;
    case Op::center_rows:
      if (ga) {
        Matrix d = g;
        for (std::size_t c = 0; c < g.cols(); ++c) {
          double m = 0.0;
          for (std::size_t r = 0; r < g.rows(); ++r) m += g(r, c);
          m /= static_cast<double>(g.rows());
          for (std::size_t r = 0; r < g.rows(); ++r) d(r, c) -= m;
        }
        add_into(grads[pa], d);
      }
      break;
    case Op::gather_rows:
      if (ga) {
        Matrix d(a.shape());
        for (std::size_t k = 0; k < node.index.size(); ++k)
          for (std::size_t c = 0; c < a.cols(); ++c) d(node.index[k], c) += g(k, c);
        add_into(grads[pa], d);
      }
      break;
  }
}

Gradients Tape::backward(Var root, const Matrix& seed) {
  check_owner(root);
  if (!evaluated(root)) throw UsageError("backward() called before forward() on this root");
  if (seed.shape() != nodes_[root.id()].shape) {
    throw DimensionError("backward seed is " + seed.shape().str() + ", root is " +
                         nodes_[root.id()].shape.str());
  }
  std::vector<Matrix> grads(nodes_.size());
  if (nodes_[root.id()].needs_grad) grads[root.id()] = seed;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (node.op == Op::leaf || !node.needs_grad || grads[i].empty()) continue;
    accumulate(node, grads[i], grads);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].learnable) {
      grads[i] = Matrix();
    } else if (grads[i].empty()) {
      grads[i] = Matrix(nodes_[i].shape);
    }
  }
  Gradients out;
  out.tape_ = this;
  out.grads_ = std::move(grads);
  return out;
}

Gradients Tape::backward(Var root) {
  if (shape(root) != Shape{1, 1}) {
    throw DimensionError("backward() without seed needs a 1x1 root, got " + shape(root).str());
  }
  return backward(root, Matrix::scalar(1.0));
}

namespace {

Tape& same_tape(Var a, Var b) {
  Tape& t = a.tape();
  if (&t != &b.tape()) throw UsageError("operands live on different tapes");
  return t;
}

Var unary(Op op, Var a, Shape shape, double k = 0.0) {
  const Var parents[] = {a};
  return a.tape().push(op, parents, shape, k);
}

Var binary(Op op, Var a, Var b, Shape shape) {
  const Var parents[] = {a, b};
  return same_tape(a, b).push(op, parents, shape);
}

void require_same(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + a.shape().str() + " and " +
                         b.shape().str() + " differ");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.cols != sb.rows) {
    throw DimensionError("matmul: shapes " + sa.str() + " and " + sb.str() +
                         " are not conformable");
  }
  return binary(Op::matmul, a, b, {sa.rows, sb.cols});
}

Var operator+(Var a, Var b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  const bool broadcast = sb.rows == 1 && sb.cols == sa.cols;
  if (sa != sb && !broadcast) {
    throw DimensionError("add: shapes " + sa.str() + " and " + sb.str() + " differ");
  }
  return binary(Op::add, a, b, sa);
}

Var operator-(Var a, Var b) {
  require_same(a, b, "sub");
  return binary(Op::sub, a, b, a.shape());
}

Var hadamard(Var a, Var b) {
  require_same(a, b, "hadamard");
  return binary(Op::hadamard, a, b, a.shape());
}

Var operator*(double k, Var a) { return unary(Op::scale, a, a.shape(), k); }

Var transpose(Var a) {
  const Shape s = a.shape();
  return unary(Op::transpose, a, {s.cols, s.rows});
}

Var tanh(Var a) { return unary(Op::tanh, a, a.shape()); }
Var sigmoid(Var a) { return unary(Op::sigmoid, a, a.shape()); }
Var softsign(Var a) { return unary(Op::softsign, a, a.shape()); }
Var relu(Var a) { return unary(Op::relu, a, a.shape()); }
Var sign(Var a) { return unary(Op::sign, a, a.shape()); }
Var abs(Var a) { return unary(Op::abs, a, a.shape()); }
Var sum(Var a) { return unary(Op::sum, a, {1, 1}); }
Var mean(Var a) { return unary(Op::mean, a, {1, 1}); }
Var sq_norm(Var a) { return unary(Op::sq_norm, a, {1, 1}); }
Var l2_norm(Var a) { return unary(Op::l2_norm, a, {1, 1}); }
Var normalize_rows(Var a) { return unary(Op::normalize_rows, a, a.shape()); }

Var center_rows(Var a) {
  if (a.shape().rows == 0) throw DimensionError("center_rows on an empty matrix");
  return unary(Op::center_rows, a, a.shape());
}

Var gather_rows(Var a, std::vector<std::size_t> rows) {
  const Shape s = a.shape();
  for (std::size_t r : rows) {
    if (r >= s.rows) {
      throw DimensionError("gather_rows: row " + std::to_string(r) + " out of range for " +
                           s.str());
    }
  }
  const Shape out{rows.size(), s.cols};
  const Var parents[] = {a};
  return a.tape().push(Op::gather_rows, parents, out, 0.0, std::move(rows));
}

}  // namespace fhm::ad
