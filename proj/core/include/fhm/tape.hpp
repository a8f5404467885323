#pragma once

// Minimal reverse-mode automatic differentiation.
//
// A Tape records an expression DAG in creation order; building an expression
// only checks shapes. forward() evaluates every node up to a root and caches
// the values, backward() walks the cache in reverse. Leaves can be rebound
// with assign(), which invalidates the cache, so the same graph can be
// re-evaluated (finite-difference checks do exactly that).
//
// Conventions:
//   * sign() is a stop-gradient: it contributes nothing upstream, so in
//     x + sign(x) only the identity branch carries gradient.
//   * Subgradients at kinks are 0: relu'(0), abs'(0), the gradient of
//     l2_norm at the origin and of normalize_rows on a zero row.
//
// A tape is a single-threaded object. Distinct tapes share no state.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "fhm/matrix.hpp"

namespace fhm::ad {

enum class Op {
  leaf,
  matmul,
  add,       // same shape, or r x c + 1 x c (bias broadcast over rows)
  sub,
  hadamard,
  scale,
  transpose,
  tanh,
  sigmoid,
  softsign,
  relu,
  sign,      // stop-gradient
  abs,
  sum,
  mean,
  sq_norm,
  l2_norm,
  normalize_rows,
  center_rows,
  gather_rows,
};

std::string_view op_name(Op op);

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  std::size_t id() const { return id_; }
  Tape& tape() const;
  Shape shape() const;
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  friend class Gradients;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Result of a backward pass: one gradient per learnable leaf.
class Gradients {
 public:
  // Gradient for a learnable leaf; a zero matrix if the root does not depend on it.
  const Matrix& operator[](Var leaf) const;

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<Matrix> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Learnable leaf.
  Var variable(Matrix value);
  // Leaf that never receives gradient.
  Var constant(Matrix value);

  // Rebind a leaf's value; the forward cache is invalidated.
  void assign(Var leaf, Matrix value);

  // Evaluate every node up to and including `root`.
  const Matrix& forward(Var root);

  // Cached value; throws UsageError if the node has not been evaluated.
  const Matrix& value(Var v) const;

  // Reverse pass seeded with `seed` (same shape as root). Requires a prior
  // forward(root) on the current leaf bindings.
  Gradients backward(Var root, const Matrix& seed);
  // Same, for a 1x1 root with seed 1.
  Gradients backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  Shape shape(Var v) const;
  Op op(Var v) const;
  bool evaluated(Var v) const;

  // Node construction; used by the free functions below.
  Var push(Op op, std::span<const Var> parents, Shape shape, double k = 0.0,
           std::vector<std::size_t> index = {});

 private:
  struct Node {
    Op op = Op::leaf;
    std::size_t parents[2] = {0, 0};
    std::size_t arity = 0;
    Shape shape;
    double k = 0.0;
    std::vector<std::size_t> index;
    bool learnable = false;
    bool needs_grad = false;
    Matrix value;
  };

  void check_owner(Var v) const;
  void evaluate(Node& node);
  void accumulate(const Node& node, const Matrix& g, std::vector<Matrix>& grads) const;

  std::vector<Node> nodes_;
  std::size_t evaluated_ = 0;

  friend class Gradients;
};

Var matmul(Var a, Var b);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var hadamard(Var a, Var b);
Var operator*(double k, Var a);
Var transpose(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var softsign(Var a);
Var relu(Var a);
Var sign(Var a);
Var abs(Var a);
Var sum(Var a);
Var mean(Var a);
Var sq_norm(Var a);
Var l2_norm(Var a);
// Each row divided by its L2 norm; zero rows stay zero.
Var normalize_rows(Var a);
// Subtract the mean row from every row.
Var center_rows(Var a);
Var gather_rows(Var a, std::vector<std::size_t> rows);

}  // namespace fhm::ad
