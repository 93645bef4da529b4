#pragma once

// Reverse-mode automatic differentiation over vector-valued primitives.
//
// A Tape records every primitive applied to Vars; Tape::backward walks the
// record in reverse and accumulates adjoints. Values are Eigen vectors, so
// the solver and networks record one node per vector operation instead of
// one per scalar. A scalar is a vector of size 1.

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adaptherm/error.hpp"

namespace adaptherm::ad {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class UnsupportedPrimitive : public Error {
 public:
  explicit UnsupportedPrimitive(std::string_view name)
      : Error("unsupported primitive '" + std::string(name) + "'") {}
};

enum class Op : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Scale,      // x * scalar constant
  AddConst,   // x + constant vector
  MulConst,   // x .* constant vector
  Pow,        // x .^ constant exponent vector
  Exp,
  Log,
  Tanh,
  Relu,
  Sigmoid,
  Square,
  Fourth,
  Sum,
  MatVec,        // constant dense matrix times x
  SparseMatVec,  // constant sparse matrix times x
  Affine,        // W x + b with W, b recorded
  Gather,        // y[i] = x[index[i]]
  SegmentSum,    // y[index[i]] += x[i]
  Slice,
  Concat,
  StraightThrough,  // value = round(x), derivative = identity
  Custom,
};

std::string_view op_name(Op op);

class Tape;

/// Handle to a recorded value.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  const Vector& value() const;
  Eigen::Index size() const { return value().size(); }
  double scalar() const;
  std::uint32_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Backward rule for Op::Custom: receives the output adjoint and must add
/// into each parent adjoint (already sized and zero-initialised if unused).
using CustomBackward =
    std::function<void(const Vector& adjoint_out, std::span<Vector> parents)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Owned leaf. Registered inputs are reported by gradient().
  Var input(Vector value);
  /// Owned leaf that is not reported by gradient().
  Var constant(Vector value);
  /// Leaf viewing external storage; the referenced vector must outlive the
  /// tape and stay unmodified until backward() has run.
  Var external(const Vector& storage);

  /// Generic entry for elementwise primitives by name, used by callers
  /// that compose computations from strings. Unknown names throw
  /// UnsupportedPrimitive.
  Var apply(std::string_view name, std::span<const Var> args);

  Var push(Op op, std::vector<std::uint32_t> parents, Vector value);
  Var push_custom(std::vector<std::uint32_t> parents, Vector value,
                  CustomBackward backward);

  /// Accumulates adjoints from `output` seeded with `seed` (size-1 output).
  void backward(Var output, double seed = 1.0);
  /// Accumulates adjoints from a vector-valued output.
  void backward(Var output, const Vector& seed);
  /// d output / d input for every registered input, in registration order.
  std::vector<Vector> gradient(Var output, double seed = 1.0);

  /// Adjoint of a node after backward(); zero vector when untouched.
  Vector adjoint(Var v) const;
  /// Moves the adjoint out of the tape (zero vector if never reached).
  Vector take_adjoint(Var v);
  void clear_adjoints();

  /// Recomputes every non-leaf value from the recorded leaves. Returns true
  /// when all recomputed values are bit-identical to the recorded ones.
  bool replay();

  std::size_t node_count() const { return nodes_.size(); }
  /// Number of doubles held as node values (owned leaves and results).
  std::size_t value_entries() const { return value_entries_; }
  const std::vector<std::uint32_t>& inputs() const { return inputs_; }

  const Vector& value(std::uint32_t id) const;

  // Payload setters used by primitive builders.
  struct Payload {
    double scalar = 0.0;
    Vector vec;
    std::shared_ptr<const Matrix> dense;
    std::shared_ptr<const SparseMatrix> sparse;
    std::vector<int> index;
    Eigen::Index rows = 0, cols = 0, offset = 0;
  };
  Var push_with(Op op, std::vector<std::uint32_t> parents, Payload payload);

 private:
  struct Node {
    Op op = Op::Leaf;
    std::vector<std::uint32_t> parents;
    Vector value;
    const Vector* external = nullptr;
    Payload payload;
    CustomBackward custom;
  };

  Vector evaluate(const Node& node) const;
  void backward_node(std::uint32_t id, const Vector& g);
  Vector& adjoint_slot(std::uint32_t id);

  std::deque<Node> nodes_;
  std::vector<Vector> adjoints_;
  std::vector<std::uint32_t> inputs_;
  std::size_t value_entries_ = 0;
};

// Elementwise arithmetic; operands must match in size unless one side is a
// double constant.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator*(const Var& a, double c);
Var operator*(double c, const Var& a);
Var operator+(const Var& a, double c);
Var operator-(const Var& a, double c);

Var add_const(const Var& a, const Vector& c);
Var mul_const(const Var& a, const Vector& c);
Var pow(const Var& a, const Vector& exponent);
Var pow(const Var& a, double exponent);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var square(const Var& a);
Var fourth(const Var& a);
Var sum(const Var& a);
Var matvec(std::shared_ptr<const Matrix> m, const Var& x);
Var matvec(std::shared_ptr<const SparseMatrix> m, const Var& x);
/// W is stored column-major as a flat vector of rows*cols entries.
Var affine(const Var& w, const Var& b, const Var& x, Eigen::Index rows,
           Eigen::Index cols);
Var gather(const Var& x, std::vector<int> index);
Var segment_sum(const Var& x, std::vector<int> index, Eigen::Index segments);
Var slice(const Var& x, Eigen::Index offset, Eigen::Index length);
Var concat(std::span<const Var> parts);
Var round_straight_through(const Var& x);

// Plain-value counterparts of the elementwise primitives, so code templated
// on the value type evaluates identically with and without a tape.
inline Vector fourth(const Vector& x) {
  return x.array().square().square().matrix();
}
inline Vector cwise_mul(const Vector& a, const Vector& b) {
  return a.cwiseProduct(b);
}
inline Var cwise_mul(const Var& a, const Var& b) { return a * b; }
inline Vector cwise_mul_const(const Vector& a, const Vector& b) {
  return a.cwiseProduct(b);
}
inline Var cwise_mul_const(const Var& a, const Vector& b) {
  return mul_const(a, b);
}
inline Vector add_const(const Vector& a, const Vector& c) { return a + c; }
inline Vector matvec(const std::shared_ptr<const SparseMatrix>& m,
                     const Vector& x) {
  return *m * x;
}
inline Vector matvec(const std::shared_ptr<const Matrix>& m, const Vector& x) {
  return *m * x;
}
Vector gather(const Vector& x, const std::vector<int>& index);
Vector pow(const Vector& a, const Vector& exponent);

inline const Vector& value_of(const Vector& v) { return v; }
inline const Vector& value_of(const Var& v) { return v.value(); }

// ---------------------------------------------------------------------------
// Rollouts

using StepFn =
    std::function<Var(Tape&, const Var& state, std::span<const Var> params)>;

struct RolloutStats {
  /// Peak number of state-sized vectors held for the backward pass, in
  /// doubles: checkpoints plus the longest recomputed segment.
  std::size_t peak_state_entries = 0;
  /// Same count for recording every step on one tape.
  std::size_t full_state_entries = 0;
  /// Largest tape (in value doubles) alive at any point during backward.
  std::size_t peak_tape_entries = 0;
};

/// Records n_steps applications of `step` directly on `tape`.
Var full_rollout(Tape& tape, const StepFn& step, const Var& initial,
                 std::span<const Var> params, int n_steps);

/// Same value and gradients as full_rollout, but only states at every
/// `checkpoint_every`-th step are kept; segments are re-recorded on a
/// scratch tape during the backward pass.
Var checkpointed_rollout(Tape& tape, const StepFn& step, const Var& initial,
                         std::span<const Var> params, int n_steps,
                         int checkpoint_every, RolloutStats* stats = nullptr);

}  // namespace adaptherm::ad
