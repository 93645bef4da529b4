#include "adaptherm/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace adaptherm::ad {

namespace {

void require_same_size(const Var& a, const Var& b, Op op) {
  if (a.tape() != b.tape()) {
    throw ShapeError(std::string(op_name(op)) + ": operands on different tapes");
  }
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op_name(op)) + ": size mismatch " +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}

Var unary(Op op, const Var& a, Tape::Payload payload = {}) {
  return a.tape()->push_with(op, {a.id()}, std::move(payload));
}

Var binary(Op op, const Var& a, const Var& b) {
  require_same_size(a, b, op);
  return a.tape()->push_with(op, {a.id(), b.id()}, {});
}

double sigmoid_scalar(double x) {
  // Split on sign so large |x| never overflows exp.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::Scale: return "scale";
    case Op::AddConst: return "add_const";
    case Op::MulConst: return "mul_const";
    case Op::Pow: return "pow";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Tanh: return "tanh";
    case Op::Relu: return "relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Square: return "square";
    case Op::Fourth: return "fourth";
    case Op::Sum: return "sum";
    case Op::MatVec: return "matvec";
    case Op::SparseMatVec: return "sparse_matvec";
    case Op::Affine: return "affine";
    case Op::Gather: return "gather";
    case Op::SegmentSum: return "segment_sum";
    case Op::Slice: return "slice";
    case Op::Concat: return "concat";
    case Op::StraightThrough: return "round_straight_through";
    case Op::Custom: return "custom";
  }
  return "unknown";
}

const Vector& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Vector& v = value();
  if (v.size() != 1) {
    throw ShapeError("scalar() on a vector of size " + std::to_string(v.size()));
  }
  return v[0];
}

// ---------------------------------------------------------------------------
// Tape

const Vector& Tape::value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Var Tape::input(Vector value) {
  Var v = constant(std::move(value));
  inputs_.push_back(v.id());
  return v;
}

Var Tape::constant(Vector value) {
  Node n;
  n.op = Op::Leaf;
  value_entries_ += static_cast<std::size_t>(value.size());
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::external(const Vector& storage) {
  Node n;
  n.op = Op::Leaf;
  n.external = &storage;
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::push(Op op, std::vector<std::uint32_t> parents, Vector value) {
  Node n;
  n.op = op;
  n.parents = std::move(parents);
  value_entries_ += static_cast<std::size_t>(value.size());
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::push_with(Op op, std::vector<std::uint32_t> parents,
                    Payload payload) {
  Node n;
  n.op = op;
  n.parents = std::move(parents);
  n.payload = std::move(payload);
  n.value = evaluate(n);
  value_entries_ += static_cast<std::size_t>(n.value.size());
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::push_custom(std::vector<std::uint32_t> parents, Vector value,
                      CustomBackward backward) {
  Var v = push(Op::Custom, std::move(parents), std::move(value));
  nodes_[v.id()].custom = std::move(backward);
  return v;
}

Var Tape::apply(std::string_view name, std::span<const Var> args) {
  auto need = [&](std::size_t k) {
    if (args.size() != k) {
      throw ShapeError(std::string(name) + ": expects " + std::to_string(k) +
                       " operands");
    }
  };
  if (name == "add") { need(2); return args[0] + args[1]; }
  if (name == "sub") { need(2); return args[0] - args[1]; }
  if (name == "mul") { need(2); return args[0] * args[1]; }
  if (name == "div") { need(2); return args[0] / args[1]; }
  if (name == "neg") { need(1); return -args[0]; }
  if (name == "exp") { need(1); return exp(args[0]); }
  if (name == "log") { need(1); return log(args[0]); }
  if (name == "tanh") { need(1); return tanh(args[0]); }
  if (name == "relu") { need(1); return relu(args[0]); }
  if (name == "sigmoid") { need(1); return sigmoid(args[0]); }
  if (name == "square") { need(1); return square(args[0]); }
  if (name == "fourth") { need(1); return fourth(args[0]); }
  if (name == "sum") { need(1); return sum(args[0]); }
  throw UnsupportedPrimitive(name);
}

Vector Tape::evaluate(const Node& n) const {
  auto in = [&](std::size_t k) -> const Vector& { return value(n.parents[k]); };
  const Payload& p = n.payload;
  switch (n.op) {
    case Op::Leaf:
    case Op::Custom:
      return n.external ? *n.external : n.value;
    case Op::Add: return in(0) + in(1);
    case Op::Sub: return in(0) - in(1);
    case Op::Mul: return in(0).cwiseProduct(in(1));
    case Op::Div: return in(0).cwiseQuotient(in(1));
    case Op::Neg: return -in(0);
    case Op::Scale: return in(0) * p.scalar;
    case Op::AddConst: return in(0) + p.vec;
    case Op::MulConst: return in(0).cwiseProduct(p.vec);
    case Op::Pow: return pow(in(0), p.vec);
    case Op::Exp: return in(0).array().exp().matrix();
    case Op::Log: return in(0).array().log().matrix();
    case Op::Tanh: return in(0).array().tanh().matrix();
    case Op::Relu: return in(0).cwiseMax(0.0);
    case Op::Sigmoid: return in(0).unaryExpr(&sigmoid_scalar);
    case Op::Square: return in(0).array().square().matrix();
    case Op::Fourth: return fourth(in(0));
    case Op::Sum: return Vector::Constant(1, in(0).sum());
    case Op::MatVec: return *p.dense * in(0);
    case Op::SparseMatVec: return *p.sparse * in(0);
    case Op::Affine: {
      Eigen::Map<const Matrix> w(in(0).data(), p.rows, p.cols);
      Vector y = in(1);
      y.noalias() += w * in(2);
      return y;
    }
    case Op::Gather: return gather(in(0), p.index);
    case Op::SegmentSum: {
      Vector y = Vector::Zero(p.rows);
      const Vector& x = in(0);
      for (Eigen::Index i = 0; i < x.size(); ++i) y[p.index[i]] += x[i];
      return y;
    }
    case Op::Slice: return in(0).segment(p.offset, p.rows);
    case Op::Concat: {
      Eigen::Index total = 0;
      for (std::size_t k = 0; k < n.parents.size(); ++k) total += in(k).size();
      Vector y(total);
      Eigen::Index at = 0;
      for (std::size_t k = 0; k < n.parents.size(); ++k) {
        y.segment(at, in(k).size()) = in(k);
        at += in(k).size();
      }
      return y;
    }
    case Op::StraightThrough: return in(0).array().round().matrix();
  }
  throw UnsupportedPrimitive(op_name(n.op));
}

Vector& Tape::adjoint_slot(std::uint32_t id) {
  Vector& a = adjoints_[id];
  if (a.size() == 0) a = Vector::Zero(value(id).size());
  return a;
}

void Tape::backward_node(std::uint32_t id, const Vector& g) {
  const Node& n = nodes_[id];
  const Payload& p = n.payload;
  auto in = [&](std::size_t k) -> const Vector& { return value(n.parents[k]); };
  auto acc = [&](std::size_t k) -> Vector& { return adjoint_slot(n.parents[k]); };
  const Vector& y = value(id);

  switch (n.op) {
    case Op::Leaf:
      return;
    case Op::Add:
      acc(0) += g;
      acc(1) += g;
      return;
    case Op::Sub:
      acc(0) += g;
      acc(1) -= g;
      return;
    case Op::Mul:
      acc(0) += g.cwiseProduct(in(1));
      acc(1) += g.cwiseProduct(in(0));
      return;
    case Op::Div: {
      const Vector gb = g.cwiseQuotient(in(1));
      acc(0) += gb;
      acc(1) -= gb.cwiseProduct(y);
      return;
    }
    case Op::Neg: acc(0) -= g; return;
    case Op::Scale: acc(0) += g * p.scalar; return;
    case Op::AddConst: acc(0) += g; return;
    case Op::MulConst: acc(0) += g.cwiseProduct(p.vec); return;
    case Op::Pow: {
      const Vector& x = in(0);
      Vector d(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        d[i] = p.vec[i] == 0.0 ? 0.0 : p.vec[i] * std::pow(x[i], p.vec[i] - 1.0);
      }
      acc(0) += g.cwiseProduct(d);
      return;
    }
    case Op::Exp: acc(0) += g.cwiseProduct(y); return;
    case Op::Log: acc(0) += g.cwiseQuotient(in(0)); return;
    case Op::Tanh:
      acc(0) += g.cwiseProduct((1.0 - y.array().square()).matrix());
      return;
    case Op::Relu: {
      const Vector& x = in(0);
      Vector& a = acc(0);
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0) a[i] += g[i];
      }
      return;
    }
    case Op::Sigmoid:
      acc(0) += g.cwiseProduct((y.array() * (1.0 - y.array())).matrix());
      return;
    case Op::Square: acc(0) += 2.0 * g.cwiseProduct(in(0)); return;
    case Op::Fourth: {
      const auto x = in(0).array();
      acc(0) += (4.0 * g.array() * x * x * x).matrix();
      return;
    }
    case Op::Sum: acc(0).array() += g[0]; return;
    case Op::MatVec: acc(0).noalias() += p.dense->transpose() * g; return;
    case Op::SparseMatVec: acc(0) += p.sparse->transpose() * g; return;
    case Op::Affine: {
      Vector& aw = acc(0);
      Eigen::Map<Matrix> dw(aw.data(), p.rows, p.cols);
      dw.noalias() += g * in(2).transpose();
      acc(1) += g;
      Eigen::Map<const Matrix> w(in(0).data(), p.rows, p.cols);
      acc(2).noalias() += w.transpose() * g;
      return;
    }
    case Op::Gather: {
      Vector& a = acc(0);
      for (Eigen::Index i = 0; i < g.size(); ++i) a[p.index[i]] += g[i];
      return;
    }
    case Op::SegmentSum: {
      Vector& a = acc(0);
      for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += g[p.index[i]];
      return;
    }
    case Op::Slice: acc(0).segment(p.offset, p.rows) += g; return;
    case Op::Concat: {
      Eigen::Index at = 0;
      for (std::size_t k = 0; k < n.parents.size(); ++k) {
        const Eigen::Index len = in(k).size();
        acc(k) += g.segment(at, len);
        at += len;
      }
      return;
    }
    case Op::StraightThrough: acc(0) += g; return;
    case Op::Custom: {
      std::vector<Vector> parent_adj;
      parent_adj.reserve(n.parents.size());
      for (std::size_t k = 0; k < n.parents.size(); ++k) {
        parent_adj.push_back(Vector::Zero(in(k).size()));
      }
      n.custom(g, parent_adj);
      for (std::size_t k = 0; k < n.parents.size(); ++k) acc(k) += parent_adj[k];
      return;
    }
  }
  throw UnsupportedPrimitive(op_name(n.op));
}

void Tape::backward(Var output, double seed) {
  if (output.size() != 1) {
    throw ShapeError("backward: output is not scalar (size " +
                     std::to_string(output.size()) + ")");
  }
  backward(output, Vector::Constant(1, seed));
}

void Tape::backward(Var output, const Vector& seed) {
  if (output.tape() != this) throw ShapeError("backward: Var from another tape");
  if (seed.size() != output.size()) throw ShapeError("backward: seed size mismatch");
  adjoints_.resize(nodes_.size());
  adjoint_slot(output.id()) += seed;
  for (std::int64_t id = output.id(); id >= 0; --id) {
    const auto uid = static_cast<std::uint32_t>(id);
    if (adjoints_[uid].size() == 0 || nodes_[uid].op == Op::Leaf) continue;
    // Copy: backward_node may grow adjoint slots of parents only, but the
    // reference must not alias a parent slot.
    const Vector g = adjoints_[uid];
    backward_node(uid, g);
  }
}

std::vector<Vector> Tape::gradient(Var output, double seed) {
  clear_adjoints();
  backward(output, seed);
  std::vector<Vector> grads;
  grads.reserve(inputs_.size());
  for (auto id : inputs_) grads.push_back(adjoint({this, id}));
  return grads;
}

Vector Tape::adjoint(Var v) const {
  if (v.id() < adjoints_.size() && adjoints_[v.id()].size() != 0) {
    return adjoints_[v.id()];
  }
  return Vector::Zero(v.size());
}

Vector Tape::take_adjoint(Var v) {
  if (v.id() < adjoints_.size() && adjoints_[v.id()].size() != 0) {
    return std::move(adjoints_[v.id()]);
  }
  return Vector::Zero(v.size());
}

void Tape::clear_adjoints() { adjoints_.clear(); }

bool Tape::replay() {
  bool identical = true;
  for (auto& n : nodes_) {
    if (n.op == Op::Leaf || n.op == Op::Custom) continue;
    Vector v = evaluate(n);
    if (v.size() != n.value.size() ||
        std::memcmp(v.data(), n.value.data(), sizeof(double) * v.size()) != 0) {
      identical = false;
    }
    n.value = std::move(v);
  }
  return identical;
}

// ---------------------------------------------------------------------------
// Primitive builders

Var operator+(const Var& a, const Var& b) { return binary(Op::Add, a, b); }
Var operator-(const Var& a, const Var& b) { return binary(Op::Sub, a, b); }
Var operator*(const Var& a, const Var& b) { return binary(Op::Mul, a, b); }
Var operator/(const Var& a, const Var& b) { return binary(Op::Div, a, b); }
Var operator-(const Var& a) { return unary(Op::Neg, a); }

Var operator*(const Var& a, double c) {
  Tape::Payload p;
  p.scalar = c;
  return unary(Op::Scale, a, std::move(p));
}
Var operator*(double c, const Var& a) { return a * c; }
Var operator+(const Var& a, double c) {
  return add_const(a, Vector::Constant(a.size(), c));
}
Var operator-(const Var& a, double c) { return a + (-c); }

Var add_const(const Var& a, const Vector& c) {
  if (c.size() != a.size()) throw ShapeError("add_const: size mismatch");
  Tape::Payload p;
  p.vec = c;
  return unary(Op::AddConst, a, std::move(p));
}

Var mul_const(const Var& a, const Vector& c) {
  if (c.size() != a.size()) throw ShapeError("mul_const: size mismatch");
  Tape::Payload p;
  p.vec = c;
  return unary(Op::MulConst, a, std::move(p));
}

Vector pow(const Vector& a, const Vector& exponent) {
  Vector y(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) y[i] = std::pow(a[i], exponent[i]);
  return y;
}

Var pow(const Var& a, const Vector& exponent) {
  if (exponent.size() != a.size()) throw ShapeError("pow: size mismatch");
  Tape::Payload p;
  p.vec = exponent;
  return unary(Op::Pow, a, std::move(p));
}
Var pow(const Var& a, double exponent) {
  return pow(a, Vector::Constant(a.size(), exponent));
}

Var exp(const Var& a) { return unary(Op::Exp, a); }
Var log(const Var& a) { return unary(Op::Log, a); }
Var tanh(const Var& a) { return unary(Op::Tanh, a); }
Var relu(const Var& a) { return unary(Op::Relu, a); }
Var sigmoid(const Var& a) { return unary(Op::Sigmoid, a); }
Var square(const Var& a) { return unary(Op::Square, a); }
Var fourth(const Var& a) { return unary(Op::Fourth, a); }
Var sum(const Var& a) { return unary(Op::Sum, a); }

Var matvec(std::shared_ptr<const Matrix> m, const Var& x) {
  if (m->cols() != x.size()) throw ShapeError("matvec: size mismatch");
  Tape::Payload p;
  p.dense = std::move(m);
  return unary(Op::MatVec, x, std::move(p));
}

Var matvec(std::shared_ptr<const SparseMatrix> m, const Var& x) {
  if (m->cols() != x.size()) throw ShapeError("sparse matvec: size mismatch");
  Tape::Payload p;
  p.sparse = std::move(m);
  return unary(Op::SparseMatVec, x, std::move(p));
}

Var affine(const Var& w, const Var& b, const Var& x, Eigen::Index rows,
           Eigen::Index cols) {
  if (w.size() != rows * cols || b.size() != rows || x.size() != cols) {
    throw ShapeError("affine: expected W " + std::to_string(rows) + "x" +
                     std::to_string(cols) + ", got input of size " +
                     std::to_string(x.size()));
  }
  Tape::Payload p;
  p.rows = rows;
  p.cols = cols;
  return w.tape()->push_with(Op::Affine, {w.id(), b.id(), x.id()}, std::move(p));
}

Vector gather(const Vector& x, const std::vector<int>& index) {
  Vector y(static_cast<Eigen::Index>(index.size()));
  for (std::size_t i = 0; i < index.size(); ++i) y[i] = x[index[i]];
  return y;
}

Var gather(const Var& x, std::vector<int> index) {
  for (int i : index) {
    if (i < 0 || i >= x.size()) throw ShapeError("gather: index out of range");
  }
  Tape::Payload p;
  p.index = std::move(index);
  return unary(Op::Gather, x, std::move(p));
}

Var segment_sum(const Var& x, std::vector<int> index, Eigen::Index segments) {
  if (static_cast<Eigen::Index>(index.size()) != x.size()) {
    throw ShapeError("segment_sum: index size mismatch");
  }
  for (int i : index) {
    if (i < 0 || i >= segments) throw ShapeError("segment_sum: index out of range");
  }
  Tape::Payload p;
  p.index = std::move(index);
  p.rows = segments;
  return unary(Op::SegmentSum, x, std::move(p));
}

Var slice(const Var& x, Eigen::Index offset, Eigen::Index length) {
  if (offset < 0 || length < 0 || offset + length > x.size()) {
    throw ShapeError("slice: out of range");
  }
  Tape::Payload p;
  p.offset = offset;
  p.rows = length;
  return unary(Op::Slice, x, std::move(p));
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  std::vector<std::uint32_t> ids;
  for (const auto& v : parts) {
    if (v.tape() != parts[0].tape()) throw ShapeError("concat: mixed tapes");
    ids.push_back(v.id());
  }
  return parts[0].tape()->push_with(Op::Concat, std::move(ids), {});
}

Var round_straight_through(const Var& x) {
  return unary(Op::StraightThrough, x);
}

// ---------------------------------------------------------------------------
// Rollouts

Var full_rollout(Tape& tape, const StepFn& step, const Var& initial,
                 std::span<const Var> params, int n_steps) {
  Var state = initial;
  for (int k = 0; k < n_steps; ++k) state = step(tape, state, params);
  return state;
}

Var checkpointed_rollout(Tape& tape, const StepFn& step, const Var& initial,
                         std::span<const Var> params, int n_steps,
                         int checkpoint_every, RolloutStats* stats) {
  if (checkpoint_every < 1) {
    throw Error("checkpointed_rollout: checkpoint_every must be >= 1");
  }
  if (n_steps < 0) throw Error("checkpointed_rollout: negative step count");

  // Parameter values are read through the outer tape, which outlives the
  // backward pass that re-records segments.
  std::vector<const Vector*> param_values;
  for (const auto& p : params) param_values.push_back(&p.value());

  auto checkpoints = std::make_shared<std::vector<Vector>>();
  Vector state = initial.value();
  for (int k = 0; k < n_steps; ++k) {
    if (k % checkpoint_every == 0) checkpoints->push_back(state);
    Tape scratch;
    Var s = scratch.constant(state);
    std::vector<Var> p;
    for (const Vector* v : param_values) p.push_back(scratch.external(*v));
    state = step(scratch, s, p).value();
  }

  const auto state_size = static_cast<std::size_t>(initial.size());
  if (stats) {
    const std::size_t segment = static_cast<std::size_t>(
        std::min(checkpoint_every, std::max(n_steps, 0)));
    stats->peak_state_entries = (checkpoints->size() + segment) * state_size;
    stats->full_state_entries = static_cast<std::size_t>(n_steps) * state_size;
    stats->peak_tape_entries = 0;
  }
  if (n_steps == 0) return initial;

  std::vector<std::uint32_t> parents{initial.id()};
  for (const auto& p : params) parents.push_back(p.id());

  CustomBackward backward = [step, checkpoints, param_values, n_steps,
                             checkpoint_every, stats](
                                const Vector& adjoint_out,
                                std::span<Vector> parent_adj) {
    Vector g = adjoint_out;
    const int segments = static_cast<int>(checkpoints->size());
    for (int seg = segments - 1; seg >= 0; --seg) {
      const int begin = seg * checkpoint_every;
      const int end = std::min(n_steps, begin + checkpoint_every);
      Tape sub;
      Var s0 = sub.constant((*checkpoints)[seg]);
      std::vector<Var> p;
      for (const Vector* v : param_values) p.push_back(sub.external(*v));
      Var s = s0;
      for (int k = begin; k < end; ++k) s = step(sub, s, p);
      if (stats) {
        stats->peak_tape_entries =
            std::max(stats->peak_tape_entries, sub.value_entries());
      }
      sub.backward(s, g);
      g = sub.adjoint(s0);
      for (std::size_t k = 0; k < p.size(); ++k) {
        parent_adj[k + 1] += sub.adjoint(p[k]);
      }
    }
    parent_adj[0] += g;
  };
  return tape.push_custom(std::move(parents), std::move(state),
                          std::move(backward));
}

}  // namespace adaptherm::ad
