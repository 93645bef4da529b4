#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "adaptherm/autodiff.hpp"
#include "adaptherm/physics_model.hpp"
#include "adaptherm/solver.hpp"
#include "support.hpp"

namespace adaptherm::ad {
namespace {

using Fn = std::function<Var(Tape&, const Var&)>;

// Relative error with a 1e-6 absolute floor: passes at <= 1e-4.
double relative_error(double a, double b) {
  const double diff = std::abs(a - b);
  if (diff <= 1e-6) return 0.0;
  return diff / std::max(std::abs(a), std::abs(b));
}

/// Reverse-mode gradient of sum(r .* f(x)) against central differences.
void check_gradient(const Fn& f, Eigen::Index n, double lo, double hi,
                    std::uint64_t seed, const char* what) {
  std::mt19937_64 rng(seed);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = adaptherm::test::random_vector(rng, n, lo, hi);
    Vector r;
    {
      Tape probe;
      r = adaptherm::test::random_vector(rng, f(probe, probe.input(x)).size(), -1, 1);
    }
    Tape tape;
    const Var xv = tape.input(x);
    const Var loss = sum(mul_const(f(tape, xv), r));
    const Vector g = tape.gradient(loss)[0];
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
      auto eval = [&](double delta) {
        Tape t;
        Vector xp = x;
        xp[i] += delta;
        return f(t, t.input(xp)).value().dot(r);
      };
      const double fd = (eval(h) - eval(-h)) / (2 * h);
      EXPECT_LE(relative_error(g[i], fd), 1e-4)
          << what << " trial " << trial << " entry " << i << ": " << g[i] << " vs " << fd;
    }
  }
}

TEST(GradientHarness, Elementwise) {
  Vector c = Vector::LinSpaced(6, -1.0, 2.0);
  check_gradient([](Tape&, const Var& x) { return x + x * x; }, 6, -2, 2, 1, "add/mul");
  check_gradient([](Tape&, const Var& x) { return x - (-x) * 3.0; }, 6, -2, 2, 2, "sub/neg/scale");
  check_gradient([](Tape&, const Var& x) { return x / (x * x + 1.0); }, 6, -2, 2, 3, "div");
  check_gradient([c](Tape&, const Var& x) { return mul_const(add_const(x, c), c); }, 6, -2, 2, 4, "const");
  check_gradient([](Tape&, const Var& x) { return pow(x, Vector::LinSpaced(6, -1.5, 3.0)); }, 6, 0.5, 2, 5, "pow");
  check_gradient([](Tape&, const Var& x) { return exp(x) + log(x); }, 6, 0.2, 2, 6, "exp/log");
  check_gradient([](Tape&, const Var& x) { return tanh(x) + sigmoid(x); }, 6, -3, 3, 7, "tanh/sigmoid");
  check_gradient([](Tape&, const Var& x) { return relu(x); }, 6, -3, 3, 8, "relu");
  check_gradient([](Tape&, const Var& x) { return square(x) + fourth(x); }, 6, -2, 2, 9, "square/fourth");
  check_gradient([](Tape&, const Var& x) { return sum(x * x); }, 6, -2, 2, 10, "sum");
}

TEST(GradientHarness, LinearAlgebraAndIndexing) {
  auto dense = std::make_shared<const Matrix>(Matrix::Random(4, 6));
  auto sparse = std::make_shared<SparseMatrix>(5, 6);
  sparse->insert(0, 1) = 2.0;
  sparse->insert(2, 5) = -1.5;
  sparse->insert(4, 0) = 0.5;
  sparse->makeCompressed();
  std::shared_ptr<const SparseMatrix> sp = sparse;
  check_gradient([dense](Tape&, const Var& x) { return matvec(dense, square(x)); }, 6, -2, 2, 11, "matvec");
  check_gradient([sp](Tape&, const Var& x) { return matvec(sp, fourth(x)); }, 6, -2, 2, 12, "sparse");
  check_gradient([](Tape&, const Var& x) { return gather(x, {0, 0, 3, 5, 2}) * 2.0; }, 6, -2, 2, 13, "gather");
  check_gradient([](Tape&, const Var& x) { return segment_sum(square(x), {0, 1, 1, 2, 0, 2}, 3); }, 6, -2, 2, 14, "segment");
  check_gradient([](Tape&, const Var& x) { return square(slice(x, 2, 3)); }, 6, -2, 2, 15, "slice");
  check_gradient([](Tape&, const Var& x) {
    const std::array<Var, 3> parts{x, exp(x), slice(x, 1, 2)};
    return concat(parts);
  }, 6, -2, 2, 16, "concat");
  // affine: W (2x3) and b packed into x as [W | b | input]
  check_gradient([](Tape&, const Var& x) {
    return tanh(affine(slice(x, 0, 6), slice(x, 6, 2), slice(x, 8, 3), 2, 3));
  }, 11, -1, 1, 17, "affine");
}

TEST(GradientHarness, SolverStepAndResamplers) {
  const PhysicsModel& ph = adaptherm::test::default_physics();
  const auto cm = ph.coarse(Nodalization::uniform(11, 2));
  const ThermalSystem& sys = cm->system;
  const Eigen::Index n = static_cast<Eigen::Index>(sys.size());
  const Vector q = Vector::Constant(n, 3.0);
  // temperatures through one explicit step
  check_gradient([&](Tape& t, const Var& x) {
    const auto c = node_coefficients(sys, t.constant(sys.nodes_vector()));
    return step_temperatures(sys, c, t.constant(q), x);
  }, n, 250, 350, 18, "step/T");
  // node counts through the coefficients
  check_gradient([&](Tape& t, const Var& x) {
    const auto c = node_coefficients(sys, x);
    return step_temperatures(sys, c, loads_from_flux(c, Vector::Constant(n, 200.0)),
                             t.constant(Vector::Constant(n, 300.0)));
  }, 11, 2.0, 3.0, 19, "step/n");
  // spline upsampling operator
  check_gradient([&](Tape&, const Var& x) {
    return matvec(cm->resampler.temp_up, square(x));
  }, n, -2, 2, 20, "upsample");
}

TEST(Autodiff, LinearityOfGradients) {
  std::mt19937_64 rng(4);
  const Vector x = adaptherm::test::random_vector(rng, 5, 0.5, 2.0);
  auto f = [](const Var& v) { return sum(exp(v) * v); };
  auto g = [](const Var& v) { return sum(fourth(v) / (v + 1.0)); };
  const double a = 1.7, b = -0.3;
  Tape t1, t2, t3;
  const Vector gf = t1.gradient(f(t1.input(x)))[0];
  const Vector gg = t2.gradient(g(t2.input(x)))[0];
  const Var x3 = t3.input(x);
  const Vector gc = t3.gradient(f(x3) * a + g(x3) * b)[0];
  EXPECT_LE((gc - (a * gf + b * gg)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Autodiff, DeterministicGradients) {
  auto run = [] {
    Tape t;
    const Var x = t.input(Vector::LinSpaced(50, 0.1, 3.0));
    return t.gradient(sum(log(x) * tanh(x) + fourth(x)))[0];
  };
  EXPECT_TRUE(run() == run());
}

TEST(Autodiff, ReplayReproducesValues) {
  Tape t;
  const Var x = t.input(Vector::LinSpaced(7, -1.0, 1.0));
  const Var y = sum(sigmoid(x) * exp(x) + square(x));
  EXPECT_TRUE(t.replay());
  EXPECT_EQ(y.size(), 1);
}

TEST(Autodiff, ErrorsAreTyped) {
  Tape t;
  const Var x = t.input(Vector::Ones(3));
  const std::array<Var, 1> args{x};
  EXPECT_THROW(t.apply("erf", args), UnsupportedPrimitive);
  EXPECT_THROW(t.backward(x), ShapeError);
  EXPECT_THROW(x + t.input(Vector::Ones(2)), ShapeError);
}

TEST(Autodiff, StraightThroughRoundsValuePassesGradient) {
  Tape t;
  const Var x = t.input(Vector::LinSpaced(3, 2.2, 4.9));
  const Var y = round_straight_through(x);
  EXPECT_EQ(y.value()[0], 2.0);
  EXPECT_EQ(y.value()[2], 5.0);
  const Vector g = t.gradient(sum(y * 2.0))[0];
  EXPECT_TRUE(g == Vector::Constant(3, 2.0));
}

TEST(Autodiff, CheckpointedRolloutMatchesFull) {
  const PhysicsModel& ph = adaptherm::test::default_physics();
  const ThermalSystem& sys = ph.coarse(Nodalization::uniform(11, 3))->system;
  const Eigen::Index n = static_cast<Eigen::Index>(sys.size());
  const StepFn step = [&sys](Tape&, const Var& t, std::span<const Var> p) {
    NodeCoefficients<Var> c;
    c.dt_over_c = p[0];
    c.g_u = p[1];
    c.rad_area = p[2];
    return step_temperatures(sys, c, p[3], t);
  };
  // non-uniform fields, otherwise the count gradient vanishes analytically
  std::mt19937_64 rng(8);
  const Vector flux = adaptherm::test::random_vector(rng, n, 50.0, 250.0);
  const Vector init = adaptherm::test::random_vector(rng, n, 270.0, 330.0);
  auto run = [&](bool checkpointed, RolloutStats* stats) {
    Tape tape;
    const auto c = node_coefficients(sys, tape.input(sys.nodes_vector()));
    const Var loads = loads_from_flux(c, flux);
    const std::vector<Var> params{c.dt_over_c, c.g_u, c.rad_area, loads};
    const Var t0 = tape.constant(init);
    const Var end = checkpointed
                        ? checkpointed_rollout(tape, step, t0, params, 120, 25, stats)
                        : full_rollout(tape, step, t0, params, 120);
    const Var loss = sum(square(end));
    return std::pair{end.value(), tape.gradient(loss)[0]};
  };
  RolloutStats stats;
  const auto [v_full, g_full] = run(false, nullptr);
  const auto [v_ck, g_ck] = run(true, &stats);
  EXPECT_TRUE(v_full == v_ck);
  EXPECT_LE((g_full - g_ck).cwiseAbs().maxCoeff(), 1e-12 * g_full.cwiseAbs().maxCoeff());
  EXPECT_LT(stats.peak_state_entries, stats.full_state_entries / 2);
}

}  // namespace
}  // namespace adaptherm::ad
