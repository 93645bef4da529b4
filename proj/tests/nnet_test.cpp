#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "adaptherm/error.hpp"
#include "adaptherm/nnet.hpp"
#include "support.hpp"

namespace adaptherm {
namespace {

MlpSpec small_spec(Activation act = Activation::Relu,
                   OutputActivation out = OutputActivation::Identity) {
  MlpSpec s;
  s.input_dim = 5;
  s.hidden_layers = 2;
  s.hidden_width = 7;
  s.output_dim = 3;
  s.activation = act;
  s.output_activation = out;
  return s;
}

// Plain forward written out with explicit loops.
ad::Vector reference_forward(const MlpParams& p, const ad::Vector& x) {
  ad::Vector a = x;
  for (int l = 0; l < p.spec.layers(); ++l) {
    const int rows = p.spec.fan_out(l), cols = p.spec.fan_in(l);
    ad::Vector z(rows);
    for (int r = 0; r < rows; ++r) {
      double acc = p.biases[l][r];
      for (int c = 0; c < cols; ++c) acc += p.weights[l][c * rows + r] * a[c];
      z[r] = acc;
    }
    const bool last = l == p.spec.hidden_layers;
    for (int r = 0; r < rows; ++r) {
      if (!last) {
        z[r] = p.spec.activation == Activation::Relu ? std::max(0.0, z[r]) : std::tanh(z[r]);
      } else if (p.spec.output_activation == OutputActivation::Sigmoid) {
        z[r] = 1.0 / (1.0 + std::exp(-z[r]));
      }
    }
    a = z;
  }
  return a;
}

TEST(Mlp, ParameterCountAndShapes) {
  const MlpSpec s = small_spec();
  EXPECT_EQ(s.parameter_count(), 5u * 7 + 7 + 7 * 7 + 7 + 7 * 3 + 3);
  const MlpParams p = init_mlp(s, 1);
  ASSERT_EQ(p.weights.size(), 3u);
  EXPECT_EQ(p.weights[2].size(), 21);
  EXPECT_EQ(p.weight(0).rows(), 7);
  EXPECT_EQ(p.weight(0).cols(), 5);
  MlpSpec bad = s;
  bad.hidden_width = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Mlp, HeInitialisationStatistics) {
  MlpSpec s;
  s.input_dim = 400;
  s.hidden_layers = 1;
  s.hidden_width = 300;
  s.output_dim = 2;
  const MlpParams p = init_mlp(s, 7);
  const ad::Vector& w = p.weights[0];
  const double mean = w.mean();
  const double var = (w.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 0.002);
  EXPECT_NEAR(var, 2.0 / 400.0, 0.05 * 2.0 / 400.0);
  EXPECT_TRUE(p.biases[0].isZero());
  EXPECT_TRUE(init_mlp(s, 7).weights[0] == w);
  EXPECT_FALSE(init_mlp(s, 8).weights[0] == w);
}

TEST(Mlp, ForwardMatchesLoopsAndTape) {
  std::mt19937_64 rng(2);
  for (auto act : {Activation::Relu, Activation::Tanh}) {
    for (auto out : {OutputActivation::Identity, OutputActivation::Sigmoid}) {
      const MlpParams p = init_mlp(small_spec(act, out), 3);
      const ad::Vector x = test::random_vector(rng, 5, -1, 1);
      const ad::Vector y = forward(p, x);
      EXPECT_LE((y - reference_forward(p, x)).cwiseAbs().maxCoeff(), 1e-14);
      ad::Tape tape;
      const auto vars = attach(tape, p);
      EXPECT_TRUE(forward(p, vars, tape.constant(x)).value() == y);
    }
  }
}

TEST(Mlp, ParameterGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(9);
  MlpParams p = init_mlp(small_spec(Activation::Tanh, OutputActivation::Sigmoid), 5);
  const ad::Vector x = test::random_vector(rng, 5, -1, 1);
  const ad::Vector target = test::random_vector(rng, 3, 0, 1);
  auto loss_value = [&](const MlpParams& q) {
    return (forward(q, x) - target).squaredNorm();
  };
  ad::Tape tape;
  const auto vars = attach(tape, p);
  const ad::Var y = forward(p, vars, tape.constant(x));
  tape.backward(ad::sum(ad::square(ad::add_const(y, -target))));
  const auto grads = parameter_gradients(tape, vars);
  auto tensors = p.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    for (Eigen::Index i = 0; i < tensors[k]->size(); ++i) {
      const double keep = (*tensors[k])[i];
      const double h = 1e-6;
      (*tensors[k])[i] = keep + h;
      const double up = loss_value(p);
      (*tensors[k])[i] = keep - h;
      const double down = loss_value(p);
      (*tensors[k])[i] = keep;
      const double fd = (up - down) / (2 * h);
      const double g = grads[k][i];
      const double diff = std::abs(g - fd);
      EXPECT_TRUE(diff <= 1e-6 || diff <= 1e-4 * std::max(std::abs(g), std::abs(fd)))
          << "tensor " << k << " entry " << i << ": " << g << " vs " << fd;
    }
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  MlpParams p = init_mlp(small_spec(), 1);
  const MlpParams before = p;
  AdamState st(p, AdamOptions{.lr = 0.01});
  std::vector<ad::Vector> g;
  for (const auto* t : p.tensors()) g.push_back(ad::Vector::Constant(t->size(), -3.0));
  adam_update(p, st, g);
  // bias-corrected first step is lr * sign(g) up to epsilon
  EXPECT_NEAR(p.weights[0][0] - before.weights[0][0], 0.01, 1e-9);
  EXPECT_NEAR(p.biases[1][2] - before.biases[1][2], 0.01, 1e-9);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, RejectsNonFiniteGradients) {
  MlpParams p = init_mlp(small_spec(), 1);
  AdamState st(p, AdamOptions{});
  std::vector<ad::Vector> g;
  for (const auto* t : p.tensors()) g.push_back(ad::Vector::Zero(t->size()));
  g[1][0] = std::nan("");
  EXPECT_THROW(adam_update(p, st, g), NumericError);
}

TEST(Adam, TrainStepFitsALinearMap) {
  MlpSpec s;
  s.input_dim = 2;
  s.hidden_layers = 1;
  s.hidden_width = 16;
  s.output_dim = 1;
  MlpParams p = init_mlp(s, 4);
  AdamState st(p, AdamOptions{.lr = 0.01});
  std::mt19937_64 rng(1);
  std::vector<ad::Vector> xs;
  for (int k = 0; k < 32; ++k) xs.push_back(test::random_vector(rng, 2, -1, 1));
  auto loss_fn = [&](ad::Tape& tape, std::span<const ad::Var> vars) {
    ad::Var total;
    for (const auto& x : xs) {
      const ad::Var y = forward(p, vars, tape.constant(x));
      const ad::Var e = ad::square(ad::add_const(y, ad::Vector::Constant(1, -(2 * x[0] - x[1]))));
      total = total.valid() ? total + e : e;
    }
    return total * (1.0 / xs.size());
  };
  const double first = train_step(p, st, loss_fn);
  double last = first;
  for (int it = 0; it < 300; ++it) last = train_step(p, st, loss_fn);
  EXPECT_LT(last, 0.02 * first);
}

TEST(Mlp, CheckpointRoundTrip) {
  const MlpParams p = init_mlp(small_spec(Activation::Tanh, OutputActivation::Sigmoid), 6);
  std::stringstream buf;
  write_mlp(buf, p);
  const MlpParams q = read_mlp(buf);
  EXPECT_EQ(q.spec, p.spec);
  for (std::size_t k = 0; k < p.weights.size(); ++k) {
    EXPECT_TRUE(q.weights[k] == p.weights[k]);
    EXPECT_TRUE(q.biases[k] == p.biases[k]);
  }
  std::stringstream bad("ATNX");
  EXPECT_THROW(read_mlp(bad), FormatError);
  std::stringstream full;
  write_mlp(full, p);
  std::stringstream cut(full.str().substr(0, full.str().size() / 2));
  EXPECT_THROW(read_mlp(cut), FormatError);
}

}  // namespace
}  // namespace adaptherm
