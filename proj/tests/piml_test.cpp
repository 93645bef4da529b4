#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "adaptherm/error.hpp"
#include "adaptherm/piml.hpp"
#include "support.hpp"

namespace adaptherm {
namespace {

TEST(Decode, SigmoidRangeAndRounding) {
  ad::Vector raw(4);
  raw << -50.0, 0.0, 50.0, std::log(0.3 / 0.7);
  const Nodalization n = decode_nodalization(raw);
  EXPECT_EQ(n.n, (std::vector<int>{2, 6, 10, 4}));  // 2 + 8 * 0.3 = 4.4
  raw[1] = std::nan("");
  EXPECT_THROW(decode_nodalization(raw), NumericError);
}

TEST(Loss, NodeWeightsAndBudgets) {
  const PhysicsModel& ph = test::default_physics();
  const LossParams p = LossParams::for_config(ph.config());
  EXPECT_EQ(p.dense_nodes, 830);
  EXPECT_EQ(p.kappa_l, 38.0);
  EXPECT_EQ(p.kappa_u, 306.0);
  const ad::Vector w = node_weights(ph.dense_layout(), p);
  EXPECT_EQ((w.array() == 10.0).count(), 30);  // protrusion + two gimbals
  EXPECT_EQ((w.array() == 1.0).count(), 800);
}

TEST(Loss, CostTermAnchors) {
  const LossParams p;
  EXPECT_EQ(cost_term(306, p), 1.0);
  EXPECT_EQ(cost_term(38, p), 1e-4);
  EXPECT_NEAR(cost_term(172, p), 1e-2, 1e-15);
  EXPECT_GT(cost_term(830, p), 1e4);
}

TEST(Loss, MseMatchesHandComputation) {
  LossParams p;
  p.dense_nodes = 3;
  const ad::Vector w = (ad::Vector(3) << 1.0, 1.0, 10.0).finished();
  const std::vector<ad::Vector> pred{(ad::Vector(3) << 1, 2, 3).finished()};
  const std::vector<ad::Vector> truth{(ad::Vector(3) << 0, 2, 1).finished()};
  EXPECT_DOUBLE_EQ(loss_mse(pred, truth, w, p), (1.0 + 0.0 + 40.0) / 3.0);
  EXPECT_THROW(loss_mse(pred, {}, w, p), ShapeError);
}

TEST(Models, ParseNames) {
  EXPECT_EQ(parse_model_kind("piml-a"), ModelKind::PimlA);
  EXPECT_EQ(parse_model_kind("piml-as"), ModelKind::PimlAS);
  EXPECT_EQ(parse_model_kind("ann"), ModelKind::Ann);
  EXPECT_EQ(parse_model_kind("lf"), ModelKind::LF);
  EXPECT_EQ(parse_model_kind("hf"), ModelKind::HF);
  EXPECT_THROW(parse_model_kind("cnn"), ConfigError);
  EXPECT_EQ(to_string(ModelKind::PimlAS), "piml-as");
}

class DefaultModels : public ::testing::Test {
 protected:
  static const Dataset& data() {
    static const Dataset d = [] {
      static const OrbitLoadModel loads(default_spacecraft(), 1);
      return generate_dataset(default_orbits(1, 2, 2), test::default_physics(), loads, 1);
    }();
    return d;
  }
  static ModelShape small() { return ModelShape{2, 32}; }
};

TEST_F(DefaultModels, ForcedDenseIsBitExactWithHighFidelity) {
  const PhysicsModel& ph = test::default_physics();
  const Nodalization dense = Nodalization::uniform(ph.surfaces(), kDenseNodes);
  const Model hf = make_model(ModelKind::HF, ph, 1, 1.0);
  for (const ModelKind kind : {ModelKind::PimlA, ModelKind::PimlAS}) {
    const Model m = make_model(kind, ph, 3, 100.0, small());
    for (const auto& s : data().samples) {
      const Prediction p = predict(m, ph, s, &dense);
      EXPECT_TRUE(p.shifts.isZero());
      EXPECT_TRUE(p.temperatures == ph.simulate_dense(s.loads, s.initial));
      EXPECT_TRUE(p.temperatures == predict(hf, ph, s).temperatures);
      EXPECT_TRUE(p.temperatures == s.target);
      EXPECT_EQ(p.total_nodes, 830);
    }
  }
}

TEST_F(DefaultModels, ShiftsAddPerSurfaceConstants) {
  const PhysicsModel& ph = test::default_physics();
  Model m = make_model(ModelKind::PimlAS, ph, 3, 100.0, small());
  const int last = m.net.spec.hidden_layers;
  const Eigen::Index s = static_cast<Eigen::Index>(ph.surfaces());
  for (Eigen::Index j = 0; j < s; ++j) m.net.biases[last][s + j] = 0.5 * j;
  const ThermalSample& sample = data().samples[0];
  const Prediction p = predict(m, ph, sample);
  const ad::Vector plain = ph.predict(p.nodalization, sample.loads, sample.initial);
  const NodeLayout& layout = ph.dense_layout();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    EXPECT_EQ(p.temperatures[k], plain[k] + 0.5 * static_cast<double>(layout.surface_of(i)));
  }
}

TEST_F(DefaultModels, HybridLossHasNonzeroGradients) {
  const PhysicsModel& ph = test::default_physics();
  const LossParams lp = LossParams::for_config(ph.config());
  const ad::Vector w = node_weights(ph.dense_layout(), lp);
  for (const ModelKind kind : {ModelKind::PimlA, ModelKind::PimlAS, ModelKind::Ann}) {
    const Model m = make_model(kind, ph, 5, 100.0, small());
    std::vector<ad::Vector> g;
    const SampleLoss l =
        sample_gradient(m, ph, data().samples[1], lp, w, TapeOptions{}, 1.0, g);
    EXPECT_TRUE(std::isfinite(l.L));
    EXPECT_NEAR(l.L, l.L_m + l.L_c, 1e-12 * l.L);
    ASSERT_EQ(g.size(), m.net.tensors().size());
    double norm = 0.0;
    for (const auto& v : g) norm += v.squaredNorm();
    EXPECT_GT(norm, 0.0) << to_string(kind);
    // value agrees with the tape-free evaluation
    EXPECT_EQ(sample_loss(m, ph, data().samples[1], lp, w, TapeOptions{}).L, l.L);
  }
}

TEST(DifferenceGradient, BiasGradientFollowsCentralDifferences) {
  const PhysicsModel& ph = test::toy_physics();
  const LossParams lp = LossParams::for_config(ph.config());
  const ad::Vector w = node_weights(ph.dense_layout(), lp);
  Model m = test::toy_model(ph, 1);
  const int last = m.net.spec.hidden_layers;
  m.net.biases[last] << 0.4, -1.2;  // counts near 6.8 and 3.8
  const ThermalSample sample = test::toy_sample(ph, 1);
  std::vector<ad::Vector> g;
  const SampleLoss l = sample_gradient(m, ph, sample, lp, w, TapeOptions{}, 1.0, g);

  const ad::Vector raw = transfer(m, sample.loads, 2).raw;
  const Nodalization nod = decode_nodalization(raw);
  auto at = [&](Nodalization n) { return ph.predict(n, sample.loads, sample.initial); };
  const ad::Vector base = at(nod);
  const ad::Vector dl_dt = 2.0 * w.cwiseProduct(base - sample.target) / lp.dense_nodes;
  for (int j = 0; j < 2; ++j) {
    Nodalization up = nod, down = nod;
    ++up.n[j];
    --down.n[j];
    const double slope = dl_dt.dot((at(up) - at(down)) / 2.0);
    const double sig = 1.0 / (1.0 + std::exp(-raw[j]));
    const double dn_draw = 8.0 * sig * (1.0 - sig);
    const double dlc_dn = l.L_c * 4.0 * std::log(10.0) / (lp.kappa_u - lp.kappa_l) * 2.0 * nod.n[j];
    const double expected = (slope + dlc_dn) * dn_draw;
    EXPECT_NEAR(g[2 * last + 1][j], expected, 1e-9 * std::abs(expected)) << "surface " << j;
  }
}

// Relaxed coefficient mode gives a loss that is smooth in the weights, so
// the whole pipeline can be checked against central differences.
TEST(RelaxedGradient, MatchesFiniteDifferencesOnToy) {
  const PhysicsModel& ph = test::toy_physics();
  const LossParams lp = LossParams::for_config(ph.config());
  const ad::Vector w = node_weights(ph.dense_layout(), lp);
  Model m = test::toy_model(ph, 2);
  const ThermalSample sample = test::toy_sample(ph, 2);
  TapeOptions opts;
  opts.node_gradient = NodeGradient::Coefficient;
  opts.relaxed = true;
  std::vector<ad::Vector> g;
  const SampleLoss l0 = sample_gradient(m, ph, sample, lp, w, opts, 1.0, g);
  EXPECT_EQ(l0.nodalization.n, (std::vector<int>{2, 2}));
  auto tensors = m.net.tensors();
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto k = std::uniform_int_distribution<std::size_t>(0, tensors.size() - 1)(rng);
    const auto i = std::uniform_int_distribution<Eigen::Index>(0, tensors[k]->size() - 1)(rng);
    const double keep = (*tensors[k])[i];
    const double h = 1e-3 * std::max(1.0, std::abs(keep));
    auto loss_at = [&](double v) {
      (*tensors[k])[i] = v;
      return sample_loss(m, ph, sample, lp, w, opts).L;
    };
    const double fd = (8.0 * (loss_at(keep + h) - loss_at(keep - h)) -
                       (loss_at(keep + 2 * h) - loss_at(keep - 2 * h))) /
                      (12.0 * h);
    (*tensors[k])[i] = keep;
    const double diff = std::abs(g[k][i] - fd);
    EXPECT_LE(diff, 1e-4 * std::max(std::abs(fd), std::abs(g[k][i])))
        << "tensor " << k << " entry " << i << ": " << g[k][i] << " vs " << fd;
  }
}

TEST(Models, SaveLoadRoundTrip) {
  const PhysicsModel& ph = test::toy_physics();
  const Model m = test::toy_model(ph, 4);
  const auto path = std::filesystem::temp_directory_path() / "adaptherm_model_test.bin";
  save_model(path, m);
  const Model back = load_model(path);
  EXPECT_EQ(back.kind, m.kind);
  EXPECT_EQ(back.load_scale, m.load_scale);
  ASSERT_EQ(back.net.weights.size(), m.net.weights.size());
  for (std::size_t k = 0; k < m.net.weights.size(); ++k)
    EXPECT_TRUE(back.net.weights[k] == m.net.weights[k]);
  const ThermalSample s = test::toy_sample(ph, 4);
  EXPECT_TRUE(predict(back, ph, s).temperatures == predict(m, ph, s).temperatures);
  std::filesystem::remove(path);
}

TEST(Training, ShortRunLowersToyLoss) {
  const PhysicsModel& ph = test::toy_physics();
  std::vector<ThermalSample> train_set, val_set;
  for (int k = 0; k < 6; ++k) {
    ThermalSample s = test::toy_sample(ph, 10 + k);
    s.orbit = k;
    (k % 2 ? val_set : train_set).push_back(s);
  }
  TrainOptions o;
  o.epochs = 3;
  o.batch = 2;
  o.lr = 1e-3;
  const TrainResult r = train(ModelKind::Ann, ph, train_set, val_set, o, nullptr);
  ASSERT_EQ(r.log.size(), 6u);
  EXPECT_LT(r.log[4].L, r.log[0].L);
  EXPECT_EQ(r.log[5].split, "validation");
}

TEST(Training, ThreadCountDoesNotChangeResult) {
  const PhysicsModel& ph = test::toy_physics();
  std::vector<ThermalSample> train_set, val_set;
  for (int k = 0; k < 8; ++k) {
    ThermalSample s = test::toy_sample(ph, 20 + k);
    s.orbit = k;
    (k % 2 ? val_set : train_set).push_back(s);
  }
  TrainOptions o;
  o.epochs = 2;
  o.batch = 3;
  o.lr = 1e-3;
  const ModelShape shape{2, 6};
  const TrainResult serial = train(ModelKind::PimlA, ph, train_set, val_set, o, &shape);
  o.threads = 3;
  const TrainResult threaded = train(ModelKind::PimlA, ph, train_set, val_set, o, &shape);
  for (std::size_t k = 0; k < serial.model.net.weights.size(); ++k) {
    EXPECT_TRUE(serial.model.net.weights[k] == threaded.model.net.weights[k]);
    EXPECT_TRUE(serial.model.net.biases[k] == threaded.model.net.biases[k]);
  }
  EXPECT_EQ(serial.log.back().L, threaded.log.back().L);
}

}  // namespace
}  // namespace adaptherm
