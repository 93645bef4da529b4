#include <benchmark/benchmark.h>

#include <random>

#include "adaptherm/autodiff.hpp"
#include "adaptherm/config.hpp"
#include "adaptherm/nnet.hpp"
#include "adaptherm/physics_model.hpp"
#include "adaptherm/piml.hpp"
#include "adaptherm/radiation.hpp"
#include "adaptherm/resample.hpp"
#include "adaptherm/solver.hpp"

namespace adaptherm {
namespace {

// Cheap dense view factors; timings below do not depend on their accuracy.
const PhysicsModel& physics() {
  static const PhysicsModel model = [] {
    const SpacecraftConfig c = default_spacecraft();
    return PhysicsModel(c, compute_dense_viewfactors(c, 200, 1));
  }();
  return model;
}

ad::Vector noise(Eigen::Index n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  ad::Vector v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

void BM_ViewFactorRows(benchmark::State& state) {
  const SpacecraftConfig c = default_spacecraft();
  const auto meshes = build_meshes(c, Nodalization::uniform(c.size(), 4));
  const int rays = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(compute_viewfactors(c, meshes, rays, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(NodeLayout(meshes).size()) * rays);
}
BENCHMARK(BM_ViewFactorRows)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_DownsampleLoads(benchmark::State& state) {
  const Surface s = default_spacecraft().surface(0);
  const FaceMesh dense = build_mesh(s, kDenseNodes);
  const FaceMesh sparse = build_mesh(s, static_cast<int>(state.range(0)));
  const ad::Vector q = noise(100, 0, 10, 1);
  for (auto _ : state) benchmark::DoNotOptimize(downsample_loads(dense, sparse, q));
}
BENCHMARK(BM_DownsampleLoads)->Arg(2)->Arg(6)->Arg(9);

void BM_SolverStep(benchmark::State& state) {
  const auto cm = physics().coarse(Nodalization::uniform(11, static_cast<int>(state.range(0))));
  const ThermalSystem& sys = cm->system;
  const auto n = static_cast<Eigen::Index>(sys.size());
  const auto c = node_coefficients(sys, sys.nodes_vector());
  const ad::Vector q = noise(n, 0, 5, 2);
  ad::Vector t = noise(n, 280, 320, 3);
  for (auto _ : state) benchmark::DoNotOptimize(step_temperatures(sys, c, q, t));
}
BENCHMARK(BM_SolverStep)->Arg(2)->Arg(6)->Arg(10);

void BM_Predict(benchmark::State& state) {
  const PhysicsModel& ph = physics();
  const Nodalization n = Nodalization::uniform(ph.surfaces(), static_cast<int>(state.range(0)));
  const auto d = static_cast<Eigen::Index>(ph.dense_size());
  const ad::Vector q = noise(d, 0, 5, 4);
  const ad::Vector t0 = noise(d, 280, 320, 5);
  ph.coarse(n);  // build outside the timed loop
  for (auto _ : state) benchmark::DoNotOptimize(ph.predict(n, q, t0));
}
BENCHMARK(BM_Predict)->DenseRange(2, 10, 2)->Unit(benchmark::kMillisecond);

void BM_MlpForward(benchmark::State& state) {
  MlpSpec s;
  s.input_dim = 830;
  s.hidden_layers = 5;
  s.hidden_width = static_cast<int>(state.range(0));
  s.output_dim = 11;
  const MlpParams p = init_mlp(s, 1);
  const ad::Vector x = noise(830, 0, 1, 6);
  for (auto _ : state) benchmark::DoNotOptimize(forward(p, x));
}
BENCHMARK(BM_MlpForward)->Arg(300)->Arg(1200)->Unit(benchmark::kMillisecond);

void BM_MlpTapeGradient(benchmark::State& state) {
  MlpSpec s;
  s.input_dim = 830;
  s.hidden_layers = 5;
  s.hidden_width = static_cast<int>(state.range(0));
  s.output_dim = 11;
  const MlpParams p = init_mlp(s, 1);
  const ad::Vector x = noise(830, 0, 1, 7);
  for (auto _ : state) {
    ad::Tape tape;
    const auto vars = attach(tape, p);
    tape.backward(ad::sum(ad::square(forward(p, vars, tape.constant(x)))));
    benchmark::DoNotOptimize(parameter_gradients(tape, vars));
  }
}
BENCHMARK(BM_MlpTapeGradient)->Arg(300)->Arg(1200)->Unit(benchmark::kMillisecond);

void BM_HybridSampleGradient(benchmark::State& state) {
  const PhysicsModel& ph = physics();
  const Model m = make_model(ModelKind::PimlA, ph, 1, 100.0, ModelShape{5, 300});
  const LossParams lp = LossParams::for_config(ph.config());
  const ad::Vector w = node_weights(ph.dense_layout(), lp);
  const auto d = static_cast<Eigen::Index>(ph.dense_size());
  ThermalSample sample;
  sample.loads = noise(d, 0, 5, 8);
  sample.initial = noise(d, 280, 320, 9);
  sample.target = ph.simulate_dense(sample.loads, sample.initial);
  TapeOptions opts;
  opts.difference_surfaces = static_cast<int>(state.range(0));
  for (auto _ : state) {
    std::vector<ad::Vector> g;
    benchmark::DoNotOptimize(sample_gradient(m, ph, sample, lp, w, opts, 1.0, g));
  }
}
BENCHMARK(BM_HybridSampleGradient)->Arg(0)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace adaptherm

BENCHMARK_MAIN();
