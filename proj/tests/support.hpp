#pragma once

#include <random>

#include "adaptherm/config.hpp"
#include "adaptherm/dataset.hpp"
#include "adaptherm/piml.hpp"
#include "adaptherm/physics_model.hpp"
#include "adaptherm/radiation.hpp"

namespace adaptherm::test {

inline Material plain_material() {
  return Material{0.9, 0.5, 900.0, 150.0, 2700.0, 0.005, 0.0};
}

inline Surface rectangle(int id, std::string name, Vec3 center, Vec3 normal,
                         Vec3 u, double w = 1.0, double h = 1.0) {
  Surface s;
  s.id = id;
  s.name = std::move(name);
  s.role = "Main";
  s.kind = SurfaceKind::Rectangular2D;
  s.width = w;
  s.height = h;
  s.material = plain_material();
  s.frame = {center, normal, u};
  return s;
}

/// Two aligned w x h plates facing each other across `gap`.
inline SpacecraftConfig plate_pair(double gap, double w = 1.0, double h = 1.0) {
  SpacecraftConfig c;
  c.surfaces.push_back(rectangle(0, "lower", {0, 0, 0}, Vec3::UnitZ(),
                                 Vec3::UnitX(), w, h));
  c.surfaces.push_back(rectangle(1, "upper", {0, 0, gap}, -Vec3::UnitZ(),
                                 Vec3::UnitX(), w, h));
  return c;
}

inline SpacecraftConfig single_plate(const Material& m) {
  SpacecraftConfig c;
  c.surfaces.push_back(rectangle(0, "plate", {0, 0, 0}, Vec3::UnitZ(), Vec3::UnitX()));
  c.surfaces[0].material = m;
  return c;
}

/// View factors with no exchange between nodes: everything goes to space.
inline ViewFactorMatrix isolated_viewfactors(std::size_t nodes) {
  ViewFactorMatrix vf;
  const auto n = static_cast<Eigen::Index>(nodes);
  vf.factors = Eigen::MatrixXd::Zero(n, n);
  vf.space = Eigen::VectorXd::Ones(n);
  return vf;
}

/// Default spacecraft with cheap dense view factors, shared per binary.
inline const PhysicsModel& default_physics() {
  static const PhysicsModel model = [] {
    const SpacecraftConfig config = default_spacecraft();
    return PhysicsModel(config, compute_dense_viewfactors(config, 400, 3));
  }();
  return model;
}

/// Two facing plates, 10 solver steps of 0.1 s.
inline const PhysicsModel& toy_physics() {
  static const PhysicsModel model = [] {
    const SpacecraftConfig config = plate_pair(0.5);
    SolverSettings s;
    s.duration = 1.0;
    return PhysicsModel(config, compute_dense_viewfactors(config, 400, 2), s);
  }();
  return model;
}

/// Small transfer net on the toy craft whose decoded counts sit near 2.3,
/// so finite differences never cross a rounding boundary.
inline Model toy_model(const PhysicsModel& physics, std::uint64_t seed) {
  Model m = make_model(ModelKind::PimlA, physics, seed, 1.0, ModelShape{2, 6});
  const int last = m.net.spec.hidden_layers;
  m.net.weights[last] *= 0.1;
  m.net.biases[last].setConstant(-3.25);
  return m;
}

inline ThermalSample toy_sample(const PhysicsModel& physics, std::uint64_t seed);

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n,
                                     double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline ThermalSample toy_sample(const PhysicsModel& physics, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto d = static_cast<Eigen::Index>(physics.dense_size());
  ThermalSample s;
  s.loads = random_vector(rng, d, 3.0, 5.0);
  s.initial = random_vector(rng, d, 295.0, 305.0);
  s.target = physics.simulate_dense(s.loads, s.initial) + random_vector(rng, d, -0.5, 0.5);
  return s;
}

}  // namespace adaptherm::test
