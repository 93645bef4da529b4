#include "adaptherm/physics_model.hpp"

#include <string>

#include "adaptherm/error.hpp"

namespace adaptherm {

namespace {

constexpr std::size_t kMaxCachedModels = 4096;

}  // namespace

PhysicsModel::PhysicsModel(SpacecraftConfig config, ViewFactorMatrix dense_vf,
                           SolverSettings settings)
    : config_(std::move(config)),
      dense_meshes_(build_meshes(
          config_, Nodalization::uniform(config_.size(), kDenseNodes))),
      dense_layout_(dense_meshes_),
      dense_vf_(std::move(dense_vf)),
      settings_(settings),
      resample_(dense_meshes_) {
  settings_.validate();
  const auto d = static_cast<Eigen::Index>(dense_layout_.size());
  if (dense_vf_.size() != d)
    throw ShapeError("physics model: view factors cover " +
                     std::to_string(dense_vf_.size()) + " nodes, dense mesh has " +
                     std::to_string(d));
  if (dense_vf_.space.size() != d) dense_vf_.space = space_factors(dense_vf_.factors);
  if (dense_vf_.areas.size() != d) {
    dense_vf_.areas.resize(d);
    for (std::size_t j = 0; j < dense_meshes_.size(); ++j)
      for (std::size_t i = 0; i < dense_meshes_[j].node_count(); ++i)
        dense_vf_.areas[static_cast<Eigen::Index>(dense_layout_.offset(j) + i)] =
            dense_meshes_[j].areas[i];
  }
}

std::shared_ptr<const CoarseModel> PhysicsModel::coarse(
    const Nodalization& n) const {
  {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(n.n);
    if (it != cache_.end()) return it->second;
  }
  auto m = std::make_shared<CoarseModel>();
  m->nodalization = n;
  m->meshes = build_meshes(config_, n);
  const ViewFactorMatrix vf =
      lookup_coarse_viewfactors(dense_vf_, dense_meshes_, m->meshes);
  m->system = assemble_system(config_, m->meshes, vf, settings_);
  m->resampler = resample_.global(m->meshes);
  m->areas = node_coefficients(m->system, m->system.nodes_vector()).area;
  m->total_nodes = total_node_count(n, config_);

  std::lock_guard lock(mutex_);
  if (cache_.size() >= kMaxCachedModels) cache_.clear();
  auto [it, inserted] = cache_.emplace(n.n, std::move(m));
  return it->second;
}

ad::Vector PhysicsModel::predict(const Nodalization& n, const ad::Vector& q_dense,
                                 const ad::Vector& t0_dense) const {
  const auto d = static_cast<Eigen::Index>(dense_size());
  if (q_dense.size() != d || t0_dense.size() != d)
    throw ShapeError("predict: dense inputs must have " + std::to_string(d) +
                     " entries");
  const auto cm = coarse(n);
  const GlobalResampler& r = cm->resampler;
  ThermalState s0;
  ad::Vector q;
  if (r.identity) {
    q = q_dense;
    s0.temperatures = t0_dense;
  } else {
    q = *r.load_down * q_dense;
    s0.temperatures = *r.temp_down * t0_dense;
  }
  const ThermalState s = simulate(cm->system, s0, q);
  if (r.identity) return s.temperatures;
  return *r.temp_up * s.temperatures;
}

ad::Vector PhysicsModel::simulate_dense(const ad::Vector& q_dense,
                                        const ad::Vector& t0_dense) const {
  return predict(Nodalization::uniform(surfaces(), kDenseNodes), q_dense,
                 t0_dense);
}

std::size_t PhysicsModel::cached_models() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

void PhysicsModel::clear_cache() const {
  std::lock_guard lock(mutex_);
  cache_.clear();
}

}  // namespace adaptherm
