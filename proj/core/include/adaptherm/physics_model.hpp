#pragma once

// Dense-to-coarse physics pipeline shared by the baselines, the hybrid
// models and the dataset generator: downsample loads and initial
// temperatures, simulate on the coarse nodalization, upsample the result.

#include <map>
#include <memory>
#include <mutex>

#include "adaptherm/config.hpp"
#include "adaptherm/mesh.hpp"
#include "adaptherm/radiation.hpp"
#include "adaptherm/resample.hpp"
#include "adaptherm/solver.hpp"

namespace adaptherm {

struct CoarseModel {
  Nodalization nodalization;
  std::vector<FaceMesh> meshes;
  ThermalSystem system;
  GlobalResampler resampler;
  ad::Vector areas;  // node areas as produced by node_coefficients()
  int total_nodes = 0;
};

class PhysicsModel {
 public:
  /// `dense_vf` must be expressed on the n = 10 meshes of `config`.
  PhysicsModel(SpacecraftConfig config, ViewFactorMatrix dense_vf,
               SolverSettings settings = {});

  const SpacecraftConfig& config() const { return config_; }
  const std::vector<FaceMesh>& dense_meshes() const { return dense_meshes_; }
  const NodeLayout& dense_layout() const { return dense_layout_; }
  const ViewFactorMatrix& dense_viewfactors() const { return dense_vf_; }
  const SolverSettings& settings() const { return settings_; }
  std::size_t dense_size() const { return dense_layout_.size(); }
  std::size_t surfaces() const { return config_.size(); }

  /// Meshes, view factors, solver system and resamplers for `n`, memoised.
  std::shared_ptr<const CoarseModel> coarse(const Nodalization& n) const;

  /// Dense temperatures after settings().duration on nodalization `n`.
  ad::Vector predict(const Nodalization& n, const ad::Vector& q_dense,
                     const ad::Vector& t0_dense) const;
  /// predict() at n = 10 everywhere.
  ad::Vector simulate_dense(const ad::Vector& q_dense,
                            const ad::Vector& t0_dense) const;

  std::size_t cached_models() const;
  void clear_cache() const;

 private:
  SpacecraftConfig config_;
  std::vector<FaceMesh> dense_meshes_;
  NodeLayout dense_layout_;
  ViewFactorMatrix dense_vf_;
  SolverSettings settings_;
  ResampleCache resample_;
  mutable std::mutex mutex_;
  mutable std::map<std::vector<int>, std::shared_ptr<const CoarseModel>> cache_;
};

}  // namespace adaptherm
