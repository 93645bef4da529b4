#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include "adaptherm/config.hpp"

namespace adaptherm {

inline constexpr int kMinNodes = 2;
inline constexpr int kMaxNodes = 10;
inline constexpr int kDenseNodes = 10;

/// Nodes per meshed dimension, one entry per surface.
struct Nodalization {
  std::vector<int> n;

  static Nodalization uniform(std::size_t surfaces, int nodes) {
    return {std::vector<int>(surfaces, nodes)};
  }
  std::size_t size() const { return n.size(); }
  int operator[](std::size_t j) const { return n[j]; }
  void validate(const SpacecraftConfig& config) const;
  bool operator==(const Nodalization&) const = default;
};

/// Axis-aligned element footprint in face-local coordinates. For 1D faces
/// only the u interval is meaningful and v spans [0, 1].
struct ElementBox {
  double u0 = 0, u1 = 0, v0 = 0, v1 = 0;
};

struct FaceMesh {
  int surface_id = 0;
  SurfaceKind kind = SurfaceKind::Rectangular2D;
  int n = 0;
  double extent_u = 0.0;  // width, or axial length for 1D
  double extent_v = 0.0;  // height, 0 for 1D

  std::vector<Eigen::Vector2d> local_centers;
  std::vector<Vec3> centers;  // body frame; on the axis for 1D
  std::vector<ElementBox> elements;
  /// Overlap measure used by flux-preserving remap: area (2D), length (1D).
  std::vector<double> measures;
  /// Radiating area; for 1D this is axial length x circumference.
  std::vector<double> areas;
  /// Lumped heat capacity rho*cp*t*area, J/K.
  std::vector<double> capacities;

  bool is_2d() const { return kind == SurfaceKind::Rectangular2D; }
  std::size_t node_count() const { return centers.size(); }
  double total_area() const;
};

/// Uniform n x n (2D) or n (1D) grid over one surface.
FaceMesh build_mesh(const Surface& surface, int n);

std::vector<FaceMesh> build_meshes(const SpacecraftConfig& config,
                                   const Nodalization& nodalization);

/// n^2 for 2D faces, n for 1D faces.
int face_node_count(const Surface& surface, int n);
int total_node_count(const Nodalization& nodalization,
                     const SpacecraftConfig& config);

/// Maps between the concatenated node vector and (surface, local index).
/// Faces are concatenated in config order, nodes row-major within a face.
class NodeLayout {
 public:
  NodeLayout() = default;
  explicit NodeLayout(const std::vector<FaceMesh>& meshes);

  std::size_t size() const { return surface_of_.size(); }
  std::size_t surfaces() const { return offsets_.size() - 1; }
  std::size_t offset(std::size_t surface) const { return offsets_[surface]; }
  std::size_t count(std::size_t surface) const {
    return offsets_[surface + 1] - offsets_[surface];
  }
  int surface_of(std::size_t node) const { return surface_of_[node]; }
  bool is_1d(std::size_t node) const { return is_1d_[node]; }
  const std::vector<int>& surface_index() const { return surface_of_; }

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<int> surface_of_;
  std::vector<bool> is_1d_;
};

}  // namespace adaptherm
