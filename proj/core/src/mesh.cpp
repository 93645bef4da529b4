#include "adaptherm/mesh.hpp"

#include <numbers>
#include <numeric>
#include <string>

#include "adaptherm/error.hpp"

namespace adaptherm {

void Nodalization::validate(const SpacecraftConfig& config) const {
  if (n.size() != config.size()) {
    throw MeshError("nodalization has " + std::to_string(n.size()) +
                    " entries for " + std::to_string(config.size()) +
                    " surfaces");
  }
  for (std::size_t j = 0; j < n.size(); ++j) {
    if (n[j] < kMinNodes || n[j] > kMaxNodes) {
      throw MeshError("surface " + std::to_string(j) + ": node count " +
                      std::to_string(n[j]) + " outside [2,10]");
    }
  }
}

double FaceMesh::total_area() const {
  return std::accumulate(areas.begin(), areas.end(), 0.0);
}

int face_node_count(const Surface& surface, int n) {
  return surface.is_2d() ? n * n : n;
}

int total_node_count(const Nodalization& nodalization,
                     const SpacecraftConfig& config) {
  int total = 0;
  for (std::size_t j = 0; j < config.size(); ++j) {
    total += face_node_count(config.surface(j), nodalization[j]);
  }
  return total;
}

FaceMesh build_mesh(const Surface& surface, int n) {
  if (n < kMinNodes || n > kMaxNodes) {
    throw MeshError("surface '" + surface.name + "': node count " +
                    std::to_string(n) + " outside [2,10]");
  }
  FaceMesh mesh;
  mesh.surface_id = surface.id;
  mesh.kind = surface.kind;
  mesh.n = n;
  const auto& m = surface.material;
  const double heat_per_area = m.density * m.specific_heat * m.thickness;
  const Frame& f = surface.frame;

  if (surface.is_2d()) {
    mesh.extent_u = surface.width;
    mesh.extent_v = surface.height;
    const double du = surface.width / n;
    const double dv = surface.height / n;
    const Vec3 eu = f.u_axis;
    const Vec3 ev = f.v_axis();
    const std::size_t count = static_cast<std::size_t>(n) * n;
    mesh.local_centers.reserve(count);
    mesh.centers.reserve(count);
    mesh.elements.reserve(count);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const double u = (c + 0.5) * du;
        const double v = (r + 0.5) * dv;
        mesh.local_centers.emplace_back(u, v);
        mesh.centers.push_back(f.center + (u - 0.5 * surface.width) * eu +
                               (v - 0.5 * surface.height) * ev);
        mesh.elements.push_back({c * du, (c + 1) * du, r * dv, (r + 1) * dv});
        const double a = du * dv;
        mesh.measures.push_back(a);
        mesh.areas.push_back(a);
        mesh.capacities.push_back(heat_per_area * a);
      }
    }
  } else {
    mesh.extent_u = surface.length();
    mesh.extent_v = 0.0;
    const double ds = surface.length() / n;
    const double circumference = 2.0 * std::numbers::pi * m.radius;
    for (int c = 0; c < n; ++c) {
      const double s = (c + 0.5) * ds;
      mesh.local_centers.emplace_back(s, 0.5);
      mesh.centers.push_back(f.center + (s - 0.5 * surface.length()) * f.normal);
      mesh.elements.push_back({c * ds, (c + 1) * ds, 0.0, 1.0});
      mesh.measures.push_back(ds);
      const double a = ds * circumference;
      mesh.areas.push_back(a);
      mesh.capacities.push_back(heat_per_area * a);
    }
  }
  for (double a : mesh.areas) {
    if (!(a > 0.0)) {
      throw MeshError("surface " + std::to_string(surface.id) +
                      " has a zero-area element");
    }
  }
  return mesh;
}

std::vector<FaceMesh> build_meshes(const SpacecraftConfig& config,
                                   const Nodalization& nodalization) {
  nodalization.validate(config);
  std::vector<FaceMesh> meshes;
  meshes.reserve(config.size());
  for (std::size_t j = 0; j < config.size(); ++j) {
    meshes.push_back(build_mesh(config.surface(j), nodalization[j]));
  }
  return meshes;
}

NodeLayout::NodeLayout(const std::vector<FaceMesh>& meshes) {
  for (std::size_t j = 0; j < meshes.size(); ++j) {
    const auto& m = meshes[j];
    offsets_.push_back(offsets_.back() + m.node_count());
    for (std::size_t i = 0; i < m.node_count(); ++i) {
      surface_of_.push_back(static_cast<int>(j));
      is_1d_.push_back(!m.is_2d());
    }
  }
}

}  // namespace adaptherm
