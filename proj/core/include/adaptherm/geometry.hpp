#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "adaptherm/config.hpp"
#include "adaptherm/mesh.hpp"

namespace adaptherm {

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit
};

struct RayHit {
  int surface = -1;
  double distance = 0.0;
  Vec3 point;
  /// True when the ray arrives on the radiating side (outside of a cylinder).
  bool front = false;
  /// Face-local coordinates of the hit: (u, v) for rectangles,
  /// (axial position, 0) for cylinders.
  double u = 0.0, v = 0.0;
};

/// Ray queries against the fixed spacecraft surfaces.
class SceneGeometry {
 public:
  explicit SceneGeometry(const SpacecraftConfig& config);

  /// Closest hit with distance > epsilon, ignoring `skip_surface`.
  std::optional<RayHit> intersect(const Ray& ray, int skip_surface = -1) const;
  /// True when anything lies along the ray before `max_distance`.
  bool occluded(const Ray& ray, int skip_surface,
                double max_distance = 1e30) const;

  const SpacecraftConfig& config() const { return config_; }

 private:
  std::optional<RayHit> intersect_surface(const Ray& ray, int j) const;
  SpacecraftConfig config_;
};

/// Index of the element of a uniform n-mesh containing a face-local point.
int element_at(const Surface& surface, int n, double u, double v);

/// Two unit vectors spanning the plane perpendicular to `axis`.
std::pair<Vec3, Vec3> orthonormal_basis(const Vec3& axis);

/// Deterministic uniform stream: mt19937_64 with an explicit 53-bit
/// conversion so draws do not depend on the standard library's
/// distribution implementations.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : engine_(seed) {}
  double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finaliser, used to derive independent per-node seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Cosine-weighted direction on the hemisphere around `normal`.
Vec3 cosine_direction(const Vec3& normal, double r1, double r2);

/// Random point on element `i` of `mesh`, with its outward normal.
std::pair<Vec3, Vec3> sample_element(const Surface& surface,
                                     const FaceMesh& mesh, std::size_t i,
                                     double r1, double r2);

}  // namespace adaptherm
