#pragma once

// Synthetic orbital heating: direct sun with per-node shadowing, albedo and
// planet infrared on a circular orbit in a local-vertical attitude.
//
// Body frame: +x along velocity, +y orbit normal, +z zenith. The attitude
// may carry a fixed roll about +x so that no face is permanently dark.

#include <cstdint>
#include <vector>

#include "adaptherm/config.hpp"
#include "adaptherm/geometry.hpp"
#include "adaptherm/mesh.hpp"

namespace adaptherm {

struct OrbitSpec {
  int id = 0;
  double beta_deg = 0.0;
  double altitude_km = 500.0;
  double earth_radius_km = 6371.0;
  double period_s = 0.0;  // 0 = Keplerian period for the altitude
  int samples_per_orbit = 24;
  double solar_constant = 1361.0;  // W/m^2
  double albedo = 0.3;
  double planet_ir = 237.0;        // W/m^2
  double penumbra_km = 50.0;
  double roll_deg = -5.0;  // zenith face tips toward +y, so it sees the sun at beta = 90
  double phase_offset_rad = 0.0;

  double period() const;
  double time_point(int k) const { return k * period() / samples_per_orbit; }
  void validate() const;
};

/// Sun direction in the body frame at orbit time `t`.
Vec3 sun_direction(const OrbitSpec& spec, double t);
/// Nadir direction in the body frame.
Vec3 nadir_direction(const OrbitSpec& spec);
/// 1 in sunlight, 0 in umbra, smooth in between.
double illumination_factor(const OrbitSpec& spec, double t);
/// View factor from a flat plate with unit normal `normal` to the planet.
double planet_view_factor(const OrbitSpec& spec, const Vec3& normal);

/// Precomputed dense meshes, scene and shadow sample points.
class OrbitLoadModel {
 public:
  /// `samples_per_axis`^2 jittered shadow probes per 2D node
  /// (`samples_per_axis` per 1D node), jittered by `seed`.
  OrbitLoadModel(const SpacecraftConfig& config, std::uint64_t seed = 0,
                 int samples_per_axis = 4);

  /// Absorbed load per dense node (W), absorptivity and emissivity applied.
  Eigen::VectorXd loads(const OrbitSpec& spec, double t) const;

  /// Lit fraction of every dense node for sun direction `sun`.
  Eigen::VectorXd sunlit_fraction(const Vec3& sun) const;

  const std::vector<FaceMesh>& meshes() const { return meshes_; }
  const SpacecraftConfig& config() const { return config_; }

 private:
  SpacecraftConfig config_;
  std::vector<FaceMesh> meshes_;
  NodeLayout layout_;
  SceneGeometry scene_;
  std::vector<std::vector<Eigen::Vector2d>> offsets_;  // per node, local
  int samples_per_axis_;
};

}  // namespace adaptherm
