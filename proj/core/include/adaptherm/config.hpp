#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace adaptherm {

using Vec3 = Eigen::Vector3d;

struct Material {
  double ir_emissivity = 0.0;
  double solar_absorptivity = 0.0;
  double specific_heat = 0.0;  // J/(kg K)
  double conductivity = 0.0;   // W/(m K)
  double density = 0.0;        // kg/m^3
  double thickness = 0.0;      // m
  double radius = 0.0;         // m, 0 for rectangular faces

  /// Throws ConfigError naming `owner` and the offending field.
  void validate(std::string_view owner) const;
};

enum class SurfaceKind { Rectangular2D, Cylindrical1D };

std::string_view to_string(SurfaceKind kind);

/// Placement of a surface in the spacecraft body frame.
///
/// For a rectangle, `center` is the face centroid, `normal` the radiating
/// side and `u_axis` the in-plane direction along `width`. The v axis is
/// normal x u_axis. For a cylinder, `center` is the axis midpoint and
/// `normal` holds the axis direction; `u_axis` is unused.
struct Frame {
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 u_axis = Vec3::UnitX();

  Vec3 v_axis() const { return normal.cross(u_axis); }
};

struct Surface {
  int id = 0;
  std::string name;
  std::string role;  // Main, OpticalBench, SolarArray, Protrusion, Gimbal
  SurfaceKind kind = SurfaceKind::Rectangular2D;
  double width = 0.0;   // m; unused for cylinders
  double height = 0.0;  // m; axial length for cylinders
  Material material;
  Frame frame;

  bool is_2d() const { return kind == SurfaceKind::Rectangular2D; }
  /// Radiating area: width*height, or lateral area 2*pi*r*L for cylinders.
  double area() const;
  /// Extent along the meshed axis used by 1D faces.
  double length() const { return height; }
};

struct SpacecraftConfig {
  int schema_version = 1;
  std::vector<Surface> surfaces;

  std::size_t size() const { return surfaces.size(); }
  const Surface& surface(std::size_t j) const { return surfaces.at(j); }
  /// Throws ConfigError on the first invariant violation.
  void validate() const;
  /// Stable FNV-1a hash over geometry and materials.
  std::uint64_t geometry_hash() const;
};

inline constexpr int kConfigSchemaVersion = 1;

SpacecraftConfig load_spacecraft_config(const std::filesystem::path& path);
SpacecraftConfig parse_spacecraft_config(std::string_view json_text);
std::string dump_spacecraft_config(const SpacecraftConfig& config);

/// The 11-surface model spacecraft with the tabulated material properties.
SpacecraftConfig default_spacecraft();

/// Bundled default config: $ADAPTHERM_CONFIG if set, else the source tree
/// copy when it still exists, else the installed copy.
std::filesystem::path default_config_path();

/// Library version string.
const char* version();

}  // namespace adaptherm
