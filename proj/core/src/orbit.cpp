#include "adaptherm/orbit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "adaptherm/error.hpp"

namespace adaptherm {

namespace {

constexpr double kMuEarth = 398600.4418;  // km^3/s^2
constexpr double kDeg = std::numbers::pi / 180.0;
constexpr int kCylinderAzimuths = 16;

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

/// Rotation taking local-vertical coordinates to the rolled body frame.
Vec3 to_body(const OrbitSpec& spec, const Vec3& lvlh) {
  const double c = std::cos(spec.roll_deg * kDeg);
  const double s = std::sin(spec.roll_deg * kDeg);
  return {lvlh.x(), c * lvlh.y() + s * lvlh.z(), -s * lvlh.y() + c * lvlh.z()};
}

Vec3 sun_lvlh(const OrbitSpec& spec, double t) {
  const double nu =
      2.0 * std::numbers::pi * t / spec.period() + spec.phase_offset_rad;
  const double cb = std::cos(spec.beta_deg * kDeg);
  const double sb = std::sin(spec.beta_deg * kDeg);
  return {-cb * std::sin(nu), sb, cb * std::cos(nu)};
}

}  // namespace

double OrbitSpec::period() const {
  if (period_s > 0.0) return period_s;
  const double a = earth_radius_km + altitude_km;
  return 2.0 * std::numbers::pi * std::sqrt(a * a * a / kMuEarth);
}

void OrbitSpec::validate() const {
  const std::string who = "orbit " + std::to_string(id) + ": ";
  if (!(beta_deg >= 0.0 && beta_deg <= 90.0))
    throw ConfigError(who + "beta_deg must lie in [0, 90]");
  if (!(altitude_km > 0.0) || !(earth_radius_km > 0.0))
    throw ConfigError(who + "altitude and radius must be positive");
  if (period_s < 0.0) throw ConfigError(who + "period must be positive");
  if (samples_per_orbit < 1)
    throw ConfigError(who + "samples_per_orbit must be >= 1");
  if (solar_constant < 0.0 || albedo < 0.0 || albedo > 1.0 || planet_ir < 0.0)
    throw ConfigError(who + "flux constants out of range");
  if (!(penumbra_km > 0.0)) throw ConfigError(who + "penumbra_km must be > 0");
}

Vec3 sun_direction(const OrbitSpec& spec, double t) {
  return to_body(spec, sun_lvlh(spec, t));
}

Vec3 nadir_direction(const OrbitSpec& spec) {
  return to_body(spec, Vec3(0.0, 0.0, -1.0));
}

double illumination_factor(const OrbitSpec& spec, double t) {
  const Vec3 s = sun_lvlh(spec, t);
  if (s.z() >= 0.0) return 1.0;
  const double r = spec.earth_radius_km + spec.altitude_km;
  const double off_axis = r * std::sqrt(std::max(0.0, 1.0 - s.z() * s.z()));
  const double outside = off_axis - spec.earth_radius_km;
  if (outside <= 0.0) return 0.0;
  return smoothstep(outside / spec.penumbra_km);
}

double planet_view_factor(const OrbitSpec& spec, const Vec3& normal) {
  const double sin_rho =
      spec.earth_radius_km / (spec.earth_radius_km + spec.altitude_km);
  const double rho = std::asin(sin_rho);
  const double cos_g = std::clamp(normal.dot(nadir_direction(spec)), -1.0, 1.0);
  const double gamma = std::acos(cos_g);
  const double full = std::numbers::pi / 2 - rho;
  const double gone = std::numbers::pi / 2 + rho;
  if (gamma <= full) return sin_rho * sin_rho * cos_g;
  if (gamma >= gone) return 0.0;
  const double edge = sin_rho * sin_rho * std::cos(full);
  return edge * (1.0 - smoothstep((gamma - full) / (gone - full)));
}

OrbitLoadModel::OrbitLoadModel(const SpacecraftConfig& config,
                               std::uint64_t seed, int samples_per_axis)
    : config_(config),
      meshes_(build_meshes(config,
                           Nodalization::uniform(config.size(), kDenseNodes))),
      layout_(meshes_),
      scene_(config),
      samples_per_axis_(samples_per_axis) {
  if (samples_per_axis < 1)
    throw ConfigError("orbit loads: samples_per_axis must be >= 1");
  const int k = samples_per_axis;
  offsets_.resize(layout_.size());
  for (std::size_t node = 0; node < layout_.size(); ++node) {
    UniformStream rng(mix_seed(seed, node));
    auto& out = offsets_[node];
    const bool two_d = !layout_.is_1d(node);
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < (two_d ? k : 1); ++b) {
        const double u = (a + rng.next()) / k;
        const double v = two_d ? (b + rng.next()) / k : rng.next();
        out.emplace_back(u, v);
      }
    }
  }
}

Eigen::VectorXd OrbitLoadModel::sunlit_fraction(const Vec3& sun) const {
  Eigen::VectorXd lit = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout_.size()));
  for (std::size_t j = 0; j < meshes_.size(); ++j) {
    const Surface& s = config_.surface(j);
    const FaceMesh& m = meshes_[j];
    const Frame& f = s.frame;
    Vec3 lit_dir = Vec3::Zero();
    if (s.is_2d()) {
      if (f.normal.dot(sun) <= 0.0) continue;
    } else {
      const Vec3 perp = sun - sun.dot(f.normal) * f.normal;
      if (perp.norm() < 1e-12) continue;
      lit_dir = perp.normalized();
    }
    const Vec3 side = f.normal.cross(lit_dir);
    for (std::size_t i = 0; i < m.node_count(); ++i) {
      const std::size_t node = layout_.offset(j) + i;
      const ElementBox& e = m.elements[i];
      int open = 0;
      for (const auto& o : offsets_[node]) {
        Vec3 p, normal;
        if (s.is_2d()) {
          const double u = e.u0 + o.x() * (e.u1 - e.u0);
          const double v = e.v0 + o.y() * (e.v1 - e.v0);
          p = f.center + (u - 0.5 * s.width) * f.u_axis +
              (v - 0.5 * s.height) * f.v_axis();
          normal = f.normal;
        } else {
          // probes on the sunward half, spread over +-80 degrees
          const double axial = e.u0 + o.x() * (e.u1 - e.u0);
          const double phi = (o.y() - 0.5) * (160.0 * kDeg);
          normal = std::cos(phi) * lit_dir + std::sin(phi) * side;
          p = f.center + (axial - 0.5 * s.length()) * f.normal +
              s.material.radius * normal;
        }
        const Ray ray{p + 1e-9 * normal, sun};
        if (!scene_.occluded(ray, static_cast<int>(j))) ++open;
      }
      lit[static_cast<Eigen::Index>(node)] =
          static_cast<double>(open) / static_cast<double>(offsets_[node].size());
    }
  }
  return lit;
}

Eigen::VectorXd OrbitLoadModel::loads(const OrbitSpec& spec, double t) const {
  spec.validate();
  const Vec3 sun = sun_direction(spec, t);
  const double illum = illumination_factor(spec, t);
  const double sub_solar = std::max(0.0, sun_lvlh(spec, t).z());
  const double albedo_flux = spec.solar_constant * spec.albedo * sub_solar;
  const Eigen::VectorXd lit =
      illum > 0.0 ? sunlit_fraction(sun)
                  : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout_.size()));

  Eigen::VectorXd q(static_cast<Eigen::Index>(layout_.size()));
  for (std::size_t j = 0; j < meshes_.size(); ++j) {
    const Surface& s = config_.surface(j);
    const FaceMesh& m = meshes_[j];
    const Frame& f = s.frame;
    const double alpha = s.material.solar_absorptivity;
    const double eps = s.material.ir_emissivity;
    double cos_sun, fp;
    if (s.is_2d()) {
      cos_sun = std::max(0.0, f.normal.dot(sun));
      fp = planet_view_factor(spec, f.normal);
    } else {
      // mean of max(0, cos) around the circumference is sin(theta) / pi
      const double axial = std::clamp(f.normal.dot(sun), -1.0, 1.0);
      cos_sun = std::sqrt(1.0 - axial * axial) / std::numbers::pi;
      const auto [p, r] = orthonormal_basis(f.normal);
      fp = 0.0;
      for (int k = 0; k < kCylinderAzimuths; ++k) {
        const double phi = 2.0 * std::numbers::pi * (k + 0.5) / kCylinderAzimuths;
        fp += planet_view_factor(spec, std::cos(phi) * p + std::sin(phi) * r);
      }
      fp /= kCylinderAzimuths;
    }
    for (std::size_t i = 0; i < m.node_count(); ++i) {
      const auto node = static_cast<Eigen::Index>(layout_.offset(j) + i);
      const double a = m.areas[i];
      const double direct = alpha * spec.solar_constant * cos_sun * illum * lit[node];
      const double reflected = alpha * albedo_flux * fp;
      const double infrared = eps * spec.planet_ir * fp;
      q[node] = a * (direct + reflected + infrared);
    }
  }
  return q;
}

}  // namespace adaptherm
