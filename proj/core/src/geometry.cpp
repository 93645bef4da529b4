#include "adaptherm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace adaptherm {

namespace {
constexpr double kEpsilon = 1e-9;
}

SceneGeometry::SceneGeometry(const SpacecraftConfig& config) : config_(config) {}

std::optional<RayHit> SceneGeometry::intersect_surface(const Ray& ray,
                                                       int j) const {
  const Surface& s = config_.surface(static_cast<std::size_t>(j));
  const Frame& f = s.frame;
  if (s.is_2d()) {
    const double denom = ray.direction.dot(f.normal);
    if (std::abs(denom) < 1e-14) return std::nullopt;
    const double t = (f.center - ray.origin).dot(f.normal) / denom;
    if (!(t > kEpsilon)) return std::nullopt;
    const Vec3 p = ray.origin + t * ray.direction;
    const Vec3 d = p - f.center;
    const double u = d.dot(f.u_axis) + 0.5 * s.width;
    const double v = d.dot(f.v_axis()) + 0.5 * s.height;
    if (u < 0.0 || u > s.width || v < 0.0 || v > s.height) return std::nullopt;
    return RayHit{j, t, p, denom < 0.0, u, v};
  }
  const Vec3& a = f.normal;
  const double r = s.material.radius;
  const Vec3 oc = ray.origin - f.center;
  const Vec3 dp = ray.direction - ray.direction.dot(a) * a;
  const Vec3 op = oc - oc.dot(a) * a;
  const double A = dp.squaredNorm();
  if (A < 1e-18) return std::nullopt;
  const double B = 2.0 * op.dot(dp);
  const double C = op.squaredNorm() - r * r;
  const double disc = B * B - 4.0 * A * C;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double roots[2] = {(-B - sq) / (2.0 * A), (-B + sq) / (2.0 * A)};
  for (int k = 0; k < 2; ++k) {
    const double t = roots[k];
    if (!(t > kEpsilon)) continue;
    const double axial = (oc + t * ray.direction).dot(a);
    if (std::abs(axial) > 0.5 * s.height) continue;
    const Vec3 p = ray.origin + t * ray.direction;
    return RayHit{j, t, p, k == 0, axial + 0.5 * s.height, 0.0};
  }
  return std::nullopt;
}

std::optional<RayHit> SceneGeometry::intersect(const Ray& ray,
                                               int skip_surface) const {
  std::optional<RayHit> best;
  for (int j = 0; j < static_cast<int>(config_.size()); ++j) {
    if (j == skip_surface) continue;
    auto hit = intersect_surface(ray, j);
    if (hit && (!best || hit->distance < best->distance)) best = hit;
  }
  return best;
}

bool SceneGeometry::occluded(const Ray& ray, int skip_surface,
                             double max_distance) const {
  for (int j = 0; j < static_cast<int>(config_.size()); ++j) {
    if (j == skip_surface) continue;
    auto hit = intersect_surface(ray, j);
    if (hit && hit->distance < max_distance) return true;
  }
  return false;
}

int element_at(const Surface& surface, int n, double u, double v) {
  const double extent_u = surface.is_2d() ? surface.width : surface.length();
  const int col = std::clamp(static_cast<int>(std::floor(u / extent_u * n)), 0, n - 1);
  if (!surface.is_2d()) return col;
  const int row =
      std::clamp(static_cast<int>(std::floor(v / surface.height * n)), 0, n - 1);
  return row * n + col;
}

std::pair<Vec3, Vec3> orthonormal_basis(const Vec3& axis) {
  const Vec3 helper =
      std::abs(axis.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 p = axis.cross(helper).normalized();
  return {p, axis.cross(p)};
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Vec3 cosine_direction(const Vec3& normal, double r1, double r2) {
  const auto [p, q] = orthonormal_basis(normal);
  const double phi = 2.0 * std::numbers::pi * r1;
  const double sin_t = std::sqrt(r2);
  const double cos_t = std::sqrt(std::max(0.0, 1.0 - r2));
  return (sin_t * std::cos(phi) * p + sin_t * std::sin(phi) * q + cos_t * normal)
      .normalized();
}

std::pair<Vec3, Vec3> sample_element(const Surface& surface,
                                     const FaceMesh& mesh, std::size_t i,
                                     double r1, double r2) {
  const ElementBox& e = mesh.elements[i];
  const Frame& f = surface.frame;
  if (surface.is_2d()) {
    const double u = e.u0 + r1 * (e.u1 - e.u0);
    const double v = e.v0 + r2 * (e.v1 - e.v0);
    const Vec3 p = f.center + (u - 0.5 * surface.width) * f.u_axis +
                   (v - 0.5 * surface.height) * f.v_axis();
    return {p, f.normal};
  }
  const double s = e.u0 + r1 * (e.u1 - e.u0);
  const double phi = 2.0 * std::numbers::pi * r2;
  const auto [p, q] = orthonormal_basis(f.normal);
  const Vec3 radial = std::cos(phi) * p + std::sin(phi) * q;
  const Vec3 point = f.center + (s - 0.5 * surface.length()) * f.normal +
                     surface.material.radius * radial;
  return {point, radial};
}

}  // namespace adaptherm
