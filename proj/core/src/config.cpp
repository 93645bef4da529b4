#include "adaptherm/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "adaptherm/error.hpp"

namespace adaptherm {

namespace {

using nlohmann::json;

void require_positive(std::string_view owner, std::string_view field,
                      double value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream os;
    os << owner << ": field '" << field << "' must be > 0 (got " << value
       << ")";
    throw ConfigError(os.str());
  }
}

void require_unit(std::string_view owner, std::string_view field,
                  double value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    std::ostringstream os;
    os << owner << ": field '" << field << "' must lie in [0,1] (got "
       << value << ")";
    throw ConfigError(os.str());
  }
}

Vec3 read_vec3(const json& j, std::string_view owner, const char* key) {
  if (!j.contains(key)) {
    throw ConfigError(std::string(owner) + ": missing field '" + key + "'");
  }
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) {
    throw ConfigError(std::string(owner) + ": field '" + key +
                      "' must be an array of 3 numbers");
  }
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

double read_number(const json& j, std::string_view owner, const char* key) {
  if (!j.contains(key)) {
    throw ConfigError(std::string(owner) + ": missing field '" + key + "'");
  }
  if (!j.at(key).is_number()) {
    throw ConfigError(std::string(owner) + ": field '" + key +
                      "' must be a number");
  }
  return j.at(key).get<double>();
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a(std::uint64_t h, double v) { return fnv1a(h, &v, sizeof v); }

}  // namespace

std::string_view to_string(SurfaceKind kind) {
  return kind == SurfaceKind::Rectangular2D ? "rectangular" : "cylindrical";
}

void Material::validate(std::string_view owner) const {
  require_unit(owner, "ir_emissivity", ir_emissivity);
  require_unit(owner, "solar_absorptivity", solar_absorptivity);
  require_positive(owner, "specific_heat", specific_heat);
  require_positive(owner, "conductivity", conductivity);
  require_positive(owner, "density", density);
  require_positive(owner, "thickness", thickness);
  if (!(radius >= 0.0) || !std::isfinite(radius)) {
    throw ConfigError(std::string(owner) + ": field 'radius_m' must be >= 0");
  }
}

double Surface::area() const {
  if (is_2d()) return width * height;
  return 2.0 * std::numbers::pi * material.radius * height;
}

void SpacecraftConfig::validate() const {
  if (surfaces.empty()) throw ConfigError("config: no surfaces");
  for (std::size_t j = 0; j < surfaces.size(); ++j) {
    const auto& s = surfaces[j];
    const std::string owner = "surface '" + s.name + "'";
    if (s.id != static_cast<int>(j)) {
      throw ConfigError(owner + ": id must equal its position in surfaces[]");
    }
    s.material.validate(owner);
    require_positive(owner, "height_m", s.height);
    if (s.is_2d()) {
      require_positive(owner, "width_m", s.width);
      if (std::abs(s.frame.normal.dot(s.frame.u_axis)) > 1e-9) {
        throw ConfigError(owner + ": u_axis must be perpendicular to normal");
      }
    } else {
      require_positive(owner, "radius_m", s.material.radius);
    }
    if (std::abs(s.frame.normal.norm() - 1.0) > 1e-9) {
      throw ConfigError(owner + ": field 'normal' must be a unit vector");
    }
    if (s.is_2d() && std::abs(s.frame.u_axis.norm() - 1.0) > 1e-9) {
      throw ConfigError(owner + ": field 'u_axis' must be a unit vector");
    }
  }
}

std::uint64_t SpacecraftConfig::geometry_hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& s : surfaces) {
    h = fnv1a(h, s.name.data(), s.name.size());
    const int kind = static_cast<int>(s.kind);
    h = fnv1a(h, &kind, sizeof kind);
    for (double v : {s.width, s.height, s.material.radius,
                     s.material.ir_emissivity, s.material.thickness}) {
      h = fnv1a(h, v);
    }
    for (const Vec3* v : {&s.frame.center, &s.frame.normal, &s.frame.u_axis}) {
      for (int k = 0; k < 3; ++k) h = fnv1a(h, (*v)[k]);
    }
  }
  return h;
}

SpacecraftConfig parse_spacecraft_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  SpacecraftConfig config;
  try {
    config.schema_version = doc.value("version", 0);
    if (config.schema_version != kConfigSchemaVersion) {
      throw ConfigError("config: unsupported 'version' " +
                        std::to_string(config.schema_version));
    }
    if (!doc.contains("surfaces") || !doc["surfaces"].is_array()) {
      throw ConfigError("config: missing array field 'surfaces'");
    }
    int id = 0;
    for (const auto& js : doc["surfaces"]) {
      Surface s;
      s.id = id++;
      s.name = js.value("name", "surface" + std::to_string(s.id));
      const std::string owner = "surface '" + s.name + "'";
      s.role = js.value("role", "");
      const std::string kind = js.value("kind", "");
      if (kind == "rectangular") {
        s.kind = SurfaceKind::Rectangular2D;
      } else if (kind == "cylindrical") {
        s.kind = SurfaceKind::Cylindrical1D;
      } else {
        throw ConfigError(owner + ": field 'kind' must be 'rectangular' or "
                                  "'cylindrical'");
      }
      s.height = read_number(js, owner, "height_m");
      s.width = s.is_2d() ? read_number(js, owner, "width_m")
                          : js.value("width_m", 0.0);
      s.frame.center = read_vec3(js, owner, "position");
      s.frame.normal = read_vec3(js, owner, "normal");
      if (s.is_2d()) s.frame.u_axis = read_vec3(js, owner, "u_axis");
      if (!js.contains("material") || !js["material"].is_object()) {
        throw ConfigError(owner + ": missing object field 'material'");
      }
      const auto& jm = js["material"];
      auto& m = s.material;
      m.ir_emissivity = read_number(jm, owner, "ir_emissivity");
      m.solar_absorptivity = read_number(jm, owner, "solar_absorptivity");
      m.specific_heat = read_number(jm, owner, "specific_heat");
      m.conductivity = read_number(jm, owner, "conductivity");
      m.density = read_number(jm, owner, "density");
      m.thickness = read_number(jm, owner, "thickness_m");
      m.radius = js.value("radius_m", 0.0);
      config.surfaces.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  config.validate();
  return config;
}

SpacecraftConfig load_spacecraft_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_spacecraft_config(ss.str());
}

std::string dump_spacecraft_config(const SpacecraftConfig& config) {
  json doc;
  doc["version"] = config.schema_version;
  doc["surfaces"] = json::array();
  for (const auto& s : config.surfaces) {
    json js;
    js["name"] = s.name;
    js["role"] = s.role;
    js["kind"] = std::string(to_string(s.kind));
    if (s.is_2d()) js["width_m"] = s.width;
    js["height_m"] = s.height;
    js["radius_m"] = s.material.radius;
    js["position"] = vec3_json(s.frame.center);
    js["normal"] = vec3_json(s.frame.normal);
    if (s.is_2d()) js["u_axis"] = vec3_json(s.frame.u_axis);
    js["material"] = {
        {"ir_emissivity", s.material.ir_emissivity},
        {"solar_absorptivity", s.material.solar_absorptivity},
        {"specific_heat", s.material.specific_heat},
        {"conductivity", s.material.conductivity},
        {"density", s.material.density},
        {"thickness_m", s.material.thickness},
    };
    doc["surfaces"].push_back(std::move(js));
  }
  return doc.dump(2) + "\n";
}

SpacecraftConfig default_spacecraft() {
  const Material main{0.82, 0.45, 896.0, 167.0, 2700.0, 0.01, 0.0};
  const Material bench{0.92, 0.17, 1100.0, 32.0, 1660.0, 0.002, 0.0};
  const Material protrusion{0.92, 0.17, 1100.0, 32.0, 1660.0, 0.002, 0.10};
  const Material gimbal{0.92, 0.17, 502.0, 7.2, 4429.0, 0.002, 0.05};
  const Material array{0.92, 0.17, 920.0, 1.7, 72.0, 0.013, 0.0};

  SpacecraftConfig c;
  auto rect = [&](std::string name, std::string role, const Material& m,
                  Vec3 center, Vec3 normal, Vec3 u) {
    Surface s;
    s.id = static_cast<int>(c.surfaces.size());
    s.name = std::move(name);
    s.role = std::move(role);
    s.kind = SurfaceKind::Rectangular2D;
    s.width = 1.0;
    s.height = 1.0;
    s.material = m;
    s.frame = {center, normal, u};
    c.surfaces.push_back(std::move(s));
  };
  auto cyl = [&](std::string name, std::string role, const Material& m,
                 Vec3 center, Vec3 axis) {
    Surface s;
    s.id = static_cast<int>(c.surfaces.size());
    s.name = std::move(name);
    s.role = std::move(role);
    s.kind = SurfaceKind::Cylindrical1D;
    s.width = 0.0;
    s.height = 0.5;
    s.material = m;
    s.frame = {center, axis, Vec3::UnitX()};
    c.surfaces.push_back(std::move(s));
  };
  const Vec3 X = Vec3::UnitX(), Y = Vec3::UnitY(), Z = Vec3::UnitZ();
  // Body frame: +z zenith, -z nadir (Earth), +y orbit normal, +x velocity.
  rect("Main-1", "Main", main, {0.5, 0, 0}, X, Y);
  rect("Main-2", "Main", main, {-0.5, 0, 0}, -X, Y);
  rect("Main-3", "Main", main, {0, 0.5, 0}, Y, Z);
  rect("Main-4", "Main", main, {0, -0.5, 0}, -Y, Z);
  rect("Main-5", "Main", main, {0, 0, 0.5}, Z, X);
  rect("Optical Bench", "OpticalBench", bench, {0, 0, -0.5}, -Z, X);
  rect("Solar Array-1", "SolarArray", array, {1.5, 0, 0}, Y, X);
  rect("Solar Array-2", "SolarArray", array, {-1.5, 0, 0}, Y, X);
  cyl("Protrusion", "Protrusion", protrusion, {0, 0, -0.75}, -Z);
  cyl("SA Gimbal-1", "Gimbal", gimbal, {0.75, 0, 0}, X);
  cyl("SA Gimbal-2", "Gimbal", gimbal, {-0.75, 0, 0}, -X);
  c.validate();
  return c;
}

std::filesystem::path default_config_path() {
  if (const char* env = std::getenv("ADAPTHERM_CONFIG"); env && *env) return env;
  const std::filesystem::path source(ADAPTHERM_SOURCE_CONFIG);
  if (std::filesystem::exists(source)) return source;
  return std::filesystem::path(ADAPTHERM_INSTALLED_CONFIG);
}

const char* version() { return ADAPTHERM_VERSION; }

}  // namespace adaptherm
