#include "adaptherm/solver.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "adaptherm/error.hpp"

namespace adaptherm {

long SolverSettings::steps() const {
  const double ratio = duration / dt;
  return std::lround(ratio);
}

void SolverSettings::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw ConfigError("solver: dt must be positive");
  if (!(duration >= 0.0) || !std::isfinite(duration))
    throw ConfigError("solver: duration must be non-negative");
  const double ratio = duration / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
    throw ConfigError("solver: duration must be an integer multiple of dt");
  if (!(stefan_boltzmann > 0.0))
    throw ConfigError("solver: stefan_boltzmann must be positive");
  if (!(sink_temperature >= 0.0))
    throw ConfigError("solver: sink temperature must be >= 0 K");
}

ad::Vector ThermalSystem::nodes_vector() const {
  ad::Vector n(nodalization.size());
  for (std::size_t j = 0; j < nodalization.size(); ++j) n[j] = nodalization[j];
  return n;
}

namespace {

using Triplet = Eigen::Triplet<double>;

void face_laplacians(const FaceMesh& m, std::size_t off,
                     std::vector<Triplet>& lu, std::vector<Triplet>& lv) {
  const int n = m.n;
  auto link = [](std::vector<Triplet>& t, std::size_t i, std::size_t k) {
    t.emplace_back(static_cast<int>(i), static_cast<int>(k), 1.0);
    t.emplace_back(static_cast<int>(i), static_cast<int>(i), -1.0);
  };
  if (!m.is_2d()) {
    for (int c = 0; c < n; ++c) {
      if (c > 0) link(lu, off + c, off + c - 1);
      if (c + 1 < n) link(lu, off + c, off + c + 1);
    }
    return;
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const std::size_t i = off + static_cast<std::size_t>(r * n + c);
      if (c > 0) link(lu, i, i - 1);
      if (c + 1 < n) link(lu, i, i + 1);
      if (r > 0) link(lv, i, i - n);
      if (r + 1 < n) link(lv, i, i + n);
    }
  }
}

}  // namespace

ThermalSystem assemble_system(const SpacecraftConfig& config,
                              const std::vector<FaceMesh>& meshes,
                              const ViewFactorMatrix& vf,
                              const SolverSettings& settings) {
  settings.validate();
  if (meshes.size() != config.size())
    throw ShapeError("solver: mesh count does not match surface count");
  ThermalSystem sys;
  sys.layout = NodeLayout(meshes);
  sys.settings = settings;
  const auto nodes = static_cast<Eigen::Index>(sys.layout.size());
  if (vf.factors.rows() != nodes || vf.factors.cols() != nodes)
    throw ShapeError("solver: view factor matrix is " +
                     std::to_string(vf.factors.rows()) + "x" +
                     std::to_string(vf.factors.cols()) + " but meshes have " +
                     std::to_string(nodes) + " nodes");
  const ad::Vector space =
      vf.space.size() == nodes ? vf.space : space_factors(vf.factors);

  const auto surfaces = static_cast<Eigen::Index>(config.size());
  sys.face_area.resize(surfaces);
  sys.area_exponent.resize(surfaces);
  sys.g_u_coef.resize(surfaces);
  sys.g_u_exponent.resize(surfaces);
  sys.heat_per_area.resize(nodes);
  sys.g_v.resize(nodes);
  sys.sigma_eps.resize(nodes);

  std::vector<Triplet> lu, lv;
  for (std::size_t j = 0; j < config.size(); ++j) {
    const Surface& s = config.surface(j);
    const FaceMesh& m = meshes[j];
    if (m.surface_id != s.id || m.kind != s.kind)
      throw ShapeError("solver: mesh " + std::to_string(j) +
                       " does not belong to surface '" + s.name + "'");
    sys.nodalization.push_back(m.n);
    sys.surface_names.push_back(s.name);
    const Material& mat = s.material;
    const double kt = mat.conductivity * mat.thickness;
    double gv = 0.0;
    if (s.is_2d()) {
      sys.face_area[j] = s.width * s.height;
      sys.area_exponent[j] = -2.0;
      // edge length / centre distance is n-independent on a uniform grid
      sys.g_u_coef[j] = kt * s.height / s.width;
      sys.g_u_exponent[j] = 0.0;
      gv = kt * s.width / s.height;
    } else {
      const double circ = 2.0 * std::numbers::pi * mat.radius;
      sys.face_area[j] = s.length() * circ;
      sys.area_exponent[j] = -1.0;
      sys.g_u_coef[j] = kt * circ / s.length();
      sys.g_u_exponent[j] = 1.0;
    }
    const std::size_t off = sys.layout.offset(j);
    for (std::size_t k = 0; k < sys.layout.count(j); ++k) {
      const auto i = static_cast<Eigen::Index>(off + k);
      sys.heat_per_area[i] = mat.density * mat.specific_heat * mat.thickness;
      sys.g_v[i] = gv;
      sys.sigma_eps[i] = settings.stefan_boltzmann * mat.ir_emissivity;
      sys.node_surface.push_back(static_cast<int>(j));
    }
    face_laplacians(m, off, lu, lv);
  }

  auto lap_u = std::make_shared<ad::SparseMatrix>(nodes, nodes);
  lap_u->setFromTriplets(lu.begin(), lu.end());
  auto lap_v = std::make_shared<ad::SparseMatrix>(nodes, nodes);
  lap_v->setFromTriplets(lv.begin(), lv.end());
  sys.laplacian_u = std::move(lap_u);
  sys.laplacian_v = std::move(lap_v);
  sys.factors = std::make_shared<ad::Matrix>(vf.factors);

  const ad::Vector rowsum = vf.factors.rowwise().sum();
  sys.self_coef = rowsum + space;
  const double ts4 = std::pow(settings.sink_temperature, 4);
  sys.sink_term = space * ts4;
  return sys;
}

void check_state(const ad::Vector& t, long step) {
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]) || t[i] <= 0.0) {
      std::ostringstream msg;
      msg << "solver: unstable temperature " << t[i] << " K at node " << i
          << " after step " << step;
      throw InstabilityError(msg.str(), step);
    }
  }
}

ThermalState step(const ThermalSystem& sys, const ThermalState& state,
                  const ad::Vector& loads) {
  if (state.temperatures.size() != static_cast<Eigen::Index>(sys.size()) ||
      loads.size() != state.temperatures.size())
    throw ShapeError("solver: state/load size does not match the system");
  const auto c = node_coefficients(sys, sys.nodes_vector());
  ThermalState out;
  out.temperatures = step_temperatures(sys, c, loads, state.temperatures);
  out.time = state.time + sys.settings.dt;
  check_state(out.temperatures, 1);
  return out;
}

namespace {

ThermalState rollout(const ThermalSystem& sys, const ThermalState& initial,
                     const ad::Vector& loads,
                     const NodeCoefficients<ad::Vector>& c,
                     Trajectory* trajectory) {
  const long steps = sys.settings.steps();
  ThermalState s = initial;
  if (trajectory) {
    trajectory->times.push_back(s.time);
    trajectory->states.push_back(s.temperatures);
  }
  for (long k = 0; k < steps; ++k) {
    s.temperatures = step_temperatures(sys, c, loads, s.temperatures);
    s.time += sys.settings.dt;
    check_state(s.temperatures, k + 1);
    if (trajectory) {
      trajectory->times.push_back(s.time);
      trajectory->states.push_back(s.temperatures);
    }
  }
  return s;
}

}  // namespace

ThermalState simulate(const ThermalSystem& sys, const ThermalState& initial,
                      const ad::Vector& loads, Trajectory* trajectory) {
  if (initial.temperatures.size() != static_cast<Eigen::Index>(sys.size()) ||
      loads.size() != initial.temperatures.size())
    throw ShapeError("solver: state/load size does not match the system");
  const auto c = node_coefficients(sys, sys.nodes_vector());
  return rollout(sys, initial, loads, c, trajectory);
}

ThermalState simulate_flux(const ThermalSystem& sys, const ThermalState& initial,
                           const ad::Vector& flux) {
  if (initial.temperatures.size() != static_cast<Eigen::Index>(sys.size()) ||
      flux.size() != initial.temperatures.size())
    throw ShapeError("solver: state/flux size does not match the system");
  const auto c = node_coefficients(sys, sys.nodes_vector());
  const ad::Vector loads = loads_from_flux(c, flux);
  return rollout(sys, initial, loads, c, nullptr);
}

StabilityReport stability_bound(const ThermalSystem& sys, double t_ref) {
  const auto c = node_coefficients(sys, sys.nodes_vector());
  const ad::Vector cap = c.area.cwiseProduct(sys.heat_per_area);
  const ad::Vector deg_u = -sys.laplacian_u->diagonal();
  const ad::Vector deg_v = -sys.laplacian_v->diagonal();
  const ad::Vector g = c.g_u.cwiseProduct(deg_u) + sys.g_v.cwiseProduct(deg_v);
  const double t3 = t_ref * t_ref * t_ref;
  StabilityReport r;
  r.dt_max = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < cap.size(); ++i) {
    const double denom = g[i] + 4.0 * c.rad_area[i] * t3;
    if (denom <= 0.0) continue;
    const double bound = cap[i] / denom;
    if (bound < r.dt_max) {
      r.dt_max = bound;
      r.limiting_node = static_cast<int>(i);
    }
  }
  r.warning = sys.settings.dt > r.dt_max;
  return r;
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const ThermalSystem& sys, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trajectory to " + path.string());
  out << "time_s,surface,node_index,T_K\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const ad::Vector& t = traj.states[k];
    for (std::size_t i = 0; i < sys.size(); ++i) {
      const int s = sys.layout.surface_of(i);
      out << traj.times[k] << ',' << sys.surface_names[s] << ','
          << i - sys.layout.offset(s) << ',' << t[static_cast<Eigen::Index>(i)]
          << '\n';
    }
  }
}

}  // namespace adaptherm
