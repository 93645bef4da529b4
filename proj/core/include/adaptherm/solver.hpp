#pragma once

// Explicit finite-difference conduction/radiation solver.
//
// Per node i with lumped capacity C_i = rho*cp*t*A_i:
//   T_i += dt/C_i * [ sum_m G_im (T_m - T_i) + Q_i
//                     + sigma*eps_i*A_i*( sum_j F_ij T_j^4 - (rowsum_i + Fs_i) T_i^4
//                                         + Fs_i T_sink^4 ) ]
// Conduction couples nodes of the same face only. The node coefficients are
// functions of the per-surface node counts so the same code runs on plain
// vectors and on tape Vars.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "adaptherm/autodiff.hpp"
#include "adaptherm/config.hpp"
#include "adaptherm/mesh.hpp"
#include "adaptherm/radiation.hpp"

namespace adaptherm {

struct SolverSettings {
  double dt = 0.1;          // s
  double duration = 50.0;   // s
  double stefan_boltzmann = 5.670374419e-8;
  double sink_temperature = 0.0;  // K

  /// duration / dt, validated to be an integer.
  long steps() const;
  void validate() const;
};

/// Everything the step needs for one nodalization, except the node counts
/// themselves, which enter through node_coefficients().
struct ThermalSystem {
  NodeLayout layout;
  std::vector<int> nodalization;
  std::vector<std::string> surface_names;

  std::shared_ptr<const ad::SparseMatrix> laplacian_u;  // unit weights
  std::shared_ptr<const ad::SparseMatrix> laplacian_v;
  std::shared_ptr<const ad::Matrix> factors;            // F

  // Per surface.
  ad::Vector face_area;      // radiating area of the whole face
  ad::Vector area_exponent;  // -2 (2D) or -1 (1D)
  ad::Vector g_u_coef;       // conductance per edge along u at n = 1
  ad::Vector g_u_exponent;   // 0 (2D) or 1 (1D)

  // Per node.
  std::vector<int> node_surface;
  ad::Vector heat_per_area;     // rho * cp * t
  ad::Vector g_v;               // conductance per edge along v
  ad::Vector sigma_eps;         // sigma * emissivity
  ad::Vector self_coef;         // rowsum + space factor
  ad::Vector sink_term;         // space factor * T_sink^4

  SolverSettings settings;

  std::size_t size() const { return layout.size(); }
  /// Node counts as the real vector fed to node_coefficients().
  ad::Vector nodes_vector() const;
};

/// Assembles the system for `meshes` (one per surface, config order) using
/// view factors already expressed on the same nodes.
ThermalSystem assemble_system(const SpacecraftConfig& config,
                              const std::vector<FaceMesh>& meshes,
                              const ViewFactorMatrix& vf,
                              const SolverSettings& settings);

template <class V>
struct NodeCoefficients {
  V area;       // radiating area per node
  V dt_over_c;  // dt / C_i
  V g_u;        // conductance per u-edge, per node
  V rad_area;   // sigma * eps_i * A_i
};

namespace detail {
inline ad::Vector pow_const(const ad::Vector& x, const ad::Vector& e) {
  return ad::pow(x, e);
}
inline ad::Var pow_const(const ad::Var& x, const ad::Vector& e) {
  return ad::pow(x, e);
}
inline ad::Vector gather_nodes(const ad::Vector& x, const std::vector<int>& idx) {
  return ad::gather(x, idx);
}
inline ad::Var gather_nodes(const ad::Var& x, const std::vector<int>& idx) {
  return ad::gather(x, idx);
}
inline ad::Vector scale(const ad::Vector& x, double c) { return x * c; }
inline ad::Var scale(const ad::Var& x, double c) { return x * c; }
inline ad::Vector fourth_power(const ad::Vector& x) { return ad::fourth(x); }
inline ad::Var fourth_power(const ad::Var& x) { return ad::fourth(x); }
inline ad::Vector add(const ad::Vector& a, const ad::Vector& b) { return a + b; }
inline ad::Var add(const ad::Var& a, const ad::Var& b) { return a + b; }
inline ad::Vector sub(const ad::Vector& a, const ad::Vector& b) { return a - b; }
inline ad::Var sub(const ad::Var& a, const ad::Var& b) { return a - b; }
}  // namespace detail

/// Node coefficients from per-surface node counts `n` (size = surfaces).
template <class V>
NodeCoefficients<V> node_coefficients(const ThermalSystem& sys, const V& n) {
  using namespace detail;
  const V area_s =
      ad::cwise_mul_const(pow_const(n, sys.area_exponent), sys.face_area);
  const V g_u_s =
      ad::cwise_mul_const(pow_const(n, sys.g_u_exponent), sys.g_u_coef);
  NodeCoefficients<V> c;
  c.area = gather_nodes(area_s, sys.node_surface);
  const V capacity = ad::cwise_mul_const(c.area, sys.heat_per_area);
  c.dt_over_c = scale(
      pow_const(capacity, ad::Vector::Constant(ad::value_of(capacity).size(), -1.0)),
      sys.settings.dt);
  c.g_u = gather_nodes(g_u_s, sys.node_surface);
  c.rad_area = ad::cwise_mul_const(c.area, sys.sigma_eps);
  return c;
}

/// Absorbed load per node from a per-node flux (W/m^2).
template <class V>
V loads_from_flux(const NodeCoefficients<V>& c, const ad::Vector& flux) {
  return ad::cwise_mul_const(c.area, flux);
}

/// One explicit step. `loads` are the absorbed powers per node.
template <class V>
V step_temperatures(const ThermalSystem& sys, const NodeCoefficients<V>& c,
                    const V& loads, const V& t) {
  using namespace detail;
  const V t4 = fourth_power(t);
  const V cond = add(ad::cwise_mul(c.g_u, ad::matvec(sys.laplacian_u, t)),
                     ad::cwise_mul_const(ad::matvec(sys.laplacian_v, t), sys.g_v));
  const V exchange =
      ad::add_const(sub(ad::matvec(sys.factors, t4),
                        ad::cwise_mul_const(t4, sys.self_coef)),
                    sys.sink_term);
  const V rad = ad::cwise_mul(c.rad_area, exchange);
  const V net = add(add(cond, loads), rad);
  return add(t, ad::cwise_mul(c.dt_over_c, net));
}

struct ThermalState {
  ad::Vector temperatures;  // K, concatenated faces
  double time = 0.0;        // s
};

/// Optional record of every step for CSV export.
struct Trajectory {
  std::vector<double> times;
  std::vector<ad::Vector> states;
};

/// Throws InstabilityError when any temperature is non-finite or <= 0.
void check_state(const ad::Vector& t, long step);

/// One step with fixed loads (W per node).
ThermalState step(const ThermalSystem& sys, const ThermalState& state,
                  const ad::Vector& loads);

/// settings.steps() explicit steps from `initial`.
ThermalState simulate(const ThermalSystem& sys, const ThermalState& initial,
                      const ad::Vector& loads, Trajectory* trajectory = nullptr);

/// Same rollout with loads given as flux per node so they scale with the
/// node areas derived from the node counts.
ThermalState simulate_flux(const ThermalSystem& sys, const ThermalState& initial,
                           const ad::Vector& flux);

struct StabilityReport {
  double dt_max = 0.0;
  int limiting_node = -1;
  bool warning = false;  // settings.dt > dt_max
};

/// Conservative explicit bound min_i C_i / (sum_m G_im + 4 sigma eps_i A_i
/// T_ref^3).
StabilityReport stability_bound(const ThermalSystem& sys, double t_ref = 400.0);

void write_trajectory_csv(const std::filesystem::path& path,
                          const ThermalSystem& sys, const Trajectory& traj);

}  // namespace adaptherm
