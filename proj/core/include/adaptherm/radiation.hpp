#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "adaptherm/config.hpp"
#include "adaptherm/mesh.hpp"

namespace adaptherm {

/// Node-to-node diffuse exchange factors over a concatenated node layout.
struct ViewFactorMatrix {
  Eigen::MatrixXd factors;       // F[i][j], row i = emitter
  Eigen::VectorXd space;         // 1 - sum_j F[i][j]
  Eigen::VectorXd areas;         // radiating area per node
  std::uint64_t rays_per_node = 0;
  std::uint64_t seed = 0;
  std::uint64_t geometry_hash = 0;

  Eigen::Index size() const { return factors.rows(); }
};

/// Space factors derived from rows, computed identically wherever needed.
Eigen::VectorXd space_factors(const Eigen::MatrixXd& factors);

/// Monte-Carlo view factors between the elements of `meshes`. Each emitter
/// draws `rays_per_node` cosine-weighted rays from its own substream, so
/// the result is independent of `threads`.
ViewFactorMatrix compute_viewfactors(const SpacecraftConfig& config,
                                     const std::vector<FaceMesh>& meshes,
                                     int rays_per_node, std::uint64_t seed,
                                     int threads = 1);

/// Dense (n = 10) view factors for the whole spacecraft.
ViewFactorMatrix compute_dense_viewfactors(const SpacecraftConfig& config,
                                           int rays_per_node,
                                           std::uint64_t seed,
                                           int threads = 1);

/// Coarse factors: each coarse node takes the row of its nearest dense node
/// on the same surface (ties to the lowest index), and target columns are
/// summed over the dense nodes whose centres fall inside each coarse element.
ViewFactorMatrix lookup_coarse_viewfactors(
    const ViewFactorMatrix& dense, const std::vector<FaceMesh>& dense_meshes,
    const std::vector<FaceMesh>& coarse_meshes);

/// Index of the nearest dense node (global index) for every coarse node.
std::vector<int> nearest_dense_nodes(const std::vector<FaceMesh>& dense_meshes,
                                     const std::vector<FaceMesh>& coarse_meshes);

struct ReciprocityReport {
  std::size_t pairs_checked = 0;
  std::size_t node_violations = 0;     // |AiFij - AjFji| beyond 3 sigma
  double max_normalized_error = 0.0;   // max of error / tolerance
  std::size_t surface_pairs_checked = 0;
  std::size_t surface_violations = 0;  // surface-aggregated pairs
  double max_surface_z = 0.0;          // largest |error| / sigma per surface pair
  double max_row_sum = 0.0;
  double sigmas = 3.0;
  double violation_fraction() const {
    return pairs_checked ? static_cast<double>(node_violations) / pairs_checked
                         : 0.0;
  }
  /// Probability of seeing at least surface_violations exceedances among
  /// surface_pairs_checked independent unbiased estimates.
  double surface_p_value() const;
  /// Node exceedances <= 1 %, surface exceedances statistically plausible
  /// (p >= 1e-3) with none beyond 5 sigma, and row sums <= 1 + tolerance.
  bool passes(double row_sum_tolerance = 1e-12) const;
};

/// Reciprocity within `sigmas` binomial standard deviations, at node level
/// and aggregated per surface pair. `surface_of` maps node to surface.
ReciprocityReport check_reciprocity(const ViewFactorMatrix& vf,
                                    const std::vector<int>& surface_of,
                                    double sigmas = 3.0);

/// Analytic view factor between two directly opposed, aligned a x b
/// rectangles separated by c.
double parallel_plate_factor(double a, double b, double c);

inline constexpr std::uint32_t kViewFactorVersion = 1;

void save_viewfactors(const std::filesystem::path& path,
                      const ViewFactorMatrix& vf);
/// Reads a cache file; areas are left empty and must be attached by the
/// caller from the meshes.
ViewFactorMatrix load_viewfactors(const std::filesystem::path& path);

/// Cache file name keyed by geometry hash, seed and ray count.
std::filesystem::path viewfactor_cache_path(const std::filesystem::path& dir,
                                            const SpacecraftConfig& config,
                                            int rays_per_node,
                                            std::uint64_t seed);

/// Loads the cache for these arguments from `dir`, computing and writing it
/// on a miss.
ViewFactorMatrix load_or_compute_dense_viewfactors(
    const std::filesystem::path& dir, const SpacecraftConfig& config,
    int rays_per_node, std::uint64_t seed, int threads = 1);

}  // namespace adaptherm
