#include "adaptherm/radiation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include "adaptherm/binary_io.hpp"
#include "adaptherm/error.hpp"
#include "adaptherm/geometry.hpp"

namespace adaptherm {

namespace {

constexpr char kMagic[5] = "ATVF";

std::vector<std::size_t> offsets_of(const std::vector<FaceMesh>& meshes) {
  std::vector<std::size_t> off{0};
  for (const auto& m : meshes) off.push_back(off.back() + m.node_count());
  return off;
}

/// Coarse element of a uniform n-mesh containing dense node `k` of a uniform
/// nd-mesh, using exact integer arithmetic on the centre (2c+1)/(2nd).
int coarse_cell(int k, int nd, int n) { return ((2 * k + 1) * n) / (2 * nd); }

}  // namespace

Eigen::VectorXd space_factors(const Eigen::MatrixXd& factors) {
  Eigen::VectorXd s(factors.rows());
  for (Eigen::Index i = 0; i < factors.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < factors.cols(); ++j) row += factors(i, j);
    s[i] = 1.0 - row;
  }
  return s;
}

ViewFactorMatrix compute_viewfactors(const SpacecraftConfig& config,
                                     const std::vector<FaceMesh>& meshes,
                                     int rays_per_node, std::uint64_t seed,
                                     int threads) {
  if (rays_per_node < 1) throw Error("view factors: rays_per_node must be >= 1");
  if (meshes.size() != config.size()) {
    throw ShapeError("view factors: one mesh per surface required");
  }
  for (const auto& m : meshes) {
    for (double a : m.areas) {
      if (!(a > 0.0)) {
        throw MeshError("view factors: zero-area element on surface " +
                        std::to_string(m.surface_id));
      }
    }
  }
  const SceneGeometry scene(config);
  const auto off = offsets_of(meshes);
  const auto total = static_cast<Eigen::Index>(off.back());

  ViewFactorMatrix vf;
  vf.factors = Eigen::MatrixXd::Zero(total, total);
  vf.areas.resize(total);
  vf.rays_per_node = static_cast<std::uint64_t>(rays_per_node);
  vf.seed = seed;
  vf.geometry_hash = config.geometry_hash();

  std::vector<std::pair<int, int>> emitters;  // (surface, local index)
  for (std::size_t j = 0; j < meshes.size(); ++j) {
    for (std::size_t i = 0; i < meshes[j].node_count(); ++i) {
      emitters.emplace_back(static_cast<int>(j), static_cast<int>(i));
      vf.areas[static_cast<Eigen::Index>(off[j] + i)] = meshes[j].areas[i];
    }
  }

  auto trace_row = [&](std::size_t row) {
    const auto [sj, li] = emitters[row];
    const Surface& src = config.surface(static_cast<std::size_t>(sj));
    UniformStream rng(mix_seed(seed, row));
    std::vector<std::uint32_t> hits(static_cast<std::size_t>(total), 0);
    for (int r = 0; r < rays_per_node; ++r) {
      const double a = rng.next(), b = rng.next(), c = rng.next(),
                   d = rng.next();
      const auto [origin, normal] =
          sample_element(src, meshes[static_cast<std::size_t>(sj)],
                         static_cast<std::size_t>(li), a, b);
      const Ray ray{origin, cosine_direction(normal, c, d)};
      const auto hit = scene.intersect(ray, sj);
      if (!hit || !hit->front) continue;
      const FaceMesh& target = meshes[static_cast<std::size_t>(hit->surface)];
      const Surface& ts = config.surface(static_cast<std::size_t>(hit->surface));
      const int e = element_at(ts, target.n, hit->u, hit->v);
      ++hits[off[static_cast<std::size_t>(hit->surface)] + static_cast<std::size_t>(e)];
    }
    for (Eigen::Index j = 0; j < total; ++j) {
      vf.factors(static_cast<Eigen::Index>(row), j) =
          static_cast<double>(hits[static_cast<std::size_t>(j)]) / rays_per_node;
    }
  };

  const int workers = std::max(1, threads);
  if (workers == 1) {
    for (std::size_t row = 0; row < emitters.size(); ++row) trace_row(row);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t row = static_cast<std::size_t>(w); row < emitters.size();
             row += static_cast<std::size_t>(workers)) {
          trace_row(row);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  vf.space = space_factors(vf.factors);
  return vf;
}

ViewFactorMatrix compute_dense_viewfactors(const SpacecraftConfig& config,
                                           int rays_per_node,
                                           std::uint64_t seed, int threads) {
  const auto meshes =
      build_meshes(config, Nodalization::uniform(config.size(), kDenseNodes));
  return compute_viewfactors(config, meshes, rays_per_node, seed, threads);
}

std::vector<int> nearest_dense_nodes(const std::vector<FaceMesh>& dense_meshes,
                                     const std::vector<FaceMesh>& coarse_meshes) {
  if (dense_meshes.size() != coarse_meshes.size()) {
    throw ShapeError("lookup: dense and coarse mesh counts differ");
  }
  const auto dense_off = offsets_of(dense_meshes);
  std::vector<int> nearest;
  for (std::size_t s = 0; s < coarse_meshes.size(); ++s) {
    const FaceMesh& c = coarse_meshes[s];
    const FaceMesh& d = dense_meshes[s];
    if (c.surface_id != d.surface_id) {
      throw ShapeError("lookup: surface order differs between meshes");
    }
    for (std::size_t i = 0; i < c.node_count(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_k = 0;
      for (std::size_t k = 0; k < d.node_count(); ++k) {
        const double dist = (c.centers[i] - d.centers[k]).squaredNorm();
        if (dist < best) {
          best = dist;
          best_k = k;
        }
      }
      nearest.push_back(static_cast<int>(dense_off[s] + best_k));
    }
  }
  return nearest;
}

ViewFactorMatrix lookup_coarse_viewfactors(
    const ViewFactorMatrix& dense, const std::vector<FaceMesh>& dense_meshes,
    const std::vector<FaceMesh>& coarse_meshes) {
  const auto dense_off = offsets_of(dense_meshes);
  if (static_cast<Eigen::Index>(dense_off.back()) != dense.size()) {
    throw ShapeError("lookup: view-factor matrix has " +
                     std::to_string(dense.size()) + " nodes, meshes have " +
                     std::to_string(dense_off.back()));
  }
  const auto nearest = nearest_dense_nodes(dense_meshes, coarse_meshes);
  const auto coarse_off = offsets_of(coarse_meshes);

  // Column aggregation: dense node -> coarse node of the same surface.
  std::vector<int> column_target(dense_off.back());
  for (std::size_t s = 0; s < dense_meshes.size(); ++s) {
    const FaceMesh& d = dense_meshes[s];
    const int nd = d.n, n = coarse_meshes[s].n;
    for (std::size_t k = 0; k < d.node_count(); ++k) {
      int local;
      if (d.is_2d()) {
        const int r = static_cast<int>(k) / nd, c = static_cast<int>(k) % nd;
        local = coarse_cell(r, nd, n) * n + coarse_cell(c, nd, n);
      } else {
        local = coarse_cell(static_cast<int>(k), nd, n);
      }
      column_target[dense_off[s] + k] = static_cast<int>(coarse_off[s]) + local;
    }
  }

  const auto total = static_cast<Eigen::Index>(coarse_off.back());
  ViewFactorMatrix out;
  out.factors = Eigen::MatrixXd::Zero(total, total);
  out.space.resize(total);
  out.areas.resize(total);
  out.rays_per_node = dense.rays_per_node;
  out.seed = dense.seed;
  out.geometry_hash = dense.geometry_hash;
  for (Eigen::Index i = 0; i < total; ++i) {
    const Eigen::Index src = nearest[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < dense.size(); ++k) {
      const double f = dense.factors(src, k);
      if (f != 0.0) out.factors(i, column_target[static_cast<std::size_t>(k)]) += f;
    }
    out.space[i] = dense.space[src];
  }
  std::size_t at = 0;
  for (const auto& m : coarse_meshes) {
    for (double a : m.areas) out.areas[static_cast<Eigen::Index>(at++)] = a;
  }
  return out;
}

ReciprocityReport check_reciprocity(const ViewFactorMatrix& vf,
                                    const std::vector<int>& surface_of,
                                    double sigmas) {
  ReciprocityReport rep;
  rep.sigmas = sigmas;
  const Eigen::Index n = vf.size();
  const double rays = static_cast<double>(vf.rays_per_node);
  const Eigen::VectorXd& A = vf.areas;
  for (Eigen::Index i = 0; i < n; ++i) {
    rep.max_row_sum = std::max(rep.max_row_sum, vf.factors.row(i).sum());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double fij = vf.factors(i, j), fji = vf.factors(j, i);
      if (fij == 0.0 && fji == 0.0) continue;
      ++rep.pairs_checked;
      const double pooled = 0.5 * (A[i] * fij + A[j] * fji);
      const double pij = std::min(1.0, pooled / A[i]);
      const double pji = std::min(1.0, pooled / A[j]);
      const double var = A[i] * A[i] * pij * (1.0 - pij) / rays +
                         A[j] * A[j] * pji * (1.0 - pji) / rays;
      // One-hit resolution floor for pairs seen by only a handful of rays.
      const double tol =
          sigmas * std::sqrt(var) + std::max(A[i], A[j]) / rays;
      const double err = std::abs(A[i] * fij - A[j] * fji);
      rep.max_normalized_error = std::max(rep.max_normalized_error, err / tol);
      if (err > tol) ++rep.node_violations;
    }
  }
  // Surface aggregation.
  const int surfaces =
      surface_of.empty() ? 0 : *std::max_element(surface_of.begin(), surface_of.end()) + 1;
  Eigen::MatrixXd exchange = Eigen::MatrixXd::Zero(surfaces, surfaces);
  Eigen::MatrixXd variance = Eigen::MatrixXd::Zero(surfaces, surfaces);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd to_surface = Eigen::VectorXd::Zero(surfaces);
    for (Eigen::Index j = 0; j < n; ++j) to_surface[surface_of[j]] += vf.factors(i, j);
    for (int t = 0; t < surfaces; ++t) {
      const double f = to_surface[t];
      exchange(surface_of[i], t) += A[i] * f;
      variance(surface_of[i], t) += A[i] * A[i] * f * (1.0 - f) / rays;
    }
  }
  for (int s = 0; s < surfaces; ++s) {
    for (int t = s + 1; t < surfaces; ++t) {
      if (exchange(s, t) == 0.0 && exchange(t, s) == 0.0) continue;
      ++rep.surface_pairs_checked;
      const double err = std::abs(exchange(s, t) - exchange(t, s));
      const double sd = std::sqrt(variance(s, t) + variance(t, s)) + 1e-15;
      rep.max_surface_z = std::max(rep.max_surface_z, err / sd);
      if (err > sigmas * sd) ++rep.surface_violations;
    }
  }
  return rep;
}

double ReciprocityReport::surface_p_value() const {
  const double p = std::erfc(sigmas / std::numbers::sqrt2);  // two-sided
  const auto m = surface_pairs_checked;
  // P(K >= k) = 1 - sum_{i<k} C(m,i) p^i (1-p)^(m-i)
  double below = 0.0, term = std::pow(1.0 - p, static_cast<double>(m));
  for (std::size_t i = 0; i < surface_violations && i <= m; ++i) {
    below += term;
    term *= static_cast<double>(m - i) / static_cast<double>(i + 1) * p / (1.0 - p);
  }
  return std::max(0.0, 1.0 - below);
}

bool ReciprocityReport::passes(double row_sum_tolerance) const {
  return violation_fraction() <= 0.01 && surface_p_value() >= 1e-3 &&
         max_surface_z <= 5.0 && max_row_sum <= 1.0 + row_sum_tolerance;
}

double parallel_plate_factor(double a, double b, double c) {
  const double X = a / c, Y = b / c;
  const double x2 = 1.0 + X * X, y2 = 1.0 + Y * Y;
  const double term =
      std::log(std::sqrt(x2 * y2 / (1.0 + X * X + Y * Y))) +
      X * std::sqrt(y2) * std::atan(X / std::sqrt(y2)) +
      Y * std::sqrt(x2) * std::atan(Y / std::sqrt(x2)) - X * std::atan(X) -
      Y * std::atan(Y);
  return 2.0 / (std::numbers::pi * X * Y) * term;
}

void save_viewfactors(const std::filesystem::path& path,
                      const ViewFactorMatrix& vf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write view-factor cache " + path.string());
  io::write_header(out, kMagic, kViewFactorVersion);
  io::write(out, static_cast<std::uint64_t>(vf.size()));
  io::write(out, vf.seed);
  io::write(out, vf.rays_per_node);
  io::write(out, vf.geometry_hash);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
      rows = vf.factors;
  io::write_doubles(out, rows.data(), static_cast<std::size_t>(rows.size()));
  if (!out) throw Error("failed writing view-factor cache " + path.string());
}

ViewFactorMatrix load_viewfactors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open view-factor cache " + path.string());
  io::read_header(in, kMagic, kViewFactorVersion, "view-factor cache");
  const auto n = io::read<std::uint64_t>(in, "node count");
  ViewFactorMatrix vf;
  vf.seed = io::read<std::uint64_t>(in, "seed");
  vf.rays_per_node = io::read<std::uint64_t>(in, "rays");
  vf.geometry_hash = io::read<std::uint64_t>(in, "geometry hash");
  if (n > 100000) throw FormatError("view-factor cache: implausible node count");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(
      static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  io::read_doubles(in, rows.data(), static_cast<std::size_t>(n * n), "factors");
  vf.factors = rows;
  vf.space = space_factors(vf.factors);
  return vf;
}

std::filesystem::path viewfactor_cache_path(const std::filesystem::path& dir,
                                            const SpacecraftConfig& config,
                                            int rays_per_node,
                                            std::uint64_t seed) {
  std::ostringstream name;
  name << "viewfactors_" << std::hex << config.geometry_hash() << std::dec
       << "_s" << seed << "_r" << rays_per_node << ".bin";
  return dir / name.str();
}

ViewFactorMatrix load_or_compute_dense_viewfactors(
    const std::filesystem::path& dir, const SpacecraftConfig& config,
    int rays_per_node, std::uint64_t seed, int threads) {
  const auto path = viewfactor_cache_path(dir, config, rays_per_node, seed);
  const auto meshes =
      build_meshes(config, Nodalization::uniform(config.size(), kDenseNodes));
  if (std::filesystem::exists(path)) {
    ViewFactorMatrix vf = load_viewfactors(path);
    if (vf.geometry_hash == config.geometry_hash() &&
        vf.seed == seed && vf.rays_per_node == static_cast<std::uint64_t>(rays_per_node)) {
      std::vector<double> areas;
      for (const auto& m : meshes) areas.insert(areas.end(), m.areas.begin(), m.areas.end());
      vf.areas = Eigen::Map<Eigen::VectorXd>(areas.data(), static_cast<Eigen::Index>(areas.size()));
      return vf;
    }
  }
  ViewFactorMatrix vf =
      compute_viewfactors(config, meshes, rays_per_node, seed, threads);
  std::filesystem::create_directories(dir);
  save_viewfactors(path, vf);
  return vf;
}

}  // namespace adaptherm
