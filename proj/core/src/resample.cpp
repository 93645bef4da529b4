#include "adaptherm/resample.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "adaptherm/error.hpp"

namespace adaptherm {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

void check_pair(const FaceMesh& a, const FaceMesh& b) {
  if (a.surface_id != b.surface_id || a.kind != b.kind) {
    throw ShapeError("resample: meshes belong to different surfaces (" +
                     std::to_string(a.surface_id) + " vs " +
                     std::to_string(b.surface_id) + ")");
  }
}

ad::SparseMatrix from_triplets(Eigen::Index rows, Eigen::Index cols,
                               const Triplets& t) {
  ad::SparseMatrix m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

ad::SparseMatrix identity(Eigen::Index n) {
  ad::SparseMatrix m(n, n);
  m.setIdentity();
  m.makeCompressed();
  return m;
}

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

/// Linear interpolation stencil over centres (k + 0.5) * h, k < count,
/// clamped to the outermost centres.
struct Stencil {
  int k0;
  double frac;
};

Stencil linear_stencil(double x, double h, int count) {
  const double t = x / h - 0.5;
  int k0 = static_cast<int>(std::floor(t));
  k0 = std::clamp(k0, 0, count - 2);
  const double frac = std::clamp(t - k0, 0.0, 1.0);
  return {k0, frac};
}

std::vector<double> centres(int n, double extent) {
  std::vector<double> c(n);
  for (int k = 0; k < n; ++k) c[k] = (k + 0.5) * extent / n;
  return c;
}

}  // namespace

Eigen::VectorXd natural_spline_weights(const std::vector<double>& knots,
                                       double x) {
  const int m = static_cast<int>(knots.size());
  if (m < 2) throw MeshError("spline needs at least 2 knots");
  x = std::clamp(x, knots.front(), knots.back());
  int seg = 0;
  while (seg < m - 2 && x > knots[seg + 1]) ++seg;
  const double h = knots[seg + 1] - knots[seg];
  const double a = (knots[seg + 1] - x) / h;
  const double b = (x - knots[seg]) / h;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  w[seg] += a;
  w[seg + 1] += b;
  if (m == 2) return w;

  // Interior second derivatives M = A^{-1} B y with natural end conditions;
  // the evaluation adds c_a * M[seg] + c_b * M[seg + 1].
  const int interior = m - 2;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(interior, interior);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(interior, m);
  for (int i = 1; i <= m - 2; ++i) {
    const double hl = knots[i] - knots[i - 1];
    const double hr = knots[i + 1] - knots[i];
    const int r = i - 1;
    A(r, r) = (hl + hr) / 3.0;
    if (r > 0) A(r, r - 1) = hl / 6.0;
    if (r < interior - 1) A(r, r + 1) = hr / 6.0;
    B(r, i - 1) = 1.0 / hl;
    B(r, i) = -1.0 / hl - 1.0 / hr;
    B(r, i + 1) = 1.0 / hr;
  }
  const Eigen::MatrixXd moments = A.partialPivLu().solve(B);  // interior x m
  const double ca = (a * a * a - a) * h * h / 6.0;
  const double cb = (b * b * b - b) * h * h / 6.0;
  if (seg >= 1) w += ca * moments.row(seg - 1).transpose();
  if (seg + 1 <= m - 2) w += cb * moments.row(seg).transpose();
  return w;
}

ad::SparseMatrix load_downsample_matrix(const FaceMesh& dense,
                                        const FaceMesh& sparse) {
  check_pair(dense, sparse);
  const auto rows = static_cast<Eigen::Index>(sparse.node_count());
  const auto cols = static_cast<Eigen::Index>(dense.node_count());
  if (dense.n == sparse.n) return identity(rows);
  for (std::size_t j = 0; j < dense.node_count(); ++j) {
    if (!(dense.measures[j] > 0.0)) {
      throw MeshError("resample: zero-area dense element on surface " +
                      std::to_string(dense.surface_id));
    }
  }
  Triplets t;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const ElementBox& s = sparse.elements[i];
    for (Eigen::Index j = 0; j < cols; ++j) {
      const ElementBox& d = dense.elements[j];
      double ov = overlap(s.u0, s.u1, d.u0, d.u1);
      if (dense.is_2d()) ov *= overlap(s.v0, s.v1, d.v0, d.v1);
      if (ov > 0.0) t.emplace_back(i, j, ov / dense.measures[j]);
    }
  }
  return from_triplets(rows, cols, t);
}

ad::SparseMatrix temperature_downsample_matrix(const FaceMesh& dense,
                                               const FaceMesh& sparse) {
  check_pair(dense, sparse);
  const auto rows = static_cast<Eigen::Index>(sparse.node_count());
  const auto cols = static_cast<Eigen::Index>(dense.node_count());
  if (dense.n == sparse.n) return identity(rows);
  const int nd = dense.n;
  const double hu = dense.extent_u / nd;
  Triplets t;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& c = sparse.local_centers[i];
    const Stencil su = linear_stencil(c.x(), hu, nd);
    if (!dense.is_2d()) {
      t.emplace_back(i, su.k0, 1.0 - su.frac);
      t.emplace_back(i, su.k0 + 1, su.frac);
      continue;
    }
    const Stencil sv = linear_stencil(c.y(), dense.extent_v / nd, nd);
    for (int dv = 0; dv < 2; ++dv) {
      const double wv = dv ? sv.frac : 1.0 - sv.frac;
      for (int du = 0; du < 2; ++du) {
        const double wu = du ? su.frac : 1.0 - su.frac;
        t.emplace_back(i, (sv.k0 + dv) * nd + (su.k0 + du), wu * wv);
      }
    }
  }
  return from_triplets(rows, cols, t);
}

ad::SparseMatrix temperature_upsample_matrix(const FaceMesh& sparse,
                                             const FaceMesh& dense) {
  check_pair(dense, sparse);
  if (sparse.n < kMinNodes) throw MeshError("upsample: sparse n < 2");
  const auto rows = static_cast<Eigen::Index>(dense.node_count());
  const auto cols = static_cast<Eigen::Index>(sparse.node_count());
  if (dense.n == sparse.n) return identity(rows);
  const int ns = sparse.n;
  const int nd = dense.n;

  const auto knots_u = centres(ns, sparse.extent_u);
  const auto query_u = centres(nd, dense.extent_u);
  std::vector<Eigen::VectorXd> wu(nd);
  for (int k = 0; k < nd; ++k) wu[k] = natural_spline_weights(knots_u, query_u[k]);

  Triplets t;
  if (!dense.is_2d()) {
    for (int k = 0; k < nd; ++k) {
      for (int m = 0; m < ns; ++m) {
        if (wu[k][m] != 0.0) t.emplace_back(k, m, wu[k][m]);
      }
    }
    return from_triplets(rows, cols, t);
  }
  const auto knots_v = centres(ns, sparse.extent_v);
  const auto query_v = centres(nd, dense.extent_v);
  std::vector<Eigen::VectorXd> wv(nd);
  for (int k = 0; k < nd; ++k) wv[k] = natural_spline_weights(knots_v, query_v[k]);
  // Tensor product: interpolate along u within each sparse row, then along v.
  for (int r = 0; r < nd; ++r) {
    for (int c = 0; c < nd; ++c) {
      for (int sr = 0; sr < ns; ++sr) {
        const double a = wv[r][sr];
        if (a == 0.0) continue;
        for (int sc = 0; sc < ns; ++sc) {
          const double w = a * wu[c][sc];
          if (w != 0.0) t.emplace_back(r * nd + c, sr * ns + sc, w);
        }
      }
    }
  }
  return from_triplets(rows, cols, t);
}

LoadField downsample_loads(const FaceMesh& dense, const FaceMesh& sparse,
                           const LoadField& q_dense) {
  if (q_dense.size() != static_cast<Eigen::Index>(dense.node_count())) {
    throw ShapeError("downsample_loads: load size does not match dense mesh");
  }
  if (dense.n == sparse.n) {
    check_pair(dense, sparse);
    return q_dense;
  }
  return load_downsample_matrix(dense, sparse) * q_dense;
}

TemperatureField downsample_temperature(const FaceMesh& dense,
                                        const FaceMesh& sparse,
                                        const TemperatureField& t_dense) {
  if (t_dense.size() != static_cast<Eigen::Index>(dense.node_count())) {
    throw ShapeError("downsample_temperature: field size does not match mesh");
  }
  if (dense.n == sparse.n) {
    check_pair(dense, sparse);
    return t_dense;
  }
  return temperature_downsample_matrix(dense, sparse) * t_dense;
}

TemperatureField upsample_temperature(const FaceMesh& sparse,
                                      const FaceMesh& dense,
                                      const TemperatureField& t_sparse) {
  if (t_sparse.size() != static_cast<Eigen::Index>(sparse.node_count())) {
    throw ShapeError("upsample_temperature: field size does not match mesh");
  }
  if (dense.n == sparse.n) {
    check_pair(dense, sparse);
    return t_sparse;
  }
  return temperature_upsample_matrix(sparse, dense) * t_sparse;
}

// ---------------------------------------------------------------------------

ResampleCache::ResampleCache(std::vector<FaceMesh> dense_meshes)
    : dense_(std::move(dense_meshes)) {}

const ResampleCache::FaceOps& ResampleCache::face(const FaceMesh& coarse) const {
  const auto key = std::make_pair(coarse.surface_id, coarse.n);
  std::lock_guard lock(mutex_);
  auto it = faces_.find(key);
  if (it != faces_.end()) return *it->second;
  const FaceMesh& dense = dense_.at(static_cast<std::size_t>(coarse.surface_id));
  auto ops = std::make_unique<FaceOps>();
  ops->load_down = load_downsample_matrix(dense, coarse);
  ops->temp_down = temperature_downsample_matrix(dense, coarse);
  ops->temp_up = temperature_upsample_matrix(coarse, dense);
  return *faces_.emplace(key, std::move(ops)).first->second;
}

GlobalResampler ResampleCache::global(const std::vector<FaceMesh>& coarse) const {
  if (coarse.size() != dense_.size()) {
    throw ShapeError("resample: coarse mesh count does not match dense meshes");
  }
  Eigen::Index dense_total = 0, coarse_total = 0;
  bool identity_all = true;
  for (std::size_t j = 0; j < coarse.size(); ++j) {
    dense_total += static_cast<Eigen::Index>(dense_[j].node_count());
    coarse_total += static_cast<Eigen::Index>(coarse[j].node_count());
    identity_all = identity_all && coarse[j].n == dense_[j].n;
  }
  Triplets ld, td, tu;
  Eigen::Index d0 = 0, c0 = 0;
  for (std::size_t j = 0; j < coarse.size(); ++j) {
    const FaceOps& ops = face(coarse[j]);
    auto append = [](Triplets& out, const ad::SparseMatrix& m, Eigen::Index r0,
                     Eigen::Index col0) {
      for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
        for (ad::SparseMatrix::InnerIterator it(m, r); it; ++it) {
          out.emplace_back(r0 + it.row(), col0 + it.col(), it.value());
        }
      }
    };
    append(ld, ops.load_down, c0, d0);
    append(td, ops.temp_down, c0, d0);
    append(tu, ops.temp_up, d0, c0);
    d0 += static_cast<Eigen::Index>(dense_[j].node_count());
    c0 += static_cast<Eigen::Index>(coarse[j].node_count());
  }
  GlobalResampler g;
  g.load_down = std::make_shared<const ad::SparseMatrix>(
      from_triplets(coarse_total, dense_total, ld));
  g.temp_down = std::make_shared<const ad::SparseMatrix>(
      from_triplets(coarse_total, dense_total, td));
  g.temp_up = std::make_shared<const ad::SparseMatrix>(
      from_triplets(dense_total, coarse_total, tu));
  g.identity = identity_all;
  return g;
}

}  // namespace adaptherm
