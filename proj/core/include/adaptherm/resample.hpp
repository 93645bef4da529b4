#pragma once

// Transfers between the dense (n = 10) meshes and coarse meshes of the same
// surface. Every resampler is a fixed sparse linear operator per
// (surface, n) pair, so the tape differentiates it as a matrix multiply.

#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "adaptherm/autodiff.hpp"
#include "adaptherm/mesh.hpp"

namespace adaptherm {

using LoadField = Eigen::VectorXd;         // W per node
using TemperatureField = Eigen::VectorXd;  // K per node

/// Flux-preserving remap: Q_S[i] = sum_j overlap(i, j) * Q_D[j] / |j|.
ad::SparseMatrix load_downsample_matrix(const FaceMesh& dense,
                                        const FaceMesh& sparse);
/// Bilinear (2D) or linear (1D) sampling of the dense node-centre field at
/// the sparse node centres.
ad::SparseMatrix temperature_downsample_matrix(const FaceMesh& dense,
                                               const FaceMesh& sparse);
/// Natural cubic spline through the sparse centres (tensor product in 2D),
/// evaluated at the dense centres; clamped outside the outermost centres.
ad::SparseMatrix temperature_upsample_matrix(const FaceMesh& sparse,
                                             const FaceMesh& dense);

LoadField downsample_loads(const FaceMesh& dense, const FaceMesh& sparse,
                           const LoadField& q_dense);
TemperatureField downsample_temperature(const FaceMesh& dense,
                                        const FaceMesh& sparse,
                                        const TemperatureField& t_dense);
TemperatureField upsample_temperature(const FaceMesh& sparse,
                                      const FaceMesh& dense,
                                      const TemperatureField& t_sparse);

/// Weights of the natural cubic spline through `knots` evaluated at `x`
/// (clamped to the knot range): value = sum_k w[k] * y[k].
Eigen::VectorXd natural_spline_weights(const std::vector<double>& knots,
                                       double x);

/// Block-diagonal resamplers over all surfaces for one coarse nodalization.
struct GlobalResampler {
  std::shared_ptr<const ad::SparseMatrix> load_down;   // coarse x dense
  std::shared_ptr<const ad::SparseMatrix> temp_down;   // coarse x dense
  std::shared_ptr<const ad::SparseMatrix> temp_up;     // dense x coarse
  bool identity = false;
};

/// Thread-safe memo of per-face operators keyed by (surface, n). Dense
/// meshes are fixed at construction.
class ResampleCache {
 public:
  explicit ResampleCache(std::vector<FaceMesh> dense_meshes);

  const std::vector<FaceMesh>& dense_meshes() const { return dense_; }
  GlobalResampler global(const std::vector<FaceMesh>& coarse) const;

 private:
  struct FaceOps {
    ad::SparseMatrix load_down, temp_down, temp_up;
  };
  const FaceOps& face(const FaceMesh& coarse) const;

  std::vector<FaceMesh> dense_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<int, int>, std::unique_ptr<FaceOps>> faces_;
};

}  // namespace adaptherm
