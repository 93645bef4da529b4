#pragma once

// Hybrid models: a transfer network maps dense loads to a per-surface
// nodalization (and, for the shifted variant, per-surface temperature
// offsets); the physics pipeline turns that into dense temperatures.
// Also hosts the purely data-driven baseline and the fixed-mesh baselines.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "adaptherm/dataset.hpp"
#include "adaptherm/nnet.hpp"
#include "adaptherm/physics_model.hpp"

namespace adaptherm {

enum class ModelKind : std::uint8_t { PimlA = 0, PimlAS = 1, Ann = 2, LF = 3, HF = 4 };

std::string_view to_string(ModelKind kind);
/// Accepts piml-a, piml-as, ann, lf, hf. Throws ConfigError otherwise.
ModelKind parse_model_kind(std::string_view name);

inline constexpr int kLowFidelityNodes = 3;

struct LossParams {
  int dense_nodes = 830;   // D
  double kappa_l = 38.0;   // node budget floor
  double kappa_u = 306.0;  // node budget ceiling
  double w_2d = 1.0;
  double w_1d = 10.0;

  void validate() const;
  /// D from the dense mesh, budgets from uniform n = 2 and n = 6.
  static LossParams for_config(const SpacecraftConfig& config);
};

/// n_j = round(2 + 8 sigmoid(raw_j)), clamped to [2, 10].
Nodalization decode_nodalization(const ad::Vector& raw);

/// Per-surface node count: n^2 on 2D faces, n on 1D faces, summed.
int nodes_of(const Nodalization& n, const SpacecraftConfig& config);

/// Per dense node weight w_d.
ad::Vector node_weights(const NodeLayout& dense, const LossParams& p);

/// Mean over samples of (1/D) sum_d w_d (pred - truth)^2.
double loss_mse(const std::vector<ad::Vector>& pred,
                const std::vector<ad::Vector>& truth, const ad::Vector& weights,
                const LossParams& p);
/// 10^(4 kappa) with kappa = (tau - kappa_l)/(kappa_u - kappa_l) - 1.
double cost_term(double total_nodes, const LossParams& p);
/// Mean of cost_term over samples.
double loss_cost(const std::vector<Nodalization>& nodalizations,
                 const SpacecraftConfig& config, const LossParams& p);
/// L_m + L_c.
double total_loss(const std::vector<ad::Vector>& pred,
                  const std::vector<ad::Vector>& truth,
                  const std::vector<Nodalization>& nodalizations,
                  const SpacecraftConfig& config, const ad::Vector& weights,
                  const LossParams& p);

struct Model {
  ModelKind kind = ModelKind::HF;
  MlpParams net;              // empty for the fixed-mesh baselines
  double load_scale = 1.0;    // loads are divided by this before the net
  double temperature_scale = 400.0;  // data-driven output scale, K
  int fixed_nodes = kDenseNodes;     // LF / HF only

  bool has_net() const { return kind == ModelKind::PimlA ||
                                kind == ModelKind::PimlAS ||
                                kind == ModelKind::Ann; }
  bool is_hybrid() const {
    return kind == ModelKind::PimlA || kind == ModelKind::PimlAS;
  }
};

struct ModelShape {
  int hidden_layers = 5;
  int hidden_width = 1200;  // transfer net; the data-driven net uses 1500
};

/// Default shapes: transfer net D -> 5 x 1200 -> S (or 2S), data-driven
/// net D -> 5 x 1500 -> D.
ModelShape default_shape(ModelKind kind);

/// Fresh model. The shift rows of the transfer net's last layer start at
/// zero so both hybrid variants initially agree.
Model make_model(ModelKind kind, const PhysicsModel& physics,
                 std::uint64_t seed, double load_scale,
                 const ModelShape& shape);
Model make_model(ModelKind kind, const PhysicsModel& physics,
                 std::uint64_t seed, double load_scale);

struct TransferOutput {
  ad::Vector raw;     // per-surface raw nodalization
  ad::Vector shifts;  // K, zero for the unshifted variant
};

TransferOutput transfer(const Model& model, const ad::Vector& dense_loads,
                        std::size_t surfaces);

struct Prediction {
  ad::Vector temperatures;  // dense, K
  Nodalization nodalization;
  int total_nodes = 0;
  ad::Vector shifts;
};

/// Forward pass on one sample. `force` overrides the decoded nodalization
/// of the hybrid models (shifts still apply).
Prediction predict(const Model& model, const PhysicsModel& physics,
                   const ThermalSample& sample,
                   const Nodalization* force = nullptr);

// ---------------------------------------------------------------------------
// Differentiable path

/// How the loss reaches the rounded node counts in the backward pass.
enum class NodeGradient : std::uint8_t {
  /// Slope of the piecewise-linear interpolant of the dense prediction
  /// between neighbouring integer counts, (T(n+1) - T(n-1)) / 2 (one-sided
  /// at 2 and 10), chained through the loss on the tape.
  Difference = 0,
  /// Derivative of the recorded rollout with respect to the counts through
  /// the node areas, capacities and conductances at fixed mesh topology.
  Coefficient = 1,
};

struct TapeOptions {
  NodeGradient node_gradient = NodeGradient::Difference;
  /// Surfaces probed per sample in Difference mode, rotated by `rotation`
  /// and rescaled so the estimate is unbiased over a full rotation.
  int difference_surfaces = 2;
  std::uint64_t rotation = 0;
  /// Coefficient mode only: coefficients follow the real-valued decoded
  /// count instead of the rounded one (meshes still use the rounded count),
  /// giving a loss that is smooth in the weights.
  bool relaxed = false;
  int checkpoint_every = 25;
};

struct SampleLoss {
  double L = 0.0, L_m = 0.0, L_c = 0.0;
  int total_nodes = 0;
  Nodalization nodalization;
};

/// Records the per-sample loss L_m + L_c (hybrid) or L_m (data-driven) on
/// `tape`, with the network attached as `net_vars`.
ad::Var record_sample_loss(ad::Tape& tape, std::span<const ad::Var> net_vars,
                           const Model& model, const PhysicsModel& physics,
                           const ThermalSample& sample, const LossParams& loss,
                           const ad::Vector& weights, const TapeOptions& opts,
                           SampleLoss* out = nullptr);

/// Per-sample loss value and weight gradients (scaled by `scale`).
SampleLoss sample_gradient(const Model& model, const PhysicsModel& physics,
                           const ThermalSample& sample, const LossParams& loss,
                           const ad::Vector& weights, const TapeOptions& opts,
                           double scale, std::vector<ad::Vector>& grads);

/// Same loss value evaluated without a tape.
SampleLoss sample_loss(const Model& model, const PhysicsModel& physics,
                       const ThermalSample& sample, const LossParams& loss,
                       const ad::Vector& weights, const TapeOptions& opts);

// ---------------------------------------------------------------------------
// Training

struct EpochLog {
  int epoch = 0;
  std::string split;  // "train" or "validation"
  double L = 0.0, L_m = 0.0, L_c = 0.0;
  double median_nodes = 0.0;
  double wall_s = 0.0;
};

struct TrainOptions {
  int epochs = 200;
  int batch = 8;
  double lr = 1e-4;
  std::uint64_t seed = 1;
  int threads = 1;
  TapeOptions tape;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
};

/// Minibatch Adam on the hybrid loss (hybrid kinds) or the weighted MSE
/// (data-driven kind). Fixed-mesh kinds only get evaluated.
TrainResult train(ModelKind kind, const PhysicsModel& physics,
                  const std::vector<ThermalSample>& train_set,
                  const std::vector<ThermalSample>& validation_set,
                  const TrainOptions& options,
                  const ModelShape* shape = nullptr);

/// Loss summary of `model` on `samples` (one log row, epoch as given).
EpochLog evaluate_split(const Model& model, const PhysicsModel& physics,
                        const std::vector<ThermalSample>& samples,
                        const std::string& split, int epoch);

void write_training_log(const std::filesystem::path& path,
                        const std::vector<EpochLog>& log,
                        const std::string& metadata);

inline constexpr std::uint32_t kModelVersion = 1;

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace adaptherm
