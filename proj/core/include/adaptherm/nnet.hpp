#pragma once

// Fully connected networks with tape-recordable forward passes and an Adam
// optimizer.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "adaptherm/autodiff.hpp"

namespace adaptherm {

enum class Activation : std::uint8_t { Relu = 0, Tanh = 1 };
enum class OutputActivation : std::uint8_t { Identity = 0, Sigmoid = 1 };

struct MlpSpec {
  int input_dim = 1;
  int hidden_layers = 0;
  int hidden_width = 1;
  int output_dim = 1;
  Activation activation = Activation::Relu;
  OutputActivation output_activation = OutputActivation::Identity;

  void validate() const;
  int layers() const { return hidden_layers + 1; }
  int fan_in(int layer) const { return layer == 0 ? input_dim : hidden_width; }
  int fan_out(int layer) const {
    return layer == hidden_layers ? output_dim : hidden_width;
  }
  std::size_t parameter_count() const;
  bool operator==(const MlpSpec&) const = default;
};

/// Weights are stored column-major as flat vectors so they can be viewed
/// directly as tape leaves.
struct MlpParams {
  MlpSpec spec;
  std::vector<ad::Vector> weights;  // fan_out x fan_in
  std::vector<ad::Vector> biases;

  Eigen::Map<const ad::Matrix> weight(int layer) const {
    return {weights[layer].data(), spec.fan_out(layer), spec.fan_in(layer)};
  }
  Eigen::Map<ad::Matrix> weight(int layer) {
    return {weights[layer].data(), spec.fan_out(layer), spec.fan_in(layer)};
  }
  /// W0, b0, W1, b1, ... in that order.
  std::vector<ad::Vector*> tensors();
  std::vector<const ad::Vector*> tensors() const;
};

/// He-normal weights (std sqrt(2 / fan_in)), zero biases.
MlpParams init_mlp(const MlpSpec& spec, std::uint64_t seed);

ad::Vector forward(const MlpParams& params, const ad::Vector& input);

/// Parameter leaves on `tape` that view `params` without copying.
std::vector<ad::Var> attach(ad::Tape& tape, const MlpParams& params);

/// Tape-recorded forward; `vars` from attach().
ad::Var forward(const MlpParams& params, std::span<const ad::Var> vars,
                const ad::Var& input);

/// Adjoints of the attached parameters after tape.backward().
std::vector<ad::Vector> parameter_gradients(const ad::Tape& tape,
                                            std::span<const ad::Var> vars);

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  long step = 0;
  std::vector<ad::Vector> m, v;

  AdamState() = default;
  AdamState(const MlpParams& params, AdamOptions opts);
};

/// One Adam update. Throws NumericError if any gradient is non-finite.
void adam_update(MlpParams& params, AdamState& state,
                 const std::vector<ad::Vector>& grads);

/// Records loss_fn on a fresh tape, back-propagates, and applies one Adam
/// update. Returns the loss value before the update.
using MlpLossFn =
    std::function<ad::Var(ad::Tape&, std::span<const ad::Var> params)>;
double train_step(MlpParams& params, AdamState& state, const MlpLossFn& loss_fn);

void add_gradients(std::vector<ad::Vector>& acc,
                   const std::vector<ad::Vector>& g);

inline constexpr std::uint32_t kMlpVersion = 1;

/// Binary block: header, spec, then per layer (rows, cols, row-major W, b).
void write_mlp(std::ostream& out, const MlpParams& params);
MlpParams read_mlp(std::istream& in);

}  // namespace adaptherm
