#include "adaptherm/nnet.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include "adaptherm/binary_io.hpp"
#include "adaptherm/error.hpp"

namespace adaptherm {

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1 || hidden_layers < 0 ||
      (hidden_layers > 0 && hidden_width < 1))
    throw ConfigError("mlp: dimensions must be >= 1 (input " +
                      std::to_string(input_dim) + ", hidden " +
                      std::to_string(hidden_layers) + "x" +
                      std::to_string(hidden_width) + ", output " +
                      std::to_string(output_dim) + ")");
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t total = 0;
  for (int l = 0; l < layers(); ++l)
    total += static_cast<std::size_t>(fan_out(l)) * (fan_in(l) + 1);
  return total;
}

std::vector<ad::Vector*> MlpParams::tensors() {
  std::vector<ad::Vector*> t;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    t.push_back(&weights[l]);
    t.push_back(&biases[l]);
  }
  return t;
}

std::vector<const ad::Vector*> MlpParams::tensors() const {
  std::vector<const ad::Vector*> t;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    t.push_back(&weights[l]);
    t.push_back(&biases[l]);
  }
  return t;
}

MlpParams init_mlp(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  MlpParams p;
  p.spec = spec;
  std::mt19937_64 rng(seed);
  for (int l = 0; l < spec.layers(); ++l) {
    const int in = spec.fan_in(l), out = spec.fan_out(l);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / in));
    ad::Vector w(static_cast<Eigen::Index>(in) * out);
    for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = dist(rng);
    p.weights.push_back(std::move(w));
    p.biases.push_back(ad::Vector::Zero(out));
  }
  return p;
}

namespace {

void check_input(const MlpSpec& spec, Eigen::Index size) {
  if (size != spec.input_dim)
    throw ShapeError("mlp: input has " + std::to_string(size) +
                     " entries, expected " + std::to_string(spec.input_dim));
}

}  // namespace

ad::Vector forward(const MlpParams& params, const ad::Vector& input) {
  const MlpSpec& spec = params.spec;
  check_input(spec, input.size());
  ad::Vector h = input;
  for (int l = 0; l < spec.layers(); ++l) {
    ad::Vector y = params.biases[l];
    y.noalias() += params.weight(l) * h;
    if (l < spec.hidden_layers) {
      if (spec.activation == Activation::Relu)
        y = y.cwiseMax(0.0);
      else
        y = y.array().tanh().matrix();
    } else if (spec.output_activation == OutputActivation::Sigmoid) {
      y = (1.0 / (1.0 + (-y.array()).exp())).matrix();
    }
    h = std::move(y);
  }
  return h;
}

std::vector<ad::Var> attach(ad::Tape& tape, const MlpParams& params) {
  std::vector<ad::Var> vars;
  for (const ad::Vector* t : params.tensors()) vars.push_back(tape.external(*t));
  return vars;
}

ad::Var forward(const MlpParams& params, std::span<const ad::Var> vars,
                const ad::Var& input) {
  const MlpSpec& spec = params.spec;
  check_input(spec, input.size());
  if (vars.size() != 2 * static_cast<std::size_t>(spec.layers()))
    throw ShapeError("mlp: wrong number of parameter vars");
  ad::Var h = input;
  for (int l = 0; l < spec.layers(); ++l) {
    h = ad::affine(vars[2 * l], vars[2 * l + 1], h, spec.fan_out(l),
                   spec.fan_in(l));
    if (l < spec.hidden_layers) {
      h = spec.activation == Activation::Relu ? ad::relu(h) : ad::tanh(h);
    } else if (spec.output_activation == OutputActivation::Sigmoid) {
      h = ad::sigmoid(h);
    }
  }
  return h;
}

std::vector<ad::Vector> parameter_gradients(const ad::Tape& tape,
                                            std::span<const ad::Var> vars) {
  std::vector<ad::Vector> g;
  g.reserve(vars.size());
  for (const ad::Var& v : vars) g.push_back(tape.adjoint(v));
  return g;
}

AdamState::AdamState(const MlpParams& params, AdamOptions opts)
    : options(opts) {
  for (const ad::Vector* t : params.tensors()) {
    m.push_back(ad::Vector::Zero(t->size()));
    v.push_back(ad::Vector::Zero(t->size()));
  }
}

void adam_update(MlpParams& params, AdamState& state,
                 const std::vector<ad::Vector>& grads) {
  auto tensors = params.tensors();
  if (grads.size() != tensors.size() || state.m.size() != tensors.size())
    throw ShapeError("adam: gradient/state count does not match parameters");
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k].size() != tensors[k]->size())
      throw ShapeError("adam: gradient " + std::to_string(k) + " has wrong size");
    if (!grads[k].allFinite())
      throw NumericError("adam: non-finite gradient in tensor " +
                         std::to_string(k));
  }
  const AdamOptions& o = state.options;
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < grads.size(); ++k) {
    ad::Vector& m = state.m[k];
    ad::Vector& v = state.v[k];
    m = o.beta1 * m + (1.0 - o.beta1) * grads[k];
    v = o.beta2 * v + (1.0 - o.beta2) * grads[k].cwiseAbs2();
    ad::Vector& p = *tensors[k];
    p.array() -= o.lr * (m.array() / c1) /
                 ((v.array() / c2).sqrt() + o.epsilon);
  }
}

double train_step(MlpParams& params, AdamState& state,
                  const MlpLossFn& loss_fn) {
  ad::Tape tape;
  const auto vars = attach(tape, params);
  const ad::Var loss = loss_fn(tape, vars);
  const double value = loss.scalar();
  if (!std::isfinite(value))
    throw NumericError("train_step: non-finite loss " + std::to_string(value));
  tape.backward(loss);
  adam_update(params, state, parameter_gradients(tape, vars));
  return value;
}

void add_gradients(std::vector<ad::Vector>& acc,
                   const std::vector<ad::Vector>& g) {
  if (acc.empty()) {
    acc = g;
    return;
  }
  if (acc.size() != g.size()) throw ShapeError("gradient count mismatch");
  for (std::size_t k = 0; k < g.size(); ++k) acc[k] += g[k];
}

void write_mlp(std::ostream& out, const MlpParams& params) {
  const MlpSpec& s = params.spec;
  io::write_header(out, "ATNN", kMlpVersion);
  io::write<std::int32_t>(out, s.input_dim);
  io::write<std::int32_t>(out, s.hidden_layers);
  io::write<std::int32_t>(out, s.hidden_width);
  io::write<std::int32_t>(out, s.output_dim);
  io::write<std::uint8_t>(out, static_cast<std::uint8_t>(s.activation));
  io::write<std::uint8_t>(out, static_cast<std::uint8_t>(s.output_activation));
  for (int l = 0; l < s.layers(); ++l) {
    const auto rows = static_cast<std::uint64_t>(s.fan_out(l));
    const auto cols = static_cast<std::uint64_t>(s.fan_in(l));
    io::write(out, rows);
    io::write(out, cols);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
        w = params.weight(l);
    io::write_doubles(out, w.data(), static_cast<std::size_t>(w.size()));
    io::write_vector(out, params.biases[l]);
  }
}

MlpParams read_mlp(std::istream& in) {
  io::read_header(in, "ATNN", kMlpVersion, "network checkpoint");
  MlpSpec s;
  s.input_dim = io::read<std::int32_t>(in, "input_dim");
  s.hidden_layers = io::read<std::int32_t>(in, "hidden_layers");
  s.hidden_width = io::read<std::int32_t>(in, "hidden_width");
  s.output_dim = io::read<std::int32_t>(in, "output_dim");
  const auto act = io::read<std::uint8_t>(in, "activation");
  const auto out_act = io::read<std::uint8_t>(in, "output activation");
  if (act > 1 || out_act > 1) throw FormatError("network checkpoint: bad activation");
  s.activation = static_cast<Activation>(act);
  s.output_activation = static_cast<OutputActivation>(out_act);
  if (s.input_dim < 1 || s.output_dim < 1 || s.hidden_layers < 0 ||
      s.hidden_layers > 1000 || s.hidden_width < 0)
    throw FormatError("network checkpoint: bad spec");
  s.validate();
  MlpParams p;
  p.spec = s;
  for (int l = 0; l < s.layers(); ++l) {
    const auto rows = io::read<std::uint64_t>(in, "layer rows");
    const auto cols = io::read<std::uint64_t>(in, "layer cols");
    if (rows != static_cast<std::uint64_t>(s.fan_out(l)) ||
        cols != static_cast<std::uint64_t>(s.fan_in(l)))
      throw FormatError("network checkpoint: layer " + std::to_string(l) +
                        " shape does not match spec");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(
        rows, cols);
    io::read_doubles(in, w.data(), static_cast<std::size_t>(w.size()), "weights");
    ad::Vector flat(w.size());
    Eigen::Map<ad::Matrix>(flat.data(), w.rows(), w.cols()) = w;
    p.weights.push_back(std::move(flat));
    p.biases.push_back(io::read_vector(in, rows, "biases"));
  }
  return p;
}

}  // namespace adaptherm
