#include "adaptherm/piml.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

#include "adaptherm/binary_io.hpp"
#include "adaptherm/error.hpp"

namespace adaptherm {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::PimlA: return "piml-a";
    case ModelKind::PimlAS: return "piml-as";
    case ModelKind::Ann: return "ann";
    case ModelKind::LF: return "lf";
    case ModelKind::HF: return "hf";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::PimlA, ModelKind::PimlAS, ModelKind::Ann,
                 ModelKind::LF, ModelKind::HF})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown model '" + std::string(name) +
                    "' (expected piml-a, piml-as, ann, lf, hf)");
}

void LossParams::validate() const {
  if (dense_nodes < 1) throw ConfigError("loss: D must be >= 1");
  if (!(kappa_l < kappa_u)) throw ConfigError("loss: kappa_l must be < kappa_u");
  if (w_2d < 0 || w_1d < 0) throw ConfigError("loss: weights must be >= 0");
}

LossParams LossParams::for_config(const SpacecraftConfig& config) {
  LossParams p;
  p.dense_nodes =
      total_node_count(Nodalization::uniform(config.size(), kDenseNodes), config);
  p.kappa_l = total_node_count(Nodalization::uniform(config.size(), 2), config);
  p.kappa_u = total_node_count(Nodalization::uniform(config.size(), 6), config);
  return p;
}

namespace {

double decode_real(double raw) { return 2.0 + 8.0 / (1.0 + std::exp(-raw)); }

}  // namespace

Nodalization decode_nodalization(const ad::Vector& raw) {
  Nodalization n;
  for (Eigen::Index j = 0; j < raw.size(); ++j) {
    if (!std::isfinite(raw[j]))
      throw NumericError("decode: non-finite raw nodalization");
    const double v = std::round(decode_real(raw[j]));
    n.n.push_back(std::clamp(static_cast<int>(v), kMinNodes, kMaxNodes));
  }
  return n;
}

int nodes_of(const Nodalization& n, const SpacecraftConfig& config) {
  return total_node_count(n, config);
}

ad::Vector node_weights(const NodeLayout& dense, const LossParams& p) {
  ad::Vector w(static_cast<Eigen::Index>(dense.size()));
  for (std::size_t i = 0; i < dense.size(); ++i)
    w[static_cast<Eigen::Index>(i)] = dense.is_1d(i) ? p.w_1d : p.w_2d;
  return w;
}

double loss_mse(const std::vector<ad::Vector>& pred,
                const std::vector<ad::Vector>& truth, const ad::Vector& weights,
                const LossParams& p) {
  if (pred.size() != truth.size() || pred.empty())
    throw ShapeError("loss_mse: prediction and truth counts differ or are empty");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != truth[i].size() || pred[i].size() != weights.size())
      throw ShapeError("loss_mse: vector size mismatch");
    total += weights.dot((pred[i] - truth[i]).cwiseAbs2()) / p.dense_nodes;
  }
  return total / static_cast<double>(pred.size());
}

double cost_term(double total_nodes, const LossParams& p) {
  const double kappa = (total_nodes - p.kappa_l) / (p.kappa_u - p.kappa_l) - 1.0;
  return std::pow(10.0, 4.0 * kappa);
}

double loss_cost(const std::vector<Nodalization>& nodalizations,
                 const SpacecraftConfig& config, const LossParams& p) {
  if (nodalizations.empty()) throw ShapeError("loss_cost: no samples");
  double total = 0.0;
  for (const auto& n : nodalizations) total += cost_term(nodes_of(n, config), p);
  return total / static_cast<double>(nodalizations.size());
}

double total_loss(const std::vector<ad::Vector>& pred,
                  const std::vector<ad::Vector>& truth,
                  const std::vector<Nodalization>& nodalizations,
                  const SpacecraftConfig& config, const ad::Vector& weights,
                  const LossParams& p) {
  return loss_mse(pred, truth, weights, p) + loss_cost(nodalizations, config, p);
}

ModelShape default_shape(ModelKind kind) {
  ModelShape s;
  if (kind == ModelKind::Ann) s.hidden_width = 1500;
  return s;
}

Model make_model(ModelKind kind, const PhysicsModel& physics,
                 std::uint64_t seed, double load_scale) {
  return make_model(kind, physics, seed, load_scale, default_shape(kind));
}

Model make_model(ModelKind kind, const PhysicsModel& physics,
                 std::uint64_t seed, double load_scale,
                 const ModelShape& shape) {
  Model m;
  m.kind = kind;
  m.load_scale = load_scale > 0.0 ? load_scale : 1.0;
  const int d = static_cast<int>(physics.dense_size());
  const int s = static_cast<int>(physics.surfaces());
  switch (kind) {
    case ModelKind::LF: m.fixed_nodes = kLowFidelityNodes; return m;
    case ModelKind::HF: m.fixed_nodes = kDenseNodes; return m;
    default: break;
  }
  MlpSpec spec;
  spec.input_dim = d;
  spec.hidden_layers = shape.hidden_layers;
  spec.hidden_width = shape.hidden_width;
  spec.output_dim = kind == ModelKind::Ann ? d
                    : kind == ModelKind::PimlAS ? 2 * s
                                                : s;
  m.net = init_mlp(spec, seed);
  if (kind == ModelKind::PimlAS) {
    const int last = spec.hidden_layers;
    m.net.weight(last).bottomRows(s).setZero();
    m.net.biases[last].tail(s).setZero();
  }
  return m;
}

TransferOutput transfer(const Model& model, const ad::Vector& dense_loads,
                        std::size_t surfaces) {
  if (!model.is_hybrid()) throw ConfigError("transfer: model has no transfer net");
  const ad::Vector out = forward(model.net, dense_loads / model.load_scale);
  const auto s = static_cast<Eigen::Index>(surfaces);
  TransferOutput t;
  t.raw = out.head(s);
  t.shifts = model.kind == ModelKind::PimlAS ? ad::Vector(out.segment(s, s))
                                             : ad::Vector::Zero(s);
  return t;
}

namespace {

ad::Vector shift_dense(const PhysicsModel& physics, const ad::Vector& shifts) {
  const auto& idx = physics.dense_layout().surface_index();
  return ad::gather(shifts, idx);
}

}  // namespace

Prediction predict(const Model& model, const PhysicsModel& physics,
                   const ThermalSample& sample, const Nodalization* force) {
  Prediction p;
  const std::size_t s = physics.surfaces();
  if (model.kind == ModelKind::Ann) {
    p.temperatures =
        forward(model.net, sample.loads / model.load_scale) * model.temperature_scale;
    p.shifts = ad::Vector::Zero(static_cast<Eigen::Index>(s));
    return p;
  }
  if (model.is_hybrid()) {
    const TransferOutput t = transfer(model, sample.loads, s);
    p.nodalization = force ? *force : decode_nodalization(t.raw);
    p.shifts = t.shifts;
  } else {
    p.nodalization = force ? *force : Nodalization::uniform(s, model.fixed_nodes);
    p.shifts = ad::Vector::Zero(static_cast<Eigen::Index>(s));
  }
  p.total_nodes = nodes_of(p.nodalization, physics.config());
  p.temperatures = physics.predict(p.nodalization, sample.loads, sample.initial);
  if (model.kind == ModelKind::PimlAS)
    p.temperatures += shift_dense(physics, p.shifts);
  return p;
}

// ---------------------------------------------------------------------------
// Differentiable path

namespace {

ad::Var weighted_mse(const ad::Var& pred, const ad::Vector& truth,
                     const ad::Vector& weights, const LossParams& loss) {
  const ad::Var diff = ad::add_const(pred, -truth);
  return ad::sum(ad::mul_const(ad::square(diff), weights / loss.dense_nodes));
}

struct Masks {
  ad::Vector two_d, one_d;
};

Masks surface_masks(const SpacecraftConfig& config) {
  Masks m{ad::Vector::Zero(static_cast<Eigen::Index>(config.size())),
          ad::Vector::Zero(static_cast<Eigen::Index>(config.size()))};
  for (std::size_t j = 0; j < config.size(); ++j)
    (config.surface(j).is_2d() ? m.two_d : m.one_d)[static_cast<Eigen::Index>(j)] = 1.0;
  return m;
}

ad::Var rollout_prediction(ad::Tape& tape, const PhysicsModel& physics,
                           const CoarseModel& cm, const ThermalSample& sample,
                           const ad::Var& n_coef, const TapeOptions& opts);
ad::Var difference_prediction(ad::Tape& tape, const PhysicsModel& physics,
                              const ThermalSample& sample, const Nodalization& nod,
                              const ad::Var& n_ste, const TapeOptions& opts);

}  // namespace

ad::Var record_sample_loss(ad::Tape& tape, std::span<const ad::Var> net_vars,
                           const Model& model, const PhysicsModel& physics,
                           const ThermalSample& sample, const LossParams& loss,
                           const ad::Vector& weights, const TapeOptions& opts,
                           SampleLoss* out) {
  const ad::Var x = tape.constant(sample.loads / model.load_scale);
  const ad::Var y = forward(model.net, net_vars, x);

  if (model.kind == ModelKind::Ann) {
    const ad::Var pred = y * model.temperature_scale;
    const ad::Var lm = weighted_mse(pred, sample.target, weights, loss);
    if (out) {
      out->L_m = out->L = lm.scalar();
      out->L_c = 0.0;
      out->total_nodes = 0;
    }
    return lm;
  }
  if (!model.is_hybrid())
    throw ConfigError("record_sample_loss: fixed-mesh models have no weights");

  const SpacecraftConfig& config = physics.config();
  const auto s = static_cast<Eigen::Index>(config.size());
  const ad::Var raw = ad::slice(y, 0, s);
  const ad::Var n_real = ad::add_const(ad::sigmoid(raw) * 8.0, ad::Vector::Constant(s, 2.0));
  const ad::Var n_ste = ad::round_straight_through(n_real);
  Nodalization nod;
  for (Eigen::Index j = 0; j < s; ++j)
    nod.n.push_back(std::clamp(static_cast<int>(n_ste.value()[j]), kMinNodes, kMaxNodes));
  const ad::Var& n_coef = opts.relaxed ? n_real : n_ste;
  const auto cm = physics.coarse(nod);

  ad::Var pred;
  if (opts.node_gradient == NodeGradient::Difference && !opts.relaxed) {
    pred = difference_prediction(tape, physics, sample, nod, n_ste, opts);
  } else {
    pred = rollout_prediction(tape, physics, *cm, sample, n_coef, opts);
  }
  if (model.kind == ModelKind::PimlAS) {
    const ad::Var shifts = ad::slice(y, s, s);
    pred = pred + ad::gather(shifts, physics.dense_layout().surface_index());
  }
  const ad::Var lm = weighted_mse(pred, sample.target, weights, loss);

  const Masks masks = surface_masks(config);
  const ad::Var tau = ad::sum(ad::mul_const(ad::square(n_coef), masks.two_d) +
                              ad::mul_const(n_coef, masks.one_d));
  const double span = loss.kappa_u - loss.kappa_l;
  const ad::Var kappa =
      ad::add_const(tau * (1.0 / span), ad::Vector::Constant(1, -loss.kappa_l / span - 1.0));
  const ad::Var lc = ad::exp(kappa * (4.0 * std::numbers::ln10));
  const ad::Var total = lm + lc;
  if (out) {
    out->L_m = lm.scalar();
    out->L_c = lc.scalar();
    out->L = total.scalar();
    out->nodalization = nod;
    out->total_nodes = cm->total_nodes;
  }
  return total;
}

namespace {

ad::Var rollout_prediction(ad::Tape& tape, const PhysicsModel& physics,
                           const CoarseModel& cm, const ThermalSample& sample,
                           const ad::Var& n_coef, const TapeOptions& opts) {
  (void)physics;
  const ThermalSystem& sys = cm.system;
  const GlobalResampler& rs = cm.resampler;

  // Loads enter as flux so their power follows the coefficient areas.
  const ad::Vector q = rs.identity ? sample.loads : ad::Vector(*rs.load_down * sample.loads);
  const ad::Vector t0 =
      rs.identity ? sample.initial : ad::Vector(*rs.temp_down * sample.initial);
  const ad::Vector flux = q.cwiseQuotient(cm.areas);

  const auto coef = node_coefficients(sys, n_coef);
  const ad::Var loads = loads_from_flux(coef, flux);
  const std::vector<ad::Var> params{coef.dt_over_c, coef.g_u, coef.rad_area, loads};
  const ad::StepFn step = [&sys](ad::Tape&, const ad::Var& t,
                                 std::span<const ad::Var> p) {
    NodeCoefficients<ad::Var> c;
    c.dt_over_c = p[0];
    c.g_u = p[1];
    c.rad_area = p[2];
    return step_temperatures(sys, c, p[3], t);
  };
  const ad::Var t_init = tape.constant(t0);
  const ad::Var t_end = ad::checkpointed_rollout(
      tape, step, t_init, params, static_cast<int>(sys.settings.steps()),
      opts.checkpoint_every);
  check_state(t_end.value(), sys.settings.steps());

  return rs.identity ? t_end : ad::matvec(rs.temp_up, t_end);
}

ad::Var difference_prediction(ad::Tape& tape, const PhysicsModel& physics,
                              const ThermalSample& sample, const Nodalization& nod,
                              const ad::Var& n_ste, const TapeOptions& opts) {
  const std::size_t s = nod.size();
  const ad::Vector base = physics.predict(nod, sample.loads, sample.initial);
  const int m = std::clamp(opts.difference_surfaces, 0, static_cast<int>(s));
  if (m == 0) return tape.constant(base);

  auto slope = std::make_shared<ad::Matrix>(ad::Matrix::Zero(base.size(), s));
  const double rescale = static_cast<double>(s) / m;
  for (int k = 0; k < m; ++k) {
    const std::size_t j = (opts.rotation * m + k) % s;
    Nodalization up = nod, down = nod;
    up.n[j] = std::min(nod.n[j] + 1, kMaxNodes);
    down.n[j] = std::max(nod.n[j] - 1, kMinNodes);
    const ad::Vector hi = up.n[j] == nod.n[j]
                              ? base
                              : physics.predict(up, sample.loads, sample.initial);
    const ad::Vector lo = down.n[j] == nod.n[j]
                              ? base
                              : physics.predict(down, sample.loads, sample.initial);
    slope->col(static_cast<Eigen::Index>(j)) =
        (hi - lo) * (rescale / (up.n[j] - down.n[j]));
  }
  ad::Vector n_int(static_cast<Eigen::Index>(s));
  for (std::size_t j = 0; j < s; ++j) n_int[static_cast<Eigen::Index>(j)] = nod.n[j];
  // Zero-valued offset whose derivative is the interpolant's slope.
  const ad::Var offset = ad::add_const(n_ste, -n_int);
  return ad::add_const(ad::matvec(std::shared_ptr<const ad::Matrix>(slope), offset),
                       base);
}

}  // namespace

SampleLoss sample_gradient(const Model& model, const PhysicsModel& physics,
                           const ThermalSample& sample, const LossParams& loss,
                           const ad::Vector& weights, const TapeOptions& opts,
                           double scale, std::vector<ad::Vector>& grads) {
  ad::Tape tape;
  const auto vars = attach(tape, model.net);
  SampleLoss out;
  const ad::Var l =
      record_sample_loss(tape, vars, model, physics, sample, loss, weights, opts, &out);
  if (!std::isfinite(out.L))
    throw NumericError("non-finite loss " + std::to_string(out.L) +
                       " on sample orbit " + std::to_string(sample.orbit) +
                       " t=" + std::to_string(sample.time_s));
  tape.backward(l, scale);
  if (grads.empty()) {
    for (const ad::Var& v : vars) grads.push_back(tape.take_adjoint(v));
  } else {
    if (grads.size() != vars.size()) throw ShapeError("gradient count mismatch");
    for (std::size_t k = 0; k < vars.size(); ++k) grads[k] += tape.take_adjoint(vars[k]);
  }
  return out;
}

SampleLoss sample_loss(const Model& model, const PhysicsModel& physics,
                       const ThermalSample& sample, const LossParams& loss,
                       const ad::Vector& weights, const TapeOptions& opts) {
  ad::Tape tape;
  const auto vars = attach(tape, model.net);
  SampleLoss out;
  record_sample_loss(tape, vars, model, physics, sample, loss, weights, opts, &out);
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

using Clock = std::chrono::steady_clock;

}  // namespace

EpochLog evaluate_split(const Model& model, const PhysicsModel& physics,
                        const std::vector<ThermalSample>& samples,
                        const std::string& split_name, int epoch) {
  const auto start = Clock::now();
  const LossParams loss = LossParams::for_config(physics.config());
  const ad::Vector w = node_weights(physics.dense_layout(), loss);
  EpochLog row;
  row.epoch = epoch;
  row.split = split_name;
  if (samples.empty()) return row;
  std::vector<double> nodes;
  for (const auto& s : samples) {
    const Prediction p = predict(model, physics, s);
    const double lm = w.dot((p.temperatures - s.target).cwiseAbs2()) / loss.dense_nodes;
    const double lc = model.is_hybrid() ? cost_term(p.total_nodes, loss) : 0.0;
    row.L_m += lm;
    row.L_c += lc;
    nodes.push_back(p.total_nodes);
  }
  const double n = static_cast<double>(samples.size());
  row.L_m /= n;
  row.L_c /= n;
  row.L = row.L_m + row.L_c;
  row.median_nodes = median(nodes);
  row.wall_s = std::chrono::duration<double>(Clock::now() - start).count();
  return row;
}

TrainResult train(ModelKind kind, const PhysicsModel& physics,
                  const std::vector<ThermalSample>& train_set,
                  const std::vector<ThermalSample>& validation_set,
                  const TrainOptions& options, const ModelShape* shape) {
  if (train_set.empty()) throw Error("train: empty training split");
  if (options.batch < 1 || options.epochs < 0)
    throw ConfigError("train: batch must be >= 1 and epochs >= 0");
  TrainResult result;
  const double scale = max_abs_load(train_set);
  result.model = shape ? make_model(kind, physics, options.seed, scale, *shape)
                       : make_model(kind, physics, options.seed, scale);
  Model& model = result.model;
  auto emit = [&](const EpochLog& row) {
    result.log.push_back(row);
    if (options.on_epoch) options.on_epoch(row);
  };
  if (!model.has_net()) {
    emit(evaluate_split(model, physics, train_set, "train", 0));
    if (!validation_set.empty())
      emit(evaluate_split(model, physics, validation_set, "validation", 0));
    return result;
  }

  const LossParams loss = LossParams::for_config(physics.config());
  const ad::Vector weights = node_weights(physics.dense_layout(), loss);
  AdamState adam(model.net, AdamOptions{.lr = options.lr});
  std::mt19937_64 rng(options.seed ^ 0x5eedf00dULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const int threads = std::max(1, options.threads);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto start = Clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog row;
    row.epoch = epoch;
    row.split = "train";
    std::vector<double> nodes;
    for (std::size_t b = 0; b < order.size(); b += options.batch) {
      const std::size_t end = std::min(order.size(), b + options.batch);
      const double inv = 1.0 / static_cast<double>(end - b);
      std::vector<ad::Vector> grads;
      std::vector<SampleLoss> losses(end - b);
      // rotates the probed surfaces of the difference gradient
      auto tape_for = [&](std::size_t k) {
        TapeOptions t = options.tape;
        t.rotation += static_cast<std::uint64_t>(epoch - 1) * order.size() + k;
        return t;
      };
      if (threads == 1) {
        for (std::size_t k = b; k < end; ++k)
          losses[k - b] = sample_gradient(model, physics, train_set[order[k]], loss,
                                          weights, tape_for(k), inv, grads);
      } else {
        // per-sample gradients in parallel, summed in sample order
        std::vector<std::vector<ad::Vector>> per(end - b);
        std::vector<std::exception_ptr> errors(end - b);
        for (std::size_t k0 = b; k0 < end; k0 += threads) {
          const std::size_t k1 = std::min(end, k0 + threads);
          std::vector<std::thread> pool;
          for (std::size_t k = k0; k < k1; ++k)
            pool.emplace_back([&, k] {
              try {
                losses[k - b] = sample_gradient(model, physics, train_set[order[k]],
                                                loss, weights, tape_for(k), inv,
                                                per[k - b]);
              } catch (...) {
                errors[k - b] = std::current_exception();
              }
            });
          for (auto& t : pool) t.join();
          for (std::size_t k = k0; k < k1; ++k) {
            if (errors[k - b]) std::rethrow_exception(errors[k - b]);
            add_gradients(grads, per[k - b]);
            per[k - b].clear();
          }
        }
      }
      for (const auto& l : losses) {
        row.L += l.L;
        row.L_m += l.L_m;
        row.L_c += l.L_c;
        nodes.push_back(l.total_nodes);
      }
      adam_update(model.net, adam, grads);
    }
    const double n = static_cast<double>(train_set.size());
    row.L /= n;
    row.L_m /= n;
    row.L_c /= n;
    row.median_nodes = median(nodes);
    row.wall_s = std::chrono::duration<double>(Clock::now() - start).count();
    emit(row);
    if (!validation_set.empty())
      emit(evaluate_split(model, physics, validation_set, "validation", epoch));
  }
  return result;
}

void write_training_log(const std::filesystem::path& path,
                        const std::vector<EpochLog>& log,
                        const std::string& metadata) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write training log " + path.string());
  if (!metadata.empty()) out << "# " << metadata << '\n';
  out << "epoch,split,L,L_m,L_c,median_nodes,wall_s\n" << std::setprecision(10);
  for (const auto& r : log)
    out << r.epoch << ',' << r.split << ',' << r.L << ',' << r.L_m << ','
        << r.L_c << ',' << r.median_nodes << ',' << r.wall_s << '\n';
}

void save_model(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model " + path.string());
  io::write_header(out, "ATPM", kModelVersion);
  io::write<std::uint8_t>(out, static_cast<std::uint8_t>(model.kind));
  io::write(out, model.load_scale);
  io::write(out, model.temperature_scale);
  io::write<std::int32_t>(out, model.fixed_nodes);
  io::write<std::uint8_t>(out, model.has_net() ? 1 : 0);
  if (model.has_net()) write_mlp(out, model.net);
  if (!out) throw Error("failed writing model " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model " + path.string());
  io::read_header(in, "ATPM", kModelVersion, "model checkpoint");
  Model m;
  const auto kind = io::read<std::uint8_t>(in, "model kind");
  if (kind > 4) throw FormatError("model checkpoint: unknown kind");
  m.kind = static_cast<ModelKind>(kind);
  m.load_scale = io::read<double>(in, "load scale");
  m.temperature_scale = io::read<double>(in, "temperature scale");
  m.fixed_nodes = io::read<std::int32_t>(in, "fixed nodes");
  const auto has_net = io::read<std::uint8_t>(in, "net flag");
  if ((has_net != 0) != m.has_net())
    throw FormatError("model checkpoint: network presence does not match kind");
  if (has_net) m.net = read_mlp(in);
  return m;
}

}  // namespace adaptherm
