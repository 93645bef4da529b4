#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "adaptherm/config.hpp"
#include "adaptherm/dataset.hpp"
#include "adaptherm/error.hpp"
#include "adaptherm/orbit.hpp"
#include "adaptherm/piml.hpp"
#include "adaptherm/radiation.hpp"

namespace adaptherm::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string viewfactors = "viewfactors.bin";
  int rays = 10000;
  std::uint64_t seed = 1;
  int threads = 1;
};

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

SpacecraftConfig load_config(const Common& c) {
  return c.config.empty() ? load_spacecraft_config(default_config_path())
                          : load_spacecraft_config(c.config);
}

std::string metadata(const SpacecraftConfig& config, std::uint64_t seed) {
  return std::string("tool=adaptherm version=") + version() + " config_hash=" +
         hex(config.geometry_hash()) + " seed=" + std::to_string(seed);
}

void write_run_json(const fs::path& path, const SpacecraftConfig& config,
                    std::uint64_t seed, json extra) {
  extra["tool"] = "adaptherm";
  extra["version"] = version();
  extra["config_hash"] = hex(config.geometry_hash());
  extra["seed"] = seed;
  std::ofstream(path) << extra.dump(2) << '\n';
}

/// Dense view factors from --viewfactors, computed and written when absent.
ViewFactorMatrix dense_viewfactors(const Common& c, const SpacecraftConfig& config) {
  if (fs::exists(c.viewfactors)) {
    ViewFactorMatrix vf = load_viewfactors(c.viewfactors);
    if (vf.geometry_hash != config.geometry_hash())
      throw ConfigError("view factors in " + c.viewfactors +
                        " were computed for a different configuration");
    return vf;
  }
  std::cout << "computing view factors (" << c.rays << " rays/node)\n";
  ViewFactorMatrix vf = compute_dense_viewfactors(config, c.rays, 1, c.threads);
  save_viewfactors(c.viewfactors, vf);
  return vf;
}

PhysicsModel make_physics(const Common& c, const SpacecraftConfig& config) {
  return PhysicsModel(config, dense_viewfactors(c, config));
}

void ensure_dir(const fs::path& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

// ---------------------------------------------------------------------------

int cmd_config(const Common& c, const std::string& out) {
  const std::string text = dump_spacecraft_config(
      c.config.empty() ? default_spacecraft() : load_spacecraft_config(c.config));
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream(out) << text;
  }
  return kExitOk;
}

int cmd_viewfactors(const Common& c, const std::string& out) {
  const SpacecraftConfig config = load_config(c);
  const auto start = std::chrono::steady_clock::now();
  const ViewFactorMatrix vf =
      compute_dense_viewfactors(config, c.rays, c.seed, c.threads);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const fs::path path = out.empty() ? fs::path(c.viewfactors) : fs::path(out);
  ensure_dir(path.parent_path());
  save_viewfactors(path, vf);
  const auto meshes =
      build_meshes(config, Nodalization::uniform(config.size(), kDenseNodes));
  const ReciprocityReport r =
      check_reciprocity(vf, NodeLayout(meshes).surface_index());
  std::cout << "nodes=" << vf.size() << " rays_per_node=" << c.rays
            << " seed=" << c.seed << " seconds=" << secs << '\n'
            << "reciprocity: pairs=" << r.pairs_checked
            << " node_violations=" << r.node_violations << " ("
            << 100.0 * r.violation_fraction() << "%)"
            << " max_normalized_error=" << r.max_normalized_error
            << " surface_violations=" << r.surface_violations << '/'
            << r.surface_pairs_checked << " (p=" << r.surface_p_value()
            << ", max_z=" << r.max_surface_z << ")"
            << " max_row_sum=" << r.max_row_sum
            << (r.passes() ? " PASS" : " FAIL") << '\n'
            << "wrote " << path.string() << '\n';
  return kExitOk;
}

int cmd_dataset_generate(const Common& c, const std::string& out, int orbits,
                         int points) {
  const SpacecraftConfig config = load_config(c);
  const PhysicsModel physics = make_physics(c, config);
  const OrbitLoadModel loads(config, c.seed);
  DatasetOptions opts;
  opts.threads = c.threads;
  const auto start = std::chrono::steady_clock::now();
  const Dataset data =
      generate_dataset(default_orbits(c.seed, orbits, points), physics, loads,
                       c.seed, opts);
  const fs::path path = out.empty() ? fs::path("dataset.bin") : fs::path(out);
  ensure_dir(path.parent_path());
  save_dataset(path, data);
  std::cout << "samples=" << data.samples.size() << " seconds="
            << std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             start).count()
            << "\nwrote " << path.string() << '\n';
  return kExitOk;
}

int cmd_dataset_inspect(const std::string& dataset) {
  std::cout << inspect(load_dataset(dataset));
  return kExitOk;
}

struct TrainArgs {
  std::string model;
  std::string dataset = "dataset.bin";
  std::string out = "models";
  int epochs = 200;
  int batch = 8;
  double lr = 1e-4;
};

int cmd_train(const Common& c, const TrainArgs& a) {
  const ModelKind kind = parse_model_kind(a.model);
  const SpacecraftConfig config = load_config(c);
  const Dataset data = load_dataset(a.dataset);
  if (data.geometry_hash != config.geometry_hash())
    throw ConfigError("dataset was generated for a different configuration");
  const PhysicsModel physics = make_physics(c, config);
  const auto [train_set, val_set] = split(data);

  TrainOptions opts;
  opts.epochs = a.epochs;
  opts.batch = a.batch;
  opts.lr = a.lr;
  opts.seed = c.seed;
  opts.threads = c.threads;
  opts.on_epoch = [](const EpochLog& r) {
    std::cout << "epoch " << r.epoch << ' ' << r.split << " L=" << r.L
              << " L_m=" << r.L_m << " L_c=" << r.L_c
              << " median_nodes=" << r.median_nodes << '\n';
  };
  const TrainResult res = train(kind, physics, train_set, val_set, opts);
  ensure_dir(a.out);
  const fs::path dir(a.out);
  const std::string name(to_string(kind));
  save_model(dir / (name + ".ckpt"), res.model);
  write_training_log(dir / (name + "_log.csv"), res.log, metadata(config, c.seed));
  json extra{{"model", name},
             {"dataset", a.dataset},
             {"epochs", a.epochs},
             {"batch", a.batch},
             {"lr", a.lr}};
  if (!res.model.has_net()) {
    extra["nodes_per_surface"] = res.model.fixed_nodes;
    extra["total_nodes"] = total_node_count(
        Nodalization::uniform(config.size(), res.model.fixed_nodes), config);
  }
  write_run_json(dir / (name + "_run.json"), config, c.seed, extra);
  std::cout << "wrote " << (dir / (name + ".ckpt")).string() << '\n';
  return kExitOk;
}

std::vector<ModelKind> available_models(const fs::path& dir,
                                        const std::vector<std::string>& names) {
  std::vector<ModelKind> kinds;
  if (!names.empty()) {
    for (const auto& n : names) kinds.push_back(parse_model_kind(n));
    return kinds;
  }
  for (auto k : {ModelKind::PimlA, ModelKind::PimlAS, ModelKind::Ann,
                 ModelKind::LF, ModelKind::HF})
    if (fs::exists(dir / (std::string(to_string(k)) + ".ckpt"))) kinds.push_back(k);
  return kinds;
}

Model model_for(const fs::path& dir, ModelKind kind, const PhysicsModel& physics) {
  const fs::path p = dir / (std::string(to_string(kind)) + ".ckpt");
  if (fs::exists(p)) return load_model(p);
  if (kind == ModelKind::LF || kind == ModelKind::HF)
    return make_model(kind, physics, 0, 1.0);
  throw ConfigError("missing checkpoint " + p.string());
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct EvalArgs {
  std::string dataset = "dataset.bin";
  std::string models = "models";
  std::string out = "report";
  std::string split = "validation";
  std::vector<std::string> names;
};

int cmd_eval(const Common& c, const EvalArgs& a) {
  const SpacecraftConfig config = load_config(c);
  const Dataset data = load_dataset(a.dataset);
  const PhysicsModel physics = make_physics(c, config);
  const auto [train_set, val_set] = split(data);
  const auto& samples = a.split == "train" ? train_set : val_set;
  if (samples.empty()) throw ConfigError("eval: split '" + a.split + "' is empty");
  const auto kinds = available_models(a.models, a.names);
  if (kinds.empty()) throw ConfigError("eval: no models found in " + a.models);

  ensure_dir(a.out);
  const fs::path dir(a.out);
  const std::string meta = "# " + metadata(config, c.seed) + '\n';
  std::ofstream mae(dir / "mae_per_face.csv"), hist(dir / "nodalization_hist.csv"),
      orbit(dir / "orbit_error.csv");
  mae << meta << "model,surface,mae_K\n" << std::setprecision(10);
  hist << meta << "model,surface,n,count\n";
  orbit << meta << "model,time_index,time_s,median_K,q025_K,q975_K\n"
        << std::setprecision(10);
  json summary;
  const NodeLayout& layout = physics.dense_layout();
  for (const ModelKind kind : kinds) {
    const Model model = model_for(a.models, kind, physics);
    const std::string name(to_string(kind));
    std::vector<double> face_err(config.size(), 0.0);
    std::map<std::pair<int, int>, int> counts;
    std::map<int, std::vector<double>> by_time;
    std::map<int, double> time_of;
    std::map<int, int> seen_per_orbit;
    double overall = 0.0;
    for (const auto& s : samples) {
      const Prediction p = predict(model, physics, s);
      const ad::Vector err = (p.temperatures - s.target).cwiseAbs();
      for (std::size_t j = 0; j < config.size(); ++j)
        face_err[j] += err.segment(static_cast<Eigen::Index>(layout.offset(j)),
                                   static_cast<Eigen::Index>(layout.count(j)))
                           .mean();
      overall += err.mean();
      if (model.kind != ModelKind::Ann)
        for (std::size_t j = 0; j < config.size(); ++j)
          ++counts[{static_cast<int>(j), p.nodalization[j]}];
      const int k = seen_per_orbit[s.orbit]++;
      by_time[k].push_back(err.mean());
      time_of[k] = s.time_s;
    }
    const double n = static_cast<double>(samples.size());
    json faces;
    for (std::size_t j = 0; j < config.size(); ++j) {
      mae << name << ',' << config.surface(j).name << ',' << face_err[j] / n << '\n';
      faces[config.surface(j).name] = face_err[j] / n;
    }
    for (const auto& [key, count] : counts)
      hist << name << ',' << config.surface(key.first).name << ',' << key.second
           << ',' << count << '\n';
    for (const auto& [k, v] : by_time)
      orbit << name << ',' << k << ',' << time_of[k] << ',' << quantile(v, 0.5)
            << ',' << quantile(v, 0.025) << ',' << quantile(v, 0.975) << '\n';
    summary[name] = {{"mae_K", overall / n}, {"mae_per_face_K", faces}};
    std::cout << name << " mae_K=" << overall / n << '\n';
  }
  write_run_json(dir / "eval_run.json", config, c.seed,
                 {{"split", a.split}, {"samples", samples.size()}, {"models", summary}});
  std::cout << "wrote " << dir.string() << '\n';
  return kExitOk;
}

struct BenchArgs {
  std::string dataset = "dataset.bin";
  std::string models = "models";
  std::string out = "report";
  int reps = 3;
  std::vector<std::string> names;
};

int cmd_bench(const Common& c, const BenchArgs& a) {
  if (a.reps < 1) throw ConfigError("bench: --reps must be >= 1");
  const SpacecraftConfig config = load_config(c);
  const Dataset data = load_dataset(a.dataset);
  const PhysicsModel physics = make_physics(c, config);
  const auto [train_set, val_set] = split(data);
  const auto kinds = available_models(a.models, a.names);
  if (kinds.empty()) throw ConfigError("bench: no models found in " + a.models);
  ensure_dir(a.out);
  std::ofstream out(fs::path(a.out) / "runtime.csv");
  out << "# " << metadata(config, c.seed) << '\n'
      << "model,median_runtime_s,median_total_nodes\n"
      << std::setprecision(10);
  for (const ModelKind kind : kinds) {
    const Model model = model_for(a.models, kind, physics);
    std::vector<double> times, nodes;
    for (const auto& s : val_set) predict(model, physics, s);  // warm caches
    for (int r = 0; r < a.reps; ++r) {
      for (const auto& s : val_set) {
        const auto t0 = std::chrono::steady_clock::now();
        const Prediction p = predict(model, physics, s);
        times.push_back(std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0).count());
        nodes.push_back(p.total_nodes);
      }
    }
    out << to_string(kind) << ',' << quantile(times, 0.5) << ','
        << quantile(nodes, 0.5) << '\n';
    std::cout << to_string(kind) << " median_runtime_s=" << quantile(times, 0.5)
              << " median_total_nodes=" << quantile(nodes, 0.5) << '\n';
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Adaptive-nodalization spacecraft thermal models"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--config", common.config, "Spacecraft JSON (default: bundled)");
    sub->add_option("--viewfactors", common.viewfactors,
                    "Dense view-factor cache; computed when missing");
    sub->add_option("--rays", common.rays, "Rays per node")->check(CLI::PositiveNumber);
    sub->add_option("--seed", common.seed, "Random seed");
    sub->add_option("--threads", common.threads, "Worker cap")->check(CLI::PositiveNumber);
  };

  std::string out;
  auto* config_cmd = app.add_subcommand("config", "Print the spacecraft configuration");
  add_common(config_cmd);
  config_cmd->add_option("--out", out, "Write to file instead of stdout");

  auto* vf_cmd = app.add_subcommand("viewfactors", "Compute dense view factors");
  add_common(vf_cmd);
  vf_cmd->add_option("--out", out, "Output cache file (default: --viewfactors)");

  auto* ds_cmd = app.add_subcommand("dataset", "Generate or inspect datasets");
  ds_cmd->require_subcommand(1);
  int orbits = 10, points = 24;
  auto* gen_cmd = ds_cmd->add_subcommand("generate", "Run the dense solver along orbits");
  add_common(gen_cmd);
  gen_cmd->add_option("--out", out, "Dataset file (default dataset.bin)");
  gen_cmd->add_option("--orbits", orbits, "Number of orbits")->check(CLI::Range(2, 1000));
  gen_cmd->add_option("--points", points, "Time points per orbit")->check(CLI::PositiveNumber);
  std::string dataset = "dataset.bin";
  auto* ins_cmd = ds_cmd->add_subcommand("inspect", "Print dataset header and stats");
  ins_cmd->add_option("--dataset", dataset, "Dataset file");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train or configure a model");
  add_common(train_cmd);
  train_cmd->add_option("model", ta.model, "piml-a | piml-as | ann | lf | hf")->required();
  train_cmd->add_option("--dataset", ta.dataset, "Dataset file");
  train_cmd->add_option("--out", ta.out, "Output directory");
  train_cmd->add_option("--epochs", ta.epochs)->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--batch", ta.batch)->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", ta.lr)->check(CLI::PositiveNumber);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Per-face errors and histograms");
  add_common(eval_cmd);
  eval_cmd->add_option("--dataset", ea.dataset, "Dataset file");
  eval_cmd->add_option("--models", ea.models, "Checkpoint directory");
  eval_cmd->add_option("--model", ea.names, "Model names (default: all found)");
  eval_cmd->add_option("--out", ea.out, "Report directory");
  eval_cmd->add_option("--split", ea.split, "train | validation")
      ->check(CLI::IsMember({"train", "validation"}));

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "Median runtime per sample");
  add_common(bench_cmd);
  bench_cmd->add_option("--dataset", ba.dataset, "Dataset file");
  bench_cmd->add_option("--models", ba.models, "Checkpoint directory");
  bench_cmd->add_option("--model", ba.names, "Model names (default: all found)");
  bench_cmd->add_option("--out", ba.out, "Report directory");
  bench_cmd->add_option("--reps", ba.reps, "Repetitions")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*config_cmd) return cmd_config(common, out);
    if (*vf_cmd) return cmd_viewfactors(common, out);
    if (*gen_cmd) return cmd_dataset_generate(common, out, orbits, points);
    if (*ins_cmd) return cmd_dataset_inspect(dataset);
    if (*train_cmd) return cmd_train(common, ta);
    if (*eval_cmd) return cmd_eval(common, ea);
    if (*bench_cmd) return cmd_bench(common, ba);
  } catch (const InstabilityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace adaptherm::cli
