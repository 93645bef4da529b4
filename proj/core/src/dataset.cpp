#include "adaptherm/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "adaptherm/binary_io.hpp"
#include "adaptherm/error.hpp"
#include "adaptherm/geometry.hpp"

namespace adaptherm {

std::vector<int> Dataset::orbit_ids() const {
  std::set<int> ids;
  for (const auto& s : samples) ids.insert(s.orbit);
  return {ids.begin(), ids.end()};
}

std::vector<OrbitSpec> default_orbits(std::uint64_t seed, int orbits,
                                      int samples_per_orbit) {
  std::vector<OrbitSpec> out;
  for (int k = 0; k < orbits; ++k) {
    OrbitSpec o;
    o.id = k;
    o.beta_deg = orbits > 1 ? 90.0 * k / (orbits - 1) : 0.0;
    o.samples_per_orbit = samples_per_orbit;
    UniformStream rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
    o.phase_offset_rad = 2.0 * std::numbers::pi * rng.next();
    out.push_back(o);
  }
  return out;
}

namespace {

std::vector<ThermalSample> run_orbit(const OrbitSpec& orbit,
                                     const PhysicsModel& physics,
                                     const OrbitLoadModel& loads,
                                     const DatasetOptions& options) {
  orbit.validate();
  std::vector<ThermalSample> out;
  ad::Vector t = ad::Vector::Constant(
      static_cast<Eigen::Index>(physics.dense_size()), options.initial_temperature);
  for (int k = 0; k < orbit.samples_per_orbit; ++k) {
    ThermalSample s;
    s.orbit = orbit.id;
    s.beta_deg = orbit.beta_deg;
    s.time_s = orbit.time_point(k);
    s.loads = loads.loads(orbit, s.time_s);
    s.initial = t;
    try {
      s.target = physics.simulate_dense(s.loads, s.initial);
    } catch (const InstabilityError& e) {
      throw InstabilityError("orbit " + std::to_string(orbit.id) + " time " +
                                 std::to_string(s.time_s) + " s: " + e.what(),
                             e.step());
    }
    t = s.target;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Dataset generate_dataset(const std::vector<OrbitSpec>& orbits,
                         const PhysicsModel& physics,
                         const OrbitLoadModel& loads, std::uint64_t seed,
                         const DatasetOptions& options) {
  if (loads.meshes().size() != physics.surfaces())
    throw ShapeError("dataset: load model and physics model disagree");
  Dataset data;
  data.geometry_hash = physics.config().geometry_hash();
  data.seed = seed;
  data.dt = physics.settings().dt;
  data.duration = physics.settings().duration;
  data.nodes = physics.dense_size();

  std::vector<std::vector<ThermalSample>> per_orbit(orbits.size());
  std::vector<std::exception_ptr> errors(orbits.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < orbits.size(); k = next++) {
      try {
        per_orbit[k] = run_orbit(orbits[k], physics, loads, options);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int threads =
      std::clamp(options.threads, 1, static_cast<int>(std::max<std::size_t>(1, orbits.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (auto& o : per_orbit)
    for (auto& s : o) data.samples.push_back(std::move(s));
  return data;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset " + path.string());
  io::write_header(out, "ATDS", kDatasetVersion);
  io::write(out, data.geometry_hash);
  io::write(out, data.seed);
  io::write(out, data.dt);
  io::write(out, data.duration);
  io::write(out, data.nodes);
  io::write(out, static_cast<std::uint64_t>(data.samples.size()));
  for (const auto& s : data.samples) {
    if (static_cast<std::uint64_t>(s.loads.size()) != data.nodes ||
        static_cast<std::uint64_t>(s.initial.size()) != data.nodes ||
        static_cast<std::uint64_t>(s.target.size()) != data.nodes)
      throw ShapeError("dataset: sample size does not match header");
    io::write<std::int32_t>(out, s.orbit);
    io::write(out, s.beta_deg);
    io::write(out, s.time_s);
    io::write_vector(out, s.loads);
    io::write_vector(out, s.initial);
    io::write_vector(out, s.target);
  }
  if (!out) throw Error("failed writing dataset " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset " + path.string());
  io::read_header(in, "ATDS", kDatasetVersion, "dataset");
  Dataset d;
  d.geometry_hash = io::read<std::uint64_t>(in, "geometry hash");
  d.seed = io::read<std::uint64_t>(in, "seed");
  d.dt = io::read<double>(in, "dt");
  d.duration = io::read<double>(in, "duration");
  d.nodes = io::read<std::uint64_t>(in, "node count");
  const auto count = io::read<std::uint64_t>(in, "sample count");
  if (d.nodes == 0 || d.nodes > (1u << 20) || count > (1u << 24))
    throw FormatError("dataset: implausible header");
  d.samples.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    ThermalSample s;
    s.orbit = io::read<std::int32_t>(in, "orbit id");
    s.beta_deg = io::read<double>(in, "beta");
    s.time_s = io::read<double>(in, "time");
    s.loads = io::read_vector(in, d.nodes, "loads");
    s.initial = io::read_vector(in, d.nodes, "initial temperatures");
    s.target = io::read_vector(in, d.nodes, "target temperatures");
    d.samples.push_back(std::move(s));
  }
  return d;
}

std::pair<std::vector<ThermalSample>, std::vector<ThermalSample>> split(
    const Dataset& data) {
  if (data.orbit_ids().size() < 2)
    throw Error("split: need samples from at least 2 orbits");
  std::vector<ThermalSample> train, val;
  for (const auto& s : data.samples)
    (s.orbit % 2 == 0 ? train : val).push_back(s);
  return {std::move(train), std::move(val)};
}

std::string inspect(const Dataset& data) {
  std::ostringstream out;
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(data.geometry_hash));
  out << "format_version=" << kDatasetVersion << " geometry_hash=" << hash
      << " seed=" << data.seed << " dt=" << data.dt
      << " duration=" << data.duration << " nodes=" << data.nodes
      << " samples=" << data.samples.size() << '\n';
  std::map<int, std::vector<const ThermalSample*>> by_orbit;
  for (const auto& s : data.samples) by_orbit[s.orbit].push_back(&s);
  for (const auto& [id, list] : by_orbit) {
    double qmin = 1e300, qmax = -1e300, tmin = 1e300, tmax = -1e300, qsum = 0;
    for (const auto* s : list) {
      qmin = std::min(qmin, s->loads.minCoeff());
      qmax = std::max(qmax, s->loads.maxCoeff());
      qsum += s->loads.sum();
      tmin = std::min(tmin, s->target.minCoeff());
      tmax = std::max(tmax, s->target.maxCoeff());
    }
    out << "orbit=" << id << " beta=" << list.front()->beta_deg
        << " samples=" << list.size() << " load_min_W=" << qmin
        << " load_max_W=" << qmax
        << " mean_total_load_W=" << qsum / static_cast<double>(list.size())
        << " T_min_K=" << tmin << " T_max_K=" << tmax << '\n';
  }
  return out.str();
}

double max_abs_load(const std::vector<ThermalSample>& samples) {
  double m = 0.0;
  for (const auto& s : samples) m = std::max(m, s.loads.cwiseAbs().maxCoeff());
  return m;
}

}  // namespace adaptherm
