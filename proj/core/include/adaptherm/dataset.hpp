#pragma once

// Training records generated by running the dense solver along synthetic
// orbits, plus their binary file format and the even/odd orbit split.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "adaptherm/orbit.hpp"
#include "adaptherm/physics_model.hpp"

namespace adaptherm {

struct ThermalSample {
  int orbit = 0;
  double beta_deg = 0.0;
  double time_s = 0.0;
  ad::Vector loads;    // W per dense node, absorptivity applied
  ad::Vector initial;  // K
  ad::Vector target;   // K after one solver horizon
};

struct Dataset {
  std::uint64_t geometry_hash = 0;
  std::uint64_t seed = 0;
  double dt = 0.0;
  double duration = 0.0;
  std::uint64_t nodes = 0;
  std::vector<ThermalSample> samples;

  std::vector<int> orbit_ids() const;
};

struct DatasetOptions {
  double initial_temperature = 290.0;  // K, first point of every orbit
  int threads = 1;
};

/// Default sweep: beta = 0, 10, ..., 90 degrees, `samples_per_orbit` points
/// each. The seed shifts each orbit's starting phase.
std::vector<OrbitSpec> default_orbits(std::uint64_t seed, int orbits = 10,
                                      int samples_per_orbit = 24);

/// Chains dense simulations along each orbit: every point starts from the
/// previous point's result. Orbits run in parallel; output is ordered.
Dataset generate_dataset(const std::vector<OrbitSpec>& orbits,
                         const PhysicsModel& physics,
                         const OrbitLoadModel& loads, std::uint64_t seed,
                         const DatasetOptions& options = {});

inline constexpr std::uint32_t kDatasetVersion = 1;

void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

/// Even orbit ids train, odd ids validate. Throws with fewer than 2 orbits.
std::pair<std::vector<ThermalSample>, std::vector<ThermalSample>> split(
    const Dataset& data);

/// Header and per-orbit statistics, one line each.
std::string inspect(const Dataset& data);

/// Largest absolute dense load over all samples.
double max_abs_load(const std::vector<ThermalSample>& samples);

}  // namespace adaptherm
