#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "adaptherm/dataset.hpp"
#include "adaptherm/error.hpp"
#include "adaptherm/orbit.hpp"
#include "adaptherm/resample.hpp"
#include "support.hpp"

namespace adaptherm {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

const OrbitLoadModel& default_loads() {
  static const OrbitLoadModel m(default_spacecraft(), 1);
  return m;
}

// time at which the sun sits at orbit angle nu (0 = overhead)
double time_at(const OrbitSpec& o, double nu) {
  return (nu - o.phase_offset_rad) / (2.0 * std::numbers::pi) * o.period();
}

TEST(Orbit, KeplerPeriod) {
  OrbitSpec o;
  // 500 km circular orbit, about 94.47 min
  EXPECT_NEAR(o.period() / 60.0, 94.47, 0.01);
  o.period_s = 3600.0;
  EXPECT_EQ(o.period(), 3600.0);
  EXPECT_EQ(o.time_point(12), 1800.0);
}

TEST(Orbit, ValidationRejectsBadInputs) {
  OrbitSpec o;
  o.beta_deg = 95.0;
  EXPECT_THROW(o.validate(), ConfigError);
  o = OrbitSpec{};
  o.albedo = 1.5;
  EXPECT_THROW(o.validate(), ConfigError);
  o = OrbitSpec{};
  o.samples_per_orbit = 0;
  EXPECT_THROW(o.validate(), ConfigError);
}

TEST(Orbit, UmbraFractionMatchesCylindricalShadow) {
  OrbitSpec o;
  o.roll_deg = 0.0;
  const double r = o.earth_radius_km + o.altitude_km;
  const int steps = 7200;
  int dark = 0;
  for (int k = 0; k < steps; ++k)
    if (illumination_factor(o, o.period() * k / steps) == 0.0) ++dark;
  const double expected = std::asin(o.earth_radius_km / r) / std::numbers::pi;
  EXPECT_NEAR(static_cast<double>(dark) / steps, expected, 2.0 / steps);
  // high beta never enters the shadow
  o.beta_deg = 90.0;
  for (int k = 0; k < 100; ++k) EXPECT_EQ(illumination_factor(o, o.period() * k / 100), 1.0);
}

TEST(Orbit, PlanetViewFactorOracles) {
  OrbitSpec o;
  const double sin_rho = o.earth_radius_km / (o.earth_radius_km + o.altitude_km);
  // nadir-facing plate sees the full disk
  EXPECT_NEAR(planet_view_factor(o, nadir_direction(o)), sin_rho * sin_rho, 1e-15);
  EXPECT_EQ(planet_view_factor(o, -nadir_direction(o)), 0.0);
  // tilted by 15 degrees: the whole disk is still in view (rho is about
  // 68 degrees at 500 km), cosine law
  const Vec3 n = nadir_direction(o);
  const Vec3 tilted = (std::cos(15 * kDeg) * n + std::sin(15 * kDeg) * Vec3::UnitX()).normalized();
  EXPECT_NEAR(planet_view_factor(o, tilted), sin_rho * sin_rho * std::cos(15 * kDeg), 1e-12);
}

TEST(OrbitLoads, FiniteNonNegativeAndEveryFaceLoaded) {
  const OrbitLoadModel& lm = default_loads();
  const NodeLayout layout(lm.meshes());
  for (double beta : {0.0, 30.0, 60.0, 90.0}) {
    OrbitSpec o;
    o.beta_deg = beta;
    std::vector<double> peak(lm.meshes().size(), 0.0);
    for (int k = 0; k < 24; ++k) {
      const Eigen::VectorXd q = lm.loads(o, o.time_point(k));
      ASSERT_TRUE(q.allFinite());
      EXPECT_GE(q.minCoeff(), 0.0);
      for (std::size_t j = 0; j < peak.size(); ++j)
        peak[j] = std::max(peak[j], q.segment(static_cast<Eigen::Index>(layout.offset(j)),
                                              static_cast<Eigen::Index>(layout.count(j)))
                                        .sum());
    }
    for (std::size_t j = 0; j < peak.size(); ++j)
      EXPECT_GT(peak[j], 0.0) << "beta " << beta << " surface " << j;
  }
}

TEST(OrbitLoads, EclipseLeavesOnlyPlanetInfrared) {
  const OrbitLoadModel& lm = default_loads();
  const SpacecraftConfig& c = lm.config();
  const NodeLayout layout(lm.meshes());
  OrbitSpec o;
  o.phase_offset_rad = 0.4;
  const double t = time_at(o, std::numbers::pi);
  ASSERT_EQ(illumination_factor(o, t), 0.0);
  const Eigen::VectorXd q = lm.loads(o, t);
  // zenith face is dark
  const auto total = [&](std::size_t j) {
    return q.segment(static_cast<Eigen::Index>(layout.offset(j)),
                     static_cast<Eigen::Index>(layout.count(j)))
        .sum();
  };
  EXPECT_EQ(total(4), 0.0);
  // nadir-side bench: eps * IR * sin^2(rho) * cos(roll) * area
  const Surface& bench = c.surface(5);
  const double sin_rho = o.earth_radius_km / (o.earth_radius_km + o.altitude_km);
  const double expected = bench.material.ir_emissivity * o.planet_ir * sin_rho * sin_rho *
                          std::cos(o.roll_deg * kDeg) * bench.area();
  EXPECT_NEAR(total(5), expected, 1e-9 * expected);
}

TEST(OrbitLoads, SubsolarPointGivesDirectSunOnZenithFace) {
  const OrbitLoadModel& lm = default_loads();
  const SpacecraftConfig& c = lm.config();
  const NodeLayout layout(lm.meshes());
  OrbitSpec o;
  o.roll_deg = 0.0;
  const double t = time_at(o, 0.0);
  const Eigen::VectorXd lit = lm.sunlit_fraction(sun_direction(o, t));
  EXPECT_GE(lit.minCoeff(), 0.0);
  EXPECT_LE(lit.maxCoeff(), 1.0);
  // nothing sits above Main-5, so it is fully lit and sees no planet
  const Surface& top = c.surface(4);
  const Eigen::VectorXd q = lm.loads(o, t);
  const double got = q.segment(static_cast<Eigen::Index>(layout.offset(4)),
                               static_cast<Eigen::Index>(layout.count(4)))
                         .sum();
  const double expected = top.material.solar_absorptivity * o.solar_constant * top.area();
  EXPECT_NEAR(got, expected, 1e-9 * expected);
}

class SmallDataset : public ::testing::Test {
 protected:
  static const Dataset& data() {
    static const Dataset d = [] {
      auto orbits = default_orbits(5, 2, 3);
      return generate_dataset(orbits, test::default_physics(), default_loads(), 5);
    }();
    return d;
  }
};

TEST_F(SmallDataset, ShapesAndChaining) {
  const Dataset& d = data();
  ASSERT_EQ(d.samples.size(), 6u);
  EXPECT_EQ(d.orbit_ids(), (std::vector<int>{0, 1}));
  EXPECT_EQ(d.nodes, 830u);
  EXPECT_EQ(d.geometry_hash, test::default_physics().config().geometry_hash());
  EXPECT_TRUE(d.samples[0].initial.isConstant(290.0));
  EXPECT_TRUE(d.samples[1].initial == d.samples[0].target);
  EXPECT_TRUE(d.samples[3].initial.isConstant(290.0));
  EXPECT_EQ(d.samples[3].beta_deg, 90.0);
  for (const auto& s : d.samples) {
    EXPECT_TRUE(s.target.allFinite());
    EXPECT_GT(s.target.minCoeff(), 0.0);
  }
}

TEST_F(SmallDataset, RegenerationIsBitIdentical) {
  DatasetOptions threaded;
  threaded.threads = 2;
  const Dataset again = generate_dataset(default_orbits(5, 2, 3), test::default_physics(),
                                         default_loads(), 5, threaded);
  ASSERT_EQ(again.samples.size(), data().samples.size());
  for (std::size_t k = 0; k < again.samples.size(); ++k) {
    EXPECT_TRUE(again.samples[k].loads == data().samples[k].loads);
    EXPECT_TRUE(again.samples[k].target == data().samples[k].target);
  }
}

TEST_F(SmallDataset, GeneratedLoadsSurviveDownsampling) {
  const PhysicsModel& ph = test::default_physics();
  const auto cm = ph.coarse(Nodalization::uniform(11, 4));
  for (const auto& s : data().samples) {
    const double total = s.loads.sum();
    const ad::Vector down = *cm->resampler.load_down * s.loads;
    EXPECT_LE(std::abs(down.sum() - total), 1e-9 * total);
  }
}

TEST_F(SmallDataset, SaveLoadRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "adaptherm_ds_test.bin";
  save_dataset(path, data());
  const Dataset back = load_dataset(path);
  EXPECT_EQ(back.seed, data().seed);
  EXPECT_EQ(back.dt, data().dt);
  ASSERT_EQ(back.samples.size(), data().samples.size());
  for (std::size_t k = 0; k < back.samples.size(); ++k) {
    EXPECT_EQ(back.samples[k].orbit, data().samples[k].orbit);
    EXPECT_EQ(back.samples[k].time_s, data().samples[k].time_s);
    EXPECT_TRUE(back.samples[k].initial == data().samples[k].initial);
    EXPECT_TRUE(back.samples[k].target == data().samples[k].target);
  }
  EXPECT_NE(inspect(back).find("orbit"), std::string::npos);
  {
    std::ofstream junk(path, std::ios::binary);
    junk << "ATVF garbage";
  }
  EXPECT_THROW(load_dataset(path), FormatError);
  std::filesystem::remove(path);
}

TEST_F(SmallDataset, EvenOrbitsTrainOddValidate) {
  const auto [train, val] = split(data());
  ASSERT_EQ(train.size(), 3u);
  ASSERT_EQ(val.size(), 3u);
  for (const auto& s : train) EXPECT_EQ(s.orbit % 2, 0);
  for (const auto& s : val) EXPECT_EQ(s.orbit % 2, 1);
  Dataset one = data();
  one.samples.resize(3);
  EXPECT_THROW(split(one), Error);
  EXPECT_GT(max_abs_load(train), 0.0);
}

}  // namespace
}  // namespace adaptherm
