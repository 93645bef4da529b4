#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "adaptherm/config.hpp"
#include "cli.hpp"

namespace adaptherm {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("adaptherm_cli_" + std::string(::testing::UnitTest::GetInstance()
                                                ->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

TEST_F(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(cli::run({}), cli::kExitUsage);
  EXPECT_EQ(cli::run({"config", "--bogus"}), cli::kExitUsage);
  EXPECT_EQ(cli::run({"frobnicate"}), cli::kExitUsage);
  EXPECT_EQ(cli::run({"dataset", "inspect", "--dataset", path("missing.bin")}),
            cli::kExitUsage);
}

TEST_F(Cli, ConfigRoundTrips) {
  ASSERT_EQ(cli::run({"config", "--out", path("c.json")}), cli::kExitOk);
  const SpacecraftConfig c = load_spacecraft_config(path("c.json"));
  EXPECT_EQ(c.geometry_hash(), default_spacecraft().geometry_hash());
}

TEST_F(Cli, UnstableConfigurationExitsWithTwo) {
  SpacecraftConfig c = default_spacecraft();
  for (auto& s : c.surfaces) s.material.thickness = 1e-7;
  std::ofstream(path("thin.json")) << dump_spacecraft_config(c);
  const int code = cli::run({"dataset", "generate", "--config", path("thin.json"),
                             "--viewfactors", path("vf.bin"), "--rays", "20",
                             "--orbits", "2", "--points", "1", "--out",
                             path("ds.bin")});
  EXPECT_EQ(code, cli::kExitNumeric);
  EXPECT_FALSE(fs::exists(path("ds.bin")));
}

TEST_F(Cli, PipelineWritesReportsWithMetadata) {
  const std::vector<std::string> common{"--viewfactors", path("vf.bin"), "--rays", "20"};
  auto with = [&](std::vector<std::string> args) {
    args.insert(args.end(), common.begin(), common.end());
    return cli::run(args);
  };
  ASSERT_EQ(with({"dataset", "generate", "--orbits", "2", "--points", "1", "--out",
                  path("ds.bin")}),
            cli::kExitOk);
  EXPECT_TRUE(fs::exists(path("vf.bin")));
  ASSERT_EQ(cli::run({"dataset", "inspect", "--dataset", path("ds.bin")}), cli::kExitOk);
  ASSERT_EQ(with({"train", "lf", "--dataset", path("ds.bin"), "--out", path("models")}),
            cli::kExitOk);
  ASSERT_EQ(with({"train", "hf", "--dataset", path("ds.bin"), "--out", path("models")}),
            cli::kExitOk);
  ASSERT_EQ(with({"eval", "--dataset", path("ds.bin"), "--models", path("models"),
                  "--out", path("report")}),
            cli::kExitOk);
  ASSERT_EQ(with({"bench", "--dataset", path("ds.bin"), "--models", path("models"),
                  "--out", path("report"), "--reps", "1"}),
            cli::kExitOk);
  for (const char* f : {"models/lf_log.csv", "report/mae_per_face.csv",
                        "report/nodalization_hist.csv", "report/orbit_error.csv",
                        "report/runtime.csv"}) {
    std::ifstream in(path(f));
    std::string first;
    ASSERT_TRUE(std::getline(in, first)) << f;
    EXPECT_EQ(first.rfind("# tool=adaptherm version=", 0), 0u) << f;
    EXPECT_NE(first.find("config_hash="), std::string::npos) << f;
    EXPECT_NE(first.find("seed="), std::string::npos) << f;
  }
  EXPECT_TRUE(fs::exists(path("models/lf_run.json")));
  EXPECT_TRUE(fs::exists(path("report/eval_run.json")));
}

}  // namespace
}  // namespace adaptherm
