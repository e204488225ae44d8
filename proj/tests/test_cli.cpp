#include "widepose/cli.hpp"
#include "widepose/io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace widepose {
namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "widepose");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "widepose_cli_test";
  void SetUp() override { std::filesystem::create_directories(dir); }
  void TearDown() override { std::filesystem::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

TEST_F(Cli, SamplePlanRow) {
  const auto r = run({"sample-plan", "--size", "64", "--lambda", "1"});
  ASSERT_EQ(r.code, kExitSuccess);
  std::istringstream lines(r.out);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  EXPECT_EQ(header, "size,lambda,alpha,N1,N2,N3,N4,N5");
  std::vector<double> v;
  std::istringstream cells(row);
  for (std::string c; std::getline(cells, c, ',');) v.push_back(std::stod(c));
  ASSERT_EQ(v.size(), 8u);
  const double expected[] = {0.1033, 2.0756, 5.6421, 2.0756, 0.1033};
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(v[3 + k], expected[k], 1e-4);
}

TEST_F(Cli, SamplePlanJsonAndSweep) {
  const auto j = Json::parse(run({"sample-plan", "--format", "json"}).out);
  EXPECT_EQ(j["schema_version"], kSchemaVersion);
  const auto sweep = run({"sample-plan", "--sweep"});
  EXPECT_EQ(sweep.code, kExitSuccess);
  EXPECT_GT(std::count(sweep.out.begin(), sweep.out.end(), '\n'), 20);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({"sample-plan", "--lambda", "-1"}).code, kExitUsage);
  EXPECT_EQ(run({"bench", "--tau", "1.5"}).code, kExitUsage);
  EXPECT_EQ(run({"bench", "--no-such-flag"}).code, kExitUsage);
  EXPECT_EQ(run({"bench", "--shard", "3/3"}).code, kExitUsage);
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
}

TEST_F(Cli, HelpListsDefaults) {
  const auto r = run({"bench", "--help"});
  EXPECT_EQ(r.code, kExitSuccess);
  for (const char* s : {"[1000]", "[0.3]", "[10]", "16,32,64,128,256"}) {
    EXPECT_NE(r.out.find(s), std::string::npos) << s;
  }
}

TEST_F(Cli, Version) {
  const auto r = run({"--version"});
  EXPECT_EQ(r.code, kExitSuccess);
  EXPECT_NE(r.out.find(kLibraryVersion), std::string::npos);
}

TEST_F(Cli, ConfigFileAndPrecedence) {
  {
    std::ofstream cfg(path("cfg.json"));
    cfg << R"({"lambda": 5, "size": 64})";
  }
  const auto from_file = run({"sample-plan", "--config", path("cfg.json")});
  EXPECT_EQ(from_file.code, kExitSuccess);
  EXPECT_NE(from_file.out.find("\n64,5,"), std::string::npos);
  const auto overridden = run({"sample-plan", "--config", path("cfg.json"), "--lambda", "1"});
  EXPECT_NE(overridden.out.find("\n64,1,"), std::string::npos);
  EXPECT_EQ(overridden.out, run({"sample-plan", "--size", "64", "--lambda", "1"}).out);

  {
    std::ofstream cfg(path("bad.json"));
    cfg << R"({"lamda": 5})";
  }
  EXPECT_EQ(run({"sample-plan", "--config", path("bad.json")}).code, kExitUsage);
  EXPECT_EQ(run({"sample-plan", "--config", path("missing.json")}).code, kExitUsage);
}

TEST_F(Cli, Gradcheck) {
  const auto r = run({"gradcheck", "--configs", "20"});
  EXPECT_EQ(r.code, kExitSuccess);
  const auto j = Json::parse(r.out);
  for (const char* k : {"loss3d", "loss2d", "focal_loss"}) EXPECT_LT(j[k]["max_rel_err"].get<double>(), 1e-4);
  EXPECT_TRUE(j["passed"].get<bool>());
}

TEST_F(Cli, SimulateFuseBenchRoundTrip) {
  ASSERT_EQ(run({"simulate", "--scenes", "4", "--seed", "7", "--out", path("sim.jsonl")}).code, kExitSuccess);
  const auto live = run({"bench", "--scenes", "4", "--seed", "7", "--out", path("live.csv"), "--summary", path("s1.csv")});
  const auto saved = run({"bench", "--input", path("sim.jsonl"), "--out", path("saved.csv"), "--summary", path("s2.csv")});
  ASSERT_EQ(live.code, kExitSuccess);
  ASSERT_EQ(saved.code, kExitSuccess);
  EXPECT_EQ(slurp(path("live.csv")), slurp(path("saved.csv")));
  EXPECT_EQ(slurp(path("s1.csv")), slurp(path("s2.csv")));

  const auto fused = run({"fuse", "--input", path("sim.jsonl"), "--out", path("fuse.jsonl")});
  EXPECT_NE(fused.code, kExitUsage);
  const auto metrics = run({"metrics", "--input", path("fuse.jsonl")});
  EXPECT_EQ(metrics.code, kExitSuccess);
  EXPECT_EQ(metrics.out.rfind("scene_id,depth_over_d,adi,add,e_q,e_t\n", 0), 0u);
}

TEST_F(Cli, BenchIsByteIdenticalAndShardable) {
  const auto a = run({"bench", "--scenes", "6", "--seed", "7"});
  const auto b = run({"bench", "--scenes", "6", "--seed", "7"});
  EXPECT_EQ(a.code, kExitSuccess);
  EXPECT_EQ(a.out, b.out);
  ASSERT_EQ(run({"bench", "--scenes", "6", "--seed", "7", "--out", path("all.csv"), "--summary", path("x.csv")}).code, 0);
  std::string joined;
  for (const char* shard : {"0/2", "1/2"}) {
    const std::string out = path(std::string("part") + shard[0] + ".csv");
    ASSERT_EQ(run({"bench", "--scenes", "6", "--seed", "7", "--shard", shard, "--out", out, "--summary", path("y.csv")}).code, 0);
    joined += slurp(out);
  }
  EXPECT_EQ(joined, slurp(path("all.csv")));
}

TEST_F(Cli, FuseFailureExitsOne) {
  // Objectness everywhere below any usable threshold: nothing is detected.
  const auto [scene, pred] = simulate_scene(SimulationSetup{}, 1, 0);
  PyramidPrediction blank(pred.spec());
  {
    std::ofstream f(path("blank.jsonl"));
    f << simulation_record(scene, blank).dump() << '\n';
  }
  EXPECT_EQ(run({"fuse", "--input", path("blank.jsonl")}).code, kExitDomainFailure);
}

TEST_F(Cli, BinaryExitCodes) {
  const std::string exe = WIDEPOSE_CLI_PATH;
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status(exe + " sample-plan --size 64"), 0);
  EXPECT_EQ(status(exe + " sample-plan --lambda -1"), 2);
  EXPECT_EQ(status(exe + " fuse"), 2);  // --input is required
}

}  // namespace
}  // namespace widepose
