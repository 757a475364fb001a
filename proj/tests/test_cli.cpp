// End-to-end checks of the command-line tool. BRQST_CLI_PATH is set by the
// build to the executable under test.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "brqst/io.hpp"

namespace brqst {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("brqst_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  /// Runs the CLI with `args`; returns the exit code and captures streams.
  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + BRQST_CLI_PATH + " " + args + " >" + path("stdout") +
                            " 2>" + path("stderr");
    const int status = std::system(cmd.c_str());
    out_ = slurp(path("stdout"));
    err_ = slurp(path("stderr"));
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  Json error_json() const { return Json::parse(err_.substr(err_.find('{'))); }

  fs::path dir_;
  std::string out_;
  std::string err_;
};

TEST_F(Cli, BuildCountsAndManifest) {
  ASSERT_EQ(run("build --family goyeneche -d 8 -r 2 -o " + path("g.json")), 0) << err_;
  EXPECT_EQ(read_json_file(path("g.json"))["bases"].size(), 9u);
  const Json manifest = read_json_file(path("g.json.manifest.json"));
  EXPECT_EQ(manifest["command"], "build");
  EXPECT_EQ(manifest["version"], kVersion);
  EXPECT_TRUE(Json::parse(err_)["validation"]["is_valid"].get<bool>());

  ASSERT_EQ(run("build --family flammia -d 8 -r 2 -o " + path("f.json")), 0) << err_;
  EXPECT_EQ(read_json_file(path("f.json"))["elements"].size(), 29u);
}

TEST_F(Cli, BuildRandomIsSeeded) {
  ASSERT_EQ(run("--seed 7 build --family random -d 11 -b 6 -o " + path("a.json")), 0);
  ASSERT_EQ(run("build --family random -d 11 -b 6 -o " + path("b.json"), "BRQST_SEED=7"), 0);
  ASSERT_EQ(run("--seed 8 build --family random -d 11 -b 6 -o " + path("c.json")), 0);
  const Json a = read_json_file(path("a.json"));
  EXPECT_EQ(a["bases"].size(), 6u);
  EXPECT_EQ(a["bases"], read_json_file(path("b.json"))["bases"]);
  EXPECT_NE(a["bases"], read_json_file(path("c.json"))["bases"]);
}

TEST_F(Cli, BuildRejectsBadCombination) {
  EXPECT_EQ(run("build --family flammia -d 4 -r 4"), 2);
  EXPECT_EQ(error_json()["error"]["kind"], "invalid_argument");
  EXPECT_EQ(run("build --family goyeneche -d 6 -r 1"), 2);
  EXPECT_EQ(run("build --family mub -d 4"), 2);
}

TEST_F(Cli, EstimateNoiselessFlammiaPipeline) {
  ASSERT_EQ(run("build --family flammia -d 8 -r 1 -o " + path("f.json")), 0);
  ASSERT_EQ(run("--seed 3 measure --measurement " + path("f.json") + " --random-rank 1 --state-out " +
                path("s.json") + " -o " + path("p.json")),
            0)
      << err_;
  ASSERT_EQ(run("estimate --measurement " + path("f.json") + " --record " + path("p.json") +
                " --method ls --target " + path("s.json") + " -o " + path("e.json")),
            0)
      << err_;
  const Json e = read_json_file(path("e.json"));
  EXPECT_TRUE(e["converged"].get<bool>());
  EXPECT_LT(e["infidelity"].get<double>(), 1e-6);
  EXPECT_TRUE(fs::exists(path("e.json.manifest.json")));
}

TEST_F(Cli, EstimateTraceUsesDefaultEpsilon) {
  ASSERT_EQ(run("build --family goyeneche -d 4 -r 1 -o " + path("g.json")), 0);
  ASSERT_EQ(run("measure --measurement " + path("g.json") + " --random-rank 1 --shots 1200 -o " +
                path("c.json")),
            0)
      << err_;
  ASSERT_EQ(run("estimate --measurement " + path("g.json") + " --record " + path("c.json") +
                " --method trace"),
            0)
      << err_;
  const Json e = Json::parse(out_);
  EXPECT_NEAR(e["eps"].get<double>(), default_epsilon(5, 4, 1200), 1e-15);
  EXPECT_EQ(e["method"], "trace");

  // Ideal probabilities carry no shot count, so eps must be explicit.
  ASSERT_EQ(run("measure --measurement " + path("g.json") + " --random-rank 1 -o " + path("p.json")), 0);
  EXPECT_EQ(run("estimate --measurement " + path("g.json") + " --record " + path("p.json") + " --method trace"),
            2);
}

TEST_F(Cli, EstimateDomainFailureExitsOne) {
  ASSERT_EQ(run("build --family goyeneche -d 4 -r 1 -o " + path("g.json")), 0);
  ASSERT_EQ(run("measure --measurement " + path("g.json") + " --random-rank 1 -o " + path("p.json")), 0);
  EXPECT_EQ(run("estimate --measurement " + path("g.json") + " --record " + path("p.json") +
                " --method trace --eps 100"),
            1);
  EXPECT_EQ(error_json()["error"]["kind"], "degenerate_estimate");
}

TEST_F(Cli, CorruptedJsonIsParseError) {
  std::ofstream(path("bad.json")) << "{\"dim\": 2, \"elements\": [";
  ASSERT_EQ(run("build --family flammia -d 2 -o " + path("f.json")), 0);
  EXPECT_EQ(run("estimate --measurement " + path("bad.json") + " --record " + path("f.json")), 2);
  EXPECT_EQ(error_json()["error"]["kind"], "parse");
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(error_json()["error"]["kind"], "usage");
  EXPECT_EQ(run("estimate --measurement"), 2);
  EXPECT_EQ(run("--tol -1 build --family flammia -d 4"), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, CompleteRoundTripAndFailureSet) {
  ASSERT_EQ(run("build --family goyeneche -d 8 -r 1 -o " + path("g.json")), 0);
  ASSERT_EQ(run("--seed 5 measure --measurement " + path("g.json") + " --random-rank 1 --state-out " +
                path("s.json") + " -o " + path("p.json")),
            0);
  ASSERT_EQ(run("complete --measurement " + path("g.json") + " --record " + path("p.json") + " -o " +
                path("c.json")),
            0)
      << err_;
  const HermitianMatrix rho = state_from_json(read_json_file(path("s.json")));
  const HermitianMatrix out = state_from_json(read_json_file(path("c.json")));
  EXPECT_LE((rho.matrix() - out.matrix()).norm(), 1e-8);

  std::ofstream(path("zero.json")) << R"({"vector": [[1,0],[0,0],[0,0],[0,0],[0,0],[0,0],[0,0],[0,0]]})";
  ASSERT_EQ(run("measure --measurement " + path("g.json") + " --state " + path("zero.json") + " -o " +
                path("z.json")),
            0);
  EXPECT_EQ(run("complete --measurement " + path("g.json") + " --record " + path("z.json")), 1);
  EXPECT_EQ(error_json()["error"]["kind"], "failure_set");
}

TEST_F(Cli, CertifyReportsKernelAndSufficiency) {
  ASSERT_EQ(run("build --family goyeneche -d 4 -r 1 -o " + path("g.json")), 0);
  ASSERT_EQ(run("certify --measurement " + path("g.json") + " --trials 20"), 0) << err_;
  const Json c = Json::parse(out_);
  EXPECT_TRUE(c["diagonal_sufficient"].get<bool>());
  EXPECT_FALSE(c["falsified"].get<bool>());

  ASSERT_EQ(run("build --family flammia -d 4 -r 1 -o " + path("f.json")), 0);
  ASSERT_EQ(run("certify --measurement " + path("f.json") + " --trials 20"), 0) << err_;
  EXPECT_EQ(Json::parse(out_)["kernel_dimension"], 8);
}

TEST_F(Cli, SweepTable1AndSchemaErrors) {
  std::ofstream(path("t1.json")) << R"({"dims": [4], "ranks": [1], "family": "haar_global",
                                       "states_per_dim": 4, "max_bases": 6})";
  ASSERT_EQ(run("--seed 2 sweep --kind table1 --config " + path("t1.json") + " --out-dir " + path("out")), 0)
      << err_;
  EXPECT_TRUE(fs::exists(path("out/table1.csv")));
  EXPECT_TRUE(fs::exists(path("out/manifest.json")));
  const Json sum = read_json_file(path("out/table1_summary.json"));
  ASSERT_EQ(sum.size(), 1u);
  EXPECT_FALSE(sum[0]["minimal_sufficient"].is_null());
  EXPECT_EQ(slurp(path("out/table1.csv")).rfind("dim,rank,family,b,seed,state,infidelity,estimator", 0), 0u);

  std::ofstream(path("empty.json")) << R"({"dims": [], "family": "haar_global", "bogus": 1})";
  EXPECT_EQ(run("sweep --kind table1 --config " + path("empty.json") + " --out-dir " + path("o2")), 2);
  const std::string msg = error_json()["error"]["message"];
  EXPECT_NE(msg.find("'dims' must not be empty"), std::string::npos);
  EXPECT_NE(msg.find("unknown key 'bogus'"), std::string::npos);
}

TEST_F(Cli, SweepFig2Shape) {
  std::ofstream(path("f2.json")) << R"({"dim": 4, "family": "goyeneche", "n_states": 2,
                                       "min_bases": 3, "max_bases": 5})";
  ASSERT_EQ(run("sweep --kind fig2 --config " + path("f2.json") + " --out-dir " + path("out")), 0) << err_;
  const std::string csv = slurp(path("out/fig2.csv"));
  // header + states x bases x estimators rows
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 3 * 3);
  const Json sum = read_json_file(path("out/fig2_summary.json"));
  EXPECT_EQ(sum["cells"].size(), 9u);
}

}  // namespace
}  // namespace brqst
