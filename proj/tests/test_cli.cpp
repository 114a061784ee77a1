#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmc/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Invocation {
  int code = 0;
  std::string out;
  std::string err;
};

Invocation run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  Invocation r;
  r.code = mmc::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n' ? 1 : 0;
  return n;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mmc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

const std::string kDataDir = MMC_DATA_DIR;

}  // namespace

TEST_F(Cli, ModelInfoBuiltinPanda) {
  const Invocation r = run({"model-info", "--builtin", "panda"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("joints: 7"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("revolute"), std::string::npos);
}

TEST_F(Cli, ModelInfoDhFile) {
  const Invocation r = run({"model-info", "--dh", kDataDir + "/ur5.dh"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("joints: 6"), std::string::npos) << r.out;
}

TEST_F(Cli, ModelInfoBadUrdf) {
  std::ofstream(path("bad.xml")) << "<robot name='x'><link name='a'>\n<joint";
  const Invocation r = run({"model-info", "--urdf", path("bad.xml")});
  EXPECT_EQ(r.code, mmc::cli::kModelError);
  EXPECT_NE(r.err.find("model error"), std::string::npos) << r.err;
  EXPECT_EQ(run({"model-info", "--urdf", path("missing.urdf")}).code, mmc::cli::kModelError);
  EXPECT_EQ(run({"model-info", "--builtin", "kuka"}).code, mmc::cli::kModelError);
}

TEST_F(Cli, ModelSourcesAreExclusive) {
  EXPECT_EQ(run({"model-info", "--builtin", "panda", "--dh", kDataDir + "/ur5.dh"}).code, mmc::cli::kUsage);
  EXPECT_EQ(run({"model-info"}).code, mmc::cli::kUsage);
}

TEST_F(Cli, EvalManipulability) {
  Invocation r = run({"eval", "--builtin", "planar2r", "--q", "0,1.5708", "manip", "--axes", "trans-xy"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(std::stod(r.out), 1.0, 1e-6);
  r = run({"eval", "--builtin", "planar2r", "--q", "0,0", "manip", "--axes", "trans-xy"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::stod(r.out), 0.0);
}

TEST_F(Cli, EvalSingularGradient) {
  const Invocation r = run({"eval", "--builtin", "planar2r", "--q", "0.3,0", "jm", "--axes", "trans-xy"});
  EXPECT_EQ(r.code, mmc::cli::kRuntimeError);
  EXPECT_NE(r.err.find("manipulability"), std::string::npos) << r.err;
}

TEST_F(Cli, EvalOtherQuantities) {
  for (const char* what : {"fk", "jacobian", "jm", "ellipsoid"}) {
    const Invocation r = run({"eval", "--builtin", "panda", "--q", "0,-0.3,0,-2,0,1.8,0.7", what, "--axes",
                       std::string(what) == "ellipsoid" ? "trans" : "all"});
    EXPECT_EQ(r.code, 0) << what << ": " << r.err;
    EXPECT_FALSE(r.out.empty());
  }
}

TEST_F(Cli, EvalRejectsBadInput) {
  EXPECT_EQ(run({"eval", "--builtin", "panda", "--q", "0,0", "fk"}).code, mmc::cli::kUsage);
  EXPECT_EQ(run({"eval", "--builtin", "panda", "--q", "0,0,a,0,0,0,0", "fk"}).code, mmc::cli::kUsage);
  EXPECT_EQ(run({"eval", "--builtin", "panda", "--q", "0,0,0,0,0,0,0", "torque"}).code, mmc::cli::kUsage);
}

TEST_F(Cli, ServoRun) {
  const Invocation r = run({"servo", "--builtin", "planar2r", "--controller", "rrmc", "--start", "0.3,1.2", "--goal-q",
                     "0.5,1.0"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("outcome: success"), std::string::npos) << r.out;
}

TEST_F(Cli, ExperimentRejectsZeroTrials) {
  const Invocation r = run({"experiment", "--builtin", "panda", "--n", "0"});
  EXPECT_EQ(r.code, mmc::cli::kUsage);
  EXPECT_EQ(run({"experiment", "--builtin", "panda", "--controllers", "rrmc,pid", "--n", "1"}).code, mmc::cli::kUsage);
}

TEST_F(Cli, ExperimentWritesDeterministicOutputs) {
  const std::vector<std::string> base = {"experiment", "--builtin", "panda", "--controllers", "rrmc,mmc",
                                         "--n",        "3",         "--seed", "42"};
  std::vector<std::string> a = base;
  a.insert(a.end(), {"--csv", path("a.csv"), "--json", path("a.json")});
  std::vector<std::string> b = base;
  b.insert(b.end(), {"--csv", path("b.csv"), "--json", path("b.json"), "--jobs", "2"});
  const Invocation ra = run(a);
  const Invocation rb = run(b);
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  const std::string csv = slurp(path("a.csv"));
  EXPECT_EQ(count_lines(csv), 1 + 3 * 2);
  EXPECT_EQ(csv, slurp(path("b.csv")));
  const nlohmann::json doc = nlohmann::json::parse(slurp(path("a.json")));
  EXPECT_EQ(doc["trials"], 3);
  EXPECT_EQ(doc["seed"], 42);
  EXPECT_NE(ra.out.find("mmc"), std::string::npos);
}

TEST_F(Cli, UnwritableOutputIsRuntimeError) {
  const Invocation r = run({"experiment", "--builtin", "planar2r", "--controllers", "rrmc", "--n", "1", "--capsule-radius",
                     "0", "--csv", path("no/such/dir/out.csv"), "--json", ""});
  EXPECT_EQ(r.code, mmc::cli::kRuntimeError);
}

TEST_F(Cli, EnvironmentOverridesDefault) {
  // A short trial budget from the environment cuts the trial off after five steps.
  ::setenv("MMC_T_MAX", "0.1", 1);
  const Invocation r = run({"servo", "--builtin", "planar2r", "--controller", "rrmc", "--start", "0.3,1.2", "--goal-q",
                     "1.5,0.4"});
  ::unsetenv("MMC_T_MAX");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("outcome: timeout"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("steps: 5\n"), std::string::npos) << r.out;
}

TEST_F(Cli, ConfigFileAndFlagPrecedence) {
  std::ofstream(path("run.cfg")) << "# servo settings\nt-max = 0.1\ncontroller = rrmc\n";
  Invocation r = run({"servo", "--builtin", "planar2r", "--config", path("run.cfg"), "--start", "0.3,1.2", "--goal-q",
               "1.5,0.4"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("controller: rrmc"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("steps: 5\n"), std::string::npos) << r.out;

  r = run({"servo", "--builtin", "planar2r", "--config", path("run.cfg"), "--t-max", "0.2", "--start", "0.3,1.2",
           "--goal-q", "1.5,0.4"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("steps: 10\n"), std::string::npos) << r.out;

  EXPECT_EQ(run({"servo", "--builtin", "planar2r", "--config", path("missing.cfg")}).code, mmc::cli::kUsage);
}

TEST_F(Cli, HelpAndUnknownCommand) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"frobnicate"}).code, mmc::cli::kUsage);
  EXPECT_EQ(run({}).code, mmc::cli::kUsage);
}
