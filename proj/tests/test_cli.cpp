#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int rc = -1;
  std::string out;  // stdout and stderr
};

Run run(const std::string& args) {
  const std::string cmd = std::string(MDLAB_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string fixture(const std::string& name) { return std::string(MDLAB_SOURCE_DIR) + "/tests/fixtures/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("mdlab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string out(const std::string& sub = "") const { return " --out " + (dir / sub).string(); }
  fs::path dir;
};

}  // namespace

TEST_F(Cli, RatioHilbertFixturePrintsOne) {
  const auto r = run("ratio --space lp:dim=1,p=2 --p 2 --n 3 --engine exact --kernel " + fixture("scalar3.kernel") + out());
  EXPECT_EQ(r.rc, 0) << r.out;
  EXPECT_EQ(r.out.substr(0, 4), "1.0 ");
  const auto j = nlohmann::json::parse(slurp(dir / "ratio.json"));
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["provenance"]["fingerprint"], "560e79fad0227895");
  EXPECT_TRUE(j["provenance"].contains("seed"));
}

TEST_F(Cli, RatioAsymmetricFixture) {
  const auto r = run("ratio --p 1 --kernel " + fixture("asym.kernel") + out());
  EXPECT_EQ(r.rc, 0) << r.out;
  EXPECT_EQ(r.out.substr(0, r.out.find(' ')), "1.070090957731407");
}

TEST_F(Cli, RatioMonteCarloIsReproducible) {
  const std::string base = "ratio --p 1 --engine mc --samples 4000 --seed 9 --kernel " + fixture("asym.kernel");
  const auto a = run(base + out("a"));
  const auto b = run(base + " --threads 3" + out("b"));
  EXPECT_EQ(a.rc, 0) << a.out;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(slurp(dir / "a/ratio.json"), slurp(dir / "b/ratio.json"));
  EXPECT_NE(a.out.find("+-"), std::string::npos);
}

TEST_F(Cli, SpaceMismatchIsAUsageError) {
  const auto r = run("ratio --space lp:dim=2,p=2 --kernel " + fixture("scalar3.kernel") + out());
  EXPECT_EQ(r.rc, 2);
  EXPECT_NE(r.out.find("does not match"), std::string::npos);
}

TEST_F(Cli, DegenerateRatioIsReported) {
  std::ofstream(dir / "zero.kernel") << "format mdlab-kernel 1\nspace lp:dim=1,p=2\nlevels 1\narities 2\n"
                                        "level 1 outcomes -1 1 probs 0.5 0.5\nh 1\n0\n0\nend\n";
  const auto r = run("ratio --kernel " + (dir / "zero.kernel").string() + out());
  EXPECT_EQ(r.rc, 0) << r.out;
  EXPECT_EQ(r.out.substr(0, 10), "degenerate");
}

TEST_F(Cli, CheckOnFixture) {
  const auto r = run("check --kernel " + fixture("asym.kernel") + out());
  EXPECT_EQ(r.rc, 0);
  EXPECT_EQ(r.out, "tangent: yes, CI: yes\n");
  const auto j = nlohmann::json::parse(slurp(dir / "check.json"));
  EXPECT_TRUE(j["tangent"].get<bool>());
  EXPECT_TRUE(j["tangent_witness"].is_null());
}

TEST_F(Cli, WeakTypeAndUmd) {
  const auto w = run("weak-type --kernel " + fixture("asym.kernel") + out());
  EXPECT_EQ(w.rc, 0);
  EXPECT_EQ(w.out.substr(0, w.out.find(' ')), "0.5992509363295879");
  const auto u = run("umd --p 1 --kernel " + fixture("pw_l1.kernel") + out());
  EXPECT_EQ(u.rc, 0);
  EXPECT_EQ(u.out.substr(0, u.out.find(' ')), "1.46");
  const auto s = run("umd --space lp:dim=2,p=1 --p 1 --n 3 --budget 100 --seed 4" + out());
  EXPECT_EQ(s.rc, 0) << s.out;
  EXPECT_TRUE(fs::exists(dir / "umd_best.kernel"));
}

TEST_F(Cli, SweepWritesCsvAndKernels) {
  const auto r = run("sweep --space lp:dim=2,p=inf --dims 2,4 --n 3 --p 1 --budget 100 --seed 7" + out());
  EXPECT_EQ(r.rc, 0) << r.out;
  const auto csv = slurp(dir / "sweep.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "dim,p,N,mode,best_constant,seed,budget,fingerprint");
  EXPECT_TRUE(fs::exists(dir / "sweep_dim4.kernel"));
}

TEST_F(Cli, ExperimentIsDeterministic) {
  const std::string base = "experiment c0-growth --dims 2,4,8 --n 4 --p 1 --seed 7 --budget 200 --restarts 2";
  const auto a = run(base + out("a"));
  const auto b = run(base + " --threads 2" + out("b"));
  EXPECT_EQ(a.rc == 2, false) << a.out;
  for (const char* f : {"c0-growth.csv", "c0-growth.json", "c0-growth.svg"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  const auto csv = slurp(dir / "a/c0-growth.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_NE(csv.find("\nlinf,8,1,4,decoupling,"), std::string::npos);
}

TEST_F(Cli, FailedVerdictExitsOne) {
  const auto r = run("experiment c0-growth --dims 2,4 --n 3 --budget 50 --restarts 1 --growth-threshold 100" + out());
  EXPECT_EQ(r.rc, 1) << r.out;
  const auto j = nlohmann::json::parse(slurp(dir / "c0-growth.json"));
  EXPECT_FALSE(j["passed"].get<bool>());
}

TEST_F(Cli, ConfigFileAndPrecedence) {
  std::ofstream(dir / "run.cfg") << "# pins\ngrowth-threshold = 100\nbudget=50\nrestarts = 1\nn = 3\ndims = 2,4\n";
  const auto cfg = " --config " + (dir / "run.cfg").string();
  EXPECT_EQ(run("experiment c0-growth" + cfg + out()).rc, 1);
  EXPECT_EQ(run("experiment c0-growth --growth-threshold 0.5" + cfg + out()).rc, 0);
  std::ofstream(dir / "bad.cfg") << "no-such-key = 1\n";
  const auto bad = run("experiment c0-growth --config " + (dir / "bad.cfg").string() + out());
  EXPECT_EQ(bad.rc, 2);
  EXPECT_NE(bad.out.find("no-such-key"), std::string::npos);
}

TEST_F(Cli, UsageAndInputErrors) {
  const auto flag = run("ratio --bogus 1 --kernel " + fixture("asym.kernel"));
  EXPECT_EQ(flag.rc, 2);
  EXPECT_NE(flag.out.find("--bogus"), std::string::npos);
  EXPECT_EQ(run("").rc, 2);
  EXPECT_EQ(run("experiment nope" + out()).rc, 2);
  EXPECT_EQ(run("ratio --kernel " + (dir / "missing.kernel").string() + out()).rc, 2);
  EXPECT_EQ(run("ratio --p 0.5 --kernel " + fixture("asym.kernel") + out()).rc, 2);
  EXPECT_EQ(run("sweep --dims 2 --budget 0" + out()).rc, 2);
  EXPECT_EQ(run("--help").rc, 0);
}

TEST_F(Cli, ResourceErrorsReportRequiredAtoms) {
  const auto r = run("ratio --space lp:dim=2,p=2 --n 30" + out());
  EXPECT_EQ(r.rc, 2);
  EXPECT_NE(r.out.find("required atoms"), std::string::npos) << r.out;
}

TEST_F(Cli, CertifyAndGoodLambda) {
  const auto r = run("certify --kernel " + fixture("asym.kernel") + out());
  EXPECT_EQ(r.rc, 0) << r.out;
  EXPECT_EQ(r.out.substr(0, 24), "davis certificate: ok (w");
  const auto g = run("certify --lambda 1.5 --delta 0.5 --beta 2 --p 1 --kernel " + fixture("asym.kernel") + out());
  EXPECT_EQ(g.rc, 0) << g.out;
  const auto j = nlohmann::json::parse(slurp(dir / "certificate.json"));
  EXPECT_TRUE(j["good_lambda"]["holds"].get<bool>());
  EXPECT_DOUBLE_EQ(j["good_lambda"]["bound_corrected"].get<double>(), 0.24609375);
  EXPECT_EQ(run("certify --lambda 1 --beta 1.2 --kernel " + fixture("asym.kernel") + out()).rc, 2);
}

TEST_F(Cli, GenWritesAParsableKernel) {
  const auto r = run("gen --space lp:dim=3,p=inf --n 2 --arity 3 --seed 5" + out());
  EXPECT_EQ(r.rc, 0) << r.out;
  const std::string path = r.out.substr(0, r.out.find('\n'));
  EXPECT_TRUE(fs::exists(path));
  EXPECT_EQ(run("check --kernel " + path + out()).out, "tangent: yes, CI: yes\n");
}
