#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mpinfer/cli.hpp"

using namespace mpinfer;

namespace {

struct CliRun {
  int code = 0;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "mpinfer");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("mpinfer_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  static std::string config(const std::string& name) { return std::string(MPINFER_SOURCE_DIR) + "/configs/" + name; }

  std::filesystem::path dir_;
};

}  // namespace

TEST_F(CliTest, HelpListsSubcommands) {
  const CliRun r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* sub : {"lp-infer", "qp-infer", "simulate", "portfolio"}) EXPECT_NE(r.out.find(sub), std::string::npos);
}

TEST_F(CliTest, Version) {
  const CliRun r = run({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("mpinfer 0.1.0"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExit64) {
  EXPECT_EQ(run({"--bogus"}).code, kExitUsage);
  EXPECT_EQ(run({"lp-infer"}).code, kExitUsage);
  EXPECT_EQ(run({"simulate", "--design", "1a", "--reps", "x"}).code, kExitUsage);
}

TEST_F(CliTest, ConfigErrorsNameTheField) {
  {
    std::ofstream(path("bad.cfg")) << "kind = lp\nn = 10\nA = [ 1 ]\nb = [ 1 ]\nc = [ 1 ]\nmask_b = [ 1 ]\nV = [ 1 ]\nwat = 3\n";
  }
  const CliRun r = run({"lp-infer", "--config", path("bad.cfg"), "--out-dir", path("o")});
  EXPECT_EQ(r.code, kExitError);
  EXPECT_NE(r.err.find("wat"), std::string::npos);
  {
    std::ofstream(path("q.cfg")) << "kind = qp\nn = 10\nQ = [ 1 2 ; 2 1 ]\nc = [ 0 0 ]\nstochastic = c\nV_diag = [ 1 1 ]\n";
  }
  const CliRun q = run({"qp-infer", "--config", path("q.cfg"), "--out-dir", path("o")});
  EXPECT_EQ(q.code, kExitError);
  EXPECT_NE(q.err.find("Q"), std::string::npos);
  EXPECT_EQ(run({"lp-infer", "--config", path("missing.cfg")}).code, kExitError);
  EXPECT_EQ(run({"qp-infer", "--config", config("lp_sim2.cfg"), "--out-dir", path("o")}).code, kExitError);
}

TEST_F(CliTest, LpInferWritesResults) {
  const CliRun r = run({"lp-infer", "--config", config("lp_intersection_bounds.cfg"), "--out-dir", path("lp")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(path("lp/result.json")));
  EXPECT_EQ(j["kind"], "lp");
  EXPECT_EQ(j["df"], 2);
  EXPECT_FALSE(j["empty"].get<bool>());
  const double half = std::sqrt(5.991464547107979 / 100.0);
  EXPECT_NEAR(j["projection"][0][0].get<double>(), 5.0 - half, 0.001);
  EXPECT_NEAR(j["projection"][0][1].get<double>(), 5.0 + half, 0.001);
  const std::string csv = slurp(path("lp/cs_points.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "theta_1,statistic,accepted");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 202);
}

TEST_F(CliTest, EmptySetExits2) {
  std::string text = slurp(config("lp_intersection_bounds.cfg"));
  text.replace(text.find("theta_lower = [ 4 ]"), 19, "theta_lower = [ 6 ]");
  text.replace(text.find("theta_upper = [ 6 ]"), 19, "theta_upper = [ 7 ]");
  {
    std::ofstream(path("empty.cfg")) << text;
  }
  const CliRun r = run({"lp-infer", "--config", path("empty.cfg"), "--out-dir", path("e")});
  EXPECT_EQ(r.code, kExitEmptySet);
  EXPECT_NE(r.err.find("empty"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(path("e/result.json")));
  EXPECT_TRUE(j["empty"].get<bool>());
}

TEST_F(CliTest, SimulateWritesTable) {
  const CliRun r = run({"--threads", "2", "simulate", "--design", "1a,1c", "--n", "100,200", "--reps", "50", "--out",
                     path("t/cov.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(path("t/cov.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "design,n=100,n=200");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(run({"simulate", "--design", "9"}).code, kExitError);
}

TEST_F(CliTest, PortfolioMatchesQpInferOnEmittedConfig) {
  const CliRun p = run({"portfolio", "--fixture", "--mu", "2.3", "--out-dir", path("pf"), "--emit-config", path("pf.cfg")});
  ASSERT_EQ(p.code, 0) << p.err;
  const auto sol = nlohmann::json::parse(slurp(path("pf/solution.json")));
  EXPECT_EQ(sol["tickers"][2], "BBB");
  const CliRun q = run({"qp-infer", "--config", path("pf.cfg"), "--out-dir", path("qp")});
  ASSERT_EQ(q.code, 0) << q.err;
  // Every point in the portfolio output (accepted set plus shell) appears
  // with the same statistic in the full qp-infer grid.
  std::map<std::string, std::string> full;
  std::istringstream all(slurp(path("qp/cs_points.csv")));
  std::string line;
  std::getline(all, line);
  while (std::getline(all, line)) {
    const auto cut = line.find(',', line.find(',', line.find(',') + 1) + 1);
    full[line.substr(0, cut)] = line.substr(cut);
  }
  std::istringstream part(slurp(path("pf/cs_points.csv")));
  std::getline(part, line);
  std::size_t n = 0;
  while (std::getline(part, line)) {
    const auto cut = line.find(',', line.find(',', line.find(',') + 1) + 1);
    ASSERT_TRUE(full.count(line.substr(0, cut))) << line;
    EXPECT_EQ(full[line.substr(0, cut)], line.substr(cut));
    ++n;
  }
  EXPECT_GT(n, 0u);
}

TEST_F(CliTest, PortfolioArgumentChecks) {
  EXPECT_EQ(run({"portfolio", "--fixture"}).code, kExitError);
  EXPECT_EQ(run({"portfolio", "--mu", "2.3"}).code, kExitError);
  EXPECT_EQ(run({"portfolio", "--fixture", "--mu", "9", "--out-dir", path("x")}).code, kExitError);
  const CliRun d = run({"portfolio", "--dump-fixture", path("fx.csv")});
  EXPECT_EQ(d.code, 0);
  EXPECT_EQ(slurp(path("fx.csv")), slurp(std::string(MPINFER_SOURCE_DIR) + "/data/fixture_yields.csv"));
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
  for (int i = 0; i < 2; ++i) {
    const std::string tag = std::to_string(i);
    ASSERT_EQ(run({"--threads", i == 0 ? "1" : "4", "qp-infer", "--config", config("qp_identity.cfg"), "--out-dir",
                   path("q" + tag)})
                  .code,
              0);
  }
  EXPECT_EQ(slurp(path("q0/cs_points.csv")), slurp(path("q1/cs_points.csv")));
  EXPECT_EQ(slurp(path("q0/result.json")), slurp(path("q1/result.json")));
}
