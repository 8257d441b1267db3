#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mpinfer/config.hpp"

using namespace mpinfer;

namespace {

const std::string kBase = R"(kind = lp
n = 100
A = [ -1
      -1 ]
b = [ -5 -3 ]
c = [ -1 ]
mask_b = [ 1 1 ]
V = [ 1 0 ; 0 1 ]
theta_lower = [ 4 ]
theta_upper = [ 6 ]
)";

std::string field_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  return s.replace(pos, from.size(), to);
}

const std::string kPortfolioQp = R"(kind = qp
n = 50
nonneg = true
simplex = true
Q = [ 2 0.5
      0.5 1 ]
c = [ 0 0 ]
A_eq = [ 1 2 ; 1 1 ]
b_eq = [ 1.5 1 ]
stochastic = Q
mask_A_eq = [ 1 1 ; 0 0 ]
V_diag = [ 1 1 1 1 0.5 0.5 ]
)";

}  // namespace

TEST(Config, ParsesLpWithStochasticMask) {
  const ProblemConfig cfg = parse_config(kBase);
  EXPECT_EQ(cfg.kind, ProgramKind::Lp);
  EXPECT_EQ(cfg.lp.A, (DenseMatrix{{-1}, {-1}}));
  EXPECT_EQ(cfg.mask, (std::vector<bool>{false, false, true, true, false}));
  EXPECT_EQ(cfg.V(2, 2), 1.0);
  EXPECT_EQ(cfg.V(0, 0), 0.0);
  EXPECT_EQ(cfg.system().df, 2u);
  EXPECT_EQ(cfg.grid_step, 0.05);
}

TEST(Config, QpMaskIsColumnMajor) {
  const ProblemConfig cfg = parse_config(kPortfolioQp);
  // layout: vec Q (4), vec A_eq (4: (0,0) (1,0) (0,1) (1,1)), b_eq (2), c (2)
  const std::vector<bool> want{true, true, true, true, true, false, true, false, false, false, false, false};
  EXPECT_EQ(cfg.mask, want);
  EXPECT_EQ(cfg.V(4, 4), 0.5);
  EXPECT_EQ(cfg.V(6, 6), 0.5);
  EXPECT_TRUE(cfg.simplex);
  EXPECT_EQ(cfg.system().df, 3u);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(field_of(kBase + "foo = 1\n"), "foo");
  EXPECT_EQ(field_of(replace(kBase, "n = 100\n", "")), "n");
  EXPECT_EQ(field_of(replace(kBase, "kind = lp", "kind = milp")), "kind");
  EXPECT_EQ(field_of(replace(kBase, "b = [ -5 -3 ]", "b = [ -5 -3 -1 ]")), "b");
  EXPECT_EQ(field_of(replace(kBase, "mask_b = [ 1 1 ]", "mask_b = [ 1 2 ]")), "mask_b");
  EXPECT_EQ(field_of(replace(kBase, "mask_b = [ 1 1 ]", "")), "stochastic");
  EXPECT_EQ(field_of(replace(kBase, "V = [ 1 0 ; 0 1 ]", "V = [ 1 0 0 ; 0 1 0 ; 0 0 1 ]")), "V");
  EXPECT_EQ(field_of(replace(kBase, "V = [ 1 0 ; 0 1 ]", "V = [ 1 0.5 ; 0 1 ]")), "V");
  EXPECT_EQ(field_of(kBase + "V_diag = [ 1 1 ]\n"), "V");
  EXPECT_EQ(field_of(replace(kBase, "theta_upper = [ 6 ]", "theta_upper = [ 3 ]")), "theta_upper");
  EXPECT_EQ(field_of(replace(kBase, "theta_upper = [ 6 ]\n", "")), "theta_upper");
  EXPECT_EQ(field_of(kBase + "Q = [ 1 ]\n"), "Q");
  EXPECT_EQ(field_of(kBase + "alpha = 1.5\n"), "alpha");
}

TEST(Config, RejectsIndefiniteQ) {
  EXPECT_EQ(field_of(replace(kPortfolioQp, "Q = [ 2 0.5\n      0.5 1 ]", "Q = [ 1 2 ; 2 1 ]")), "Q");
}

TEST(Config, VFileIsRelativeToConfig) {
  const auto dir = std::filesystem::temp_directory_path() / "mpinfer_config_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "v.txt") << "2 0\n0 3\n";
    std::ofstream(dir / "p.cfg") << replace(kBase, "V = [ 1 0 ; 0 1 ]", "V_file = v.txt");
  }
  const ProblemConfig cfg = load_config((dir / "p.cfg").string());
  EXPECT_EQ(cfg.V(3, 3), 3.0);
  std::filesystem::remove_all(dir);
  EXPECT_EQ(field_of(replace(kBase, "V = [ 1 0 ; 0 1 ]", "V_file = /nonexistent/v.txt")), "V_file");
}

TEST(Config, WriteThenParseRoundTrips) {
  for (const std::string& text : {kBase, kPortfolioQp}) {
    const ProblemConfig a = parse_config(text);
    const ProblemConfig b = parse_config(write_config(a));
    EXPECT_EQ(a.kind, b.kind);
    EXPECT_EQ(a.mask, b.mask);
    EXPECT_EQ(a.V, b.V);
    EXPECT_EQ(a.estimates().point, b.estimates().point);
    EXPECT_EQ(a.simplex, b.simplex);
    EXPECT_EQ(a.theta_lower.has_value(), b.theta_lower.has_value());
  }
}

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"lp_sim2.cfg", "lp_intersection_bounds.cfg", "qp_identity.cfg", "qp_portfolio_mu23.cfg"}) {
    const ProblemConfig cfg = load_config(std::string(MPINFER_SOURCE_DIR) + "/configs/" + name);
    EXPECT_GT(cfg.system().df, 0u) << name;
  }
}
