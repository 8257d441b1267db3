/**
 * @file portfolio.hpp
 * @brief Long-only minimum-variance portfolios with estimated (R, Q):
 *        data ingestion, estimation, the efficient QP and its confidence set
 *        over the weight simplex.
 *
 * The program is  min 1/2 theta'Q theta  s.t.  R'theta = mu, 1'theta = 1,
 * theta >= 0. The return row and the k dual rows are moments; 1'theta = 1
 * involves no estimate and is imposed exactly through the simplex lattice.
 */
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpinfer/densela.hpp"
#include "mpinfer/errors.hpp"
#include "mpinfer/inference.hpp"
#include "mpinfer/kkt.hpp"
#include "mpinfer/qp.hpp"
#include "mpinfer/stats.hpp"

namespace mpinfer {

struct ReturnPanel {
  std::vector<std::string> dates;  ///< ISO yyyy-mm-dd, strictly increasing
  std::vector<std::string> tickers;
  DenseMatrix values;              ///< T x k, percent per annum
  std::size_t dropped_rows = 0;    ///< rows removed for missing or unparsable cells

  std::size_t observations() const { return values.rows(); }
  std::size_t assets() const { return tickers.size(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool valid_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (s[i] < '0' || s[i] > '9') return false;
  const int y = std::stoi(s.substr(0, 4));
  const unsigned m = static_cast<unsigned>(std::stoi(s.substr(5, 2)));
  const unsigned d = static_cast<unsigned>(std::stoi(s.substr(8, 2)));
  return std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}.ok();
}

inline bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace detail

/// Parses `date,<ticker1>,...` CSV text. Rows with a missing or unparsable
/// value are dropped and counted; structural problems raise ParseError.
inline ReturnPanel parse_panel(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  ReturnPanel panel;
  bool have_header = false;
  struct Row {
    std::string date;
    std::vector<double> v;
  };
  std::vector<Row> rows;
  std::set<std::string> seen;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> f = detail::split_csv(line);
    if (!have_header) {
      if (line_no == 1 && f[0].size() >= 3 && static_cast<unsigned char>(f[0][0]) == 0xEF) f[0] = f[0].substr(3);
      if (f.size() < 2 || f[0] != "date") throw ParseError("header must be 'date,<ticker>,...'", line_no);
      panel.tickers.assign(f.begin() + 1, f.end());
      for (const auto& t : panel.tickers)
        if (t.empty()) throw ParseError("empty ticker name in header", line_no);
      have_header = true;
      continue;
    }
    if (f.size() != panel.tickers.size() + 1)
      throw ParseError("expected " + std::to_string(panel.tickers.size() + 1) + " fields, found " +
                           std::to_string(f.size()),
                       line_no);
    if (!detail::valid_iso_date(f[0])) throw ParseError("invalid date '" + f[0] + "'", line_no);
    if (!seen.insert(f[0]).second) throw ParseError("duplicate date " + f[0], line_no);
    Row r{f[0], std::vector<double>(panel.tickers.size())};
    bool ok = true;
    for (std::size_t j = 0; j < panel.tickers.size() && ok; ++j) ok = detail::parse_number(f[j + 1], r.v[j]);
    if (!ok) {
      ++panel.dropped_rows;
      continue;
    }
    rows.push_back(std::move(r));
  }
  if (!have_header || rows.empty()) throw EmptyPanel("no usable observations");
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
  panel.values = DenseMatrix(rows.size(), panel.tickers.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    panel.dates.push_back(rows[t].date);
    for (std::size_t j = 0; j < panel.tickers.size(); ++j) panel.values(t, j) = rows[t].v[j];
  }
  return panel;
}

inline ReturnPanel ingest_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_panel(ss.str());
}

struct PortfolioInstance {
  std::vector<std::string> tickers;
  DenseVector R_hat;
  DenseMatrix Q_hat;
  DenseMatrix V_hat;  ///< (k^2 + k) square, ordered (vec Q, R)
  double n = 0.0;
  double mu = 0.0;

  std::size_t assets() const { return R_hat.size(); }
};

/// `annualize` multiplies the covariance of daily values (and the matching
/// block of V_hat); the default treats yields as annual levels already.
inline PortfolioInstance estimate_instance(const ReturnPanel& panel, double mu, double annualize = 1.0) {
  const std::size_t k = panel.assets();
  const std::size_t t_obs = panel.observations();
  if (t_obs < k + 2) throw TooFewRows("estimate_instance: need at least k+2 observations");
  if (!(annualize > 0.0)) throw PreconditionError("annualization factor must be positive");
  const MeanCov mc = sample_mean_cov(panel.values);
  PortfolioInstance inst;
  inst.tickers = panel.tickers;
  inst.R_hat = mc.mean;
  inst.Q_hat = annualize * mc.cov;
  inst.V_hat = moments_influence_cov(panel.values, annualize);
  inst.n = static_cast<double>(t_obs);
  inst.mu = mu;
  return inst;
}

inline QpProblem portfolio_problem(const PortfolioInstance& inst) {
  const std::size_t k = inst.assets();
  QpProblem p;
  p.Q = inst.Q_hat;
  p.c = DenseVector(k, 0.0);
  p.A_ineq = DenseMatrix(0, k);
  p.b_ineq = DenseVector();
  p.A_eq = DenseMatrix(2, k);
  for (std::size_t j = 0; j < k; ++j) {
    p.A_eq(0, j) = inst.R_hat[j];
    p.A_eq(1, j) = 1.0;
  }
  p.b_eq = {inst.mu, 1.0};
  p.nonneg = true;
  return p;
}

/// Stacked estimates: vec(Q) and the return row of A_eq are stochastic,
/// with V_hat embedded at those positions.
inline EstimatedCoefficients portfolio_estimates(const PortfolioInstance& inst) {
  const std::size_t k = inst.assets();
  const QpProblem p = portfolio_problem(inst);
  const QpLayout L(k, 0, 2);
  const DenseVector point = stack_coefficients(p);
  std::vector<std::size_t> pos;
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < k; ++i) pos.push_back(L.q_at(i, j));
  for (std::size_t j = 0; j < k; ++j) pos.push_back(L.a_eq_at(0, j));
  if (inst.V_hat.rows() != pos.size() || inst.V_hat.cols() != pos.size())
    throw DimensionMismatch("portfolio V_hat must be (k^2+k) square");
  EstimatedCoefficients est;
  est.point = point;
  est.n = inst.n;
  est.V_hat = DenseMatrix(L.total, L.total);
  est.stochastic_mask.assign(L.total, false);
  for (std::size_t a = 0; a < pos.size(); ++a) {
    est.stochastic_mask[pos[a]] = true;
    for (std::size_t b = 0; b < pos.size(); ++b) est.V_hat(pos[a], pos[b]) = inst.V_hat(a, b);
  }
  est.V_hat = symmetrize(est.V_hat);
  return est;
}

inline KktSystem portfolio_system(const PortfolioInstance& inst) {
  return build_qp_system(portfolio_problem(inst), portfolio_estimates(inst));
}

inline QpSolution efficient_weights(const PortfolioInstance& inst) { return solve_qp(portfolio_problem(inst)); }

inline ConfidenceSpec portfolio_spec(std::size_t k, double alpha, double grid_step, std::size_t threads = 0) {
  ConfidenceSpec spec;
  spec.alpha = alpha;
  spec.grid_step = grid_step;
  spec.lower = DenseVector(k, 0.0);
  spec.upper = DenseVector(k, 1.0);
  spec.constraints.simplex = true;
  spec.threads = threads;
  return spec;
}

inline ConfidenceSet portfolio_cs(const PortfolioInstance& inst, double alpha, double grid_step,
                                  std::size_t threads = 0) {
  const std::size_t k = inst.assets();
  if (k < 2 || k > 6) throw PreconditionError("portfolio_cs supports 2 to 6 assets");
  const KktSystem sys = portfolio_system(inst);
  return grid_scan(sys, portfolio_estimates(inst), portfolio_spec(k, alpha, grid_step, threads));
}

inline MemberResult retest_weights(const PortfolioInstance& inst_new, const DenseVector& theta_old,
                                   double alpha = 0.10) {
  const KktSystem sys = portfolio_system(inst_new);
  return member(sys, portfolio_estimates(inst_new), portfolio_spec(inst_new.assets(), alpha, 0.01), theta_old);
}

// ---------------------------------------------------------------------------
// Output files

inline std::string format_g10(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v == 0.0 ? 0.0 : v);
  return buf;
}

inline double round_g10(double v) {
  if (!std::isfinite(v)) return v;
  return std::stod(format_g10(v));
}

inline std::string cs_points_csv(const std::vector<GridPoint>& pts, std::size_t k) {
  std::ostringstream os;
  for (std::size_t j = 0; j < k; ++j) os << "theta_" << (j + 1) << ",";
  os << "statistic,accepted\n";
  for (const auto& p : pts) {
    for (std::size_t j = 0; j < k; ++j) os << format_g10(p.theta[j]) << ",";
    os << format_g10(p.statistic) << "," << (p.accepted ? 1 : 0) << "\n";
  }
  return os.str();
}

inline nlohmann::ordered_json json_vector(const DenseVector& v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (double x : v) a.push_back(round_g10(x));
  return a;
}

inline std::string solution_json(const PortfolioInstance& inst, const QpSolution& sol, double alpha,
                                 double critical_value) {
  nlohmann::ordered_json j;
  j["tickers"] = inst.tickers;
  j["status"] = to_string(sol.status);
  j["theta"] = json_vector(sol.theta);
  nlohmann::ordered_json lam;
  lam["sign"] = json_vector(sol.lambda_sign);
  if (sol.lambda_eq.size() == 2) {
    lam["return"] = round_g10(sol.lambda_eq[0]);
    lam["budget"] = round_g10(sol.lambda_eq[1]);
  }
  j["lambda"] = lam;
  j["mu"] = round_g10(inst.mu);
  j["alpha"] = round_g10(alpha);
  j["critical_value"] = round_g10(critical_value);
  return j.dump(2) + "\n";
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// Calibrated fixture panel

inline constexpr double kFixtureR[3] = {2.2550, 2.5137, 3.9256};
inline constexpr double kFixtureQ[3][3] = {{0.5976, 0.2336, 0.2758}, {0.2336, 0.2674, 0.2285}, {0.2758, 0.2285, 0.4488}};

/// Weekdays between two ISO dates, inclusive.
inline std::vector<std::string> business_days(const std::string& first, const std::string& last) {
  using namespace std::chrono;
  auto to_days = [](const std::string& s) {
    return sys_days{year_month_day{year{std::stoi(s.substr(0, 4))}, month{static_cast<unsigned>(std::stoi(s.substr(5, 2)))},
                                   day{static_cast<unsigned>(std::stoi(s.substr(8, 2)))}}};
  };
  std::vector<std::string> out;
  char buf[16];
  for (sys_days d = to_days(first); d <= to_days(last); d += days{1}) {
    const weekday wd{d};
    if (wd == Saturday || wd == Sunday) continue;
    const year_month_day ymd{d};
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    out.emplace_back(buf);
  }
  return out;
}

/// Gaussian panel whose sample mean and covariance equal the targets up to
/// rounding: draws are whitened to exact zero mean and identity covariance
/// and then coloured by the Cholesky factor of the target.
inline ReturnPanel make_fixture_panel(std::uint64_t seed = 20100104) {
  ReturnPanel panel;
  panel.tickers = {"TBILL10Y", "AAA", "BBB"};
  panel.dates = business_days("2010-01-04", "2017-07-31");
  const std::size_t t_obs = panel.dates.size();
  const std::size_t k = 3;
  Rng rng(seed);
  DenseMatrix z(t_obs, k);
  for (std::size_t t = 0; t < t_obs; ++t)
    for (std::size_t j = 0; j < k; ++j) z(t, j) = rng.normal();
  const MeanCov mc = sample_mean_cov(z);
  const DenseMatrix lz = cholesky(mc.cov);
  DenseMatrix target(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) target(i, j) = kFixtureQ[i][j];
  const DenseMatrix lq = cholesky(target);
  panel.values = DenseMatrix(t_obs, k);
  DenseVector dev(k), white(k);
  for (std::size_t t = 0; t < t_obs; ++t) {
    for (std::size_t j = 0; j < k; ++j) dev[j] = z(t, j) - mc.mean[j];
    for (std::size_t i = 0; i < k; ++i) {  // forward substitution: lz * white = dev
      double acc = dev[i];
      for (std::size_t j = 0; j < i; ++j) acc -= lz(i, j) * white[j];
      white[i] = acc / lz(i, i);
    }
    for (std::size_t i = 0; i < k; ++i) {
      double acc = kFixtureR[i];
      for (std::size_t j = 0; j <= i; ++j) acc += lq(i, j) * white[j];
      panel.values(t, i) = acc;
    }
  }
  return panel;
}

inline std::string panel_csv(const ReturnPanel& panel) {
  std::ostringstream os;
  os << "date";
  for (const auto& t : panel.tickers) os << "," << t;
  os << "\n";
  for (std::size_t r = 0; r < panel.observations(); ++r) {
    os << panel.dates[r];
    for (std::size_t j = 0; j < panel.assets(); ++j) os << "," << format_g10(panel.values(r, j));
    os << "\n";
  }
  return os.str();
}

}  // namespace mpinfer
