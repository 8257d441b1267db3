/**
 * @file config.hpp
 * @brief Flat `key = value` problem configs for generic LP/QP inference.
 *
 *   # comment
 *   kind = lp                 # lp | qp
 *   A = [ 1 2
 *         1 -1 ]              # rows separated by newlines or ';'
 *   b = [ 4 1 ]
 *   stochastic = A b c        # blocks whose entries are all estimated
 *   mask_A = [ 1 0 ; 0 1 ]    # per-entry override for one block
 *   V_diag = [ ... ]          # or V = [ ... ] or V_file = path
 *
 * V and V_diag are either full stacked size or sized to the estimated
 * entries (in stacked order). See configs/ for annotated examples.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mpinfer/densela.hpp"
#include "mpinfer/errors.hpp"
#include "mpinfer/inference.hpp"
#include "mpinfer/kkt.hpp"
#include "mpinfer/lp.hpp"
#include "mpinfer/portfolio.hpp"
#include "mpinfer/qp.hpp"

namespace mpinfer {

/// Parsed numeric block: a list of rows (vectors are one row or one column).
struct NumericBlock {
  std::vector<std::vector<double>> rows;

  std::size_t count() const {
    std::size_t c = 0;
    for (const auto& r : rows) c += r.size();
    return c;
  }
};

struct ProblemConfig {
  ProgramKind kind = ProgramKind::Lp;
  double n = 0.0;
  double alpha = 0.05;
  double grid_step = 0.05;
  bool nonneg = false;
  bool simplex = false;

  LpProblem lp;
  QpProblem qp;

  std::vector<bool> mask;  ///< per stacked coefficient
  DenseMatrix V;           ///< full stacked size
  std::optional<DenseVector> theta_lower;
  std::optional<DenseVector> theta_upper;
  std::vector<LinearInequality> theta_inequalities;

  std::size_t dim() const { return kind == ProgramKind::Lp ? lp.dim() : qp.dim(); }

  EstimatedCoefficients estimates() const {
    const DenseVector point = kind == ProgramKind::Lp ? stack_coefficients(lp) : stack_coefficients(qp);
    return EstimatedCoefficients{point, V, n, mask};
  }

  KktSystem system() const {
    return kind == ProgramKind::Lp ? build_lp_system(lp, estimates()) : build_qp_system(qp, estimates());
  }

  ConfidenceSpec spec(std::size_t threads = 0) const {
    ConfidenceSpec s;
    s.alpha = alpha;
    s.grid_step = grid_step;
    s.constraints.nonneg = nonneg;
    s.constraints.simplex = simplex;
    s.constraints.inequalities = theta_inequalities;
    s.threads = threads;
    if (theta_lower) s.lower = *theta_lower;
    if (theta_upper) s.upper = *theta_upper;
    return s;
  }
};

namespace detail {

inline std::string strip_comment(const std::string& line) {
  const auto h = line.find('#');
  return h == std::string::npos ? line : line.substr(0, h);
}

inline NumericBlock parse_block(const std::string& field, const std::string& body) {
  NumericBlock blk;
  std::string cleaned = body;
  std::replace(cleaned.begin(), cleaned.end(), ';', '\n');
  std::istringstream lines(cleaned);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream toks(line);
    std::string tok;
    std::vector<double> row;
    while (toks >> tok) {
      double v = 0.0;
      if (!parse_number(tok, v)) throw ConfigError(field, "not a number: '" + tok + "'");
      row.push_back(v);
    }
    if (!row.empty()) blk.rows.push_back(std::move(row));
  }
  return blk;
}

struct RawConfig {
  std::map<std::string, std::string> scalars;
  std::map<std::string, NumericBlock> blocks;
  std::vector<std::string> order;
};

inline RawConfig read_raw(const std::string& text) {
  RawConfig raw;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    const std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ParseError("missing key", line_no);
    if (raw.scalars.count(key) || raw.blocks.count(key)) throw ConfigError(key, "given twice");
    raw.order.push_back(key);
    if (!value.empty() && value.front() == '[') {
      std::string collected = value.substr(1);
      const std::size_t start = line_no;
      while (collected.find(']') == std::string::npos) {
        if (!std::getline(is, line)) throw ParseError("unterminated '[' for " + key, start);
        ++line_no;
        collected += "\n" + strip_comment(line);
      }
      const auto close = collected.find(']');
      if (!trim(collected.substr(close + 1)).empty()) throw ParseError("text after ']'", line_no);
      raw.blocks[key] = parse_block(key, collected.substr(0, close));
    } else {
      raw.scalars[key] = value;
    }
  }
  return raw;
}

inline double scalar_number(const RawConfig& raw, const std::string& key, double fallback, bool required = false) {
  auto it = raw.scalars.find(key);
  if (it == raw.scalars.end()) {
    if (required) throw ConfigError(key, "required");
    return fallback;
  }
  double v = 0.0;
  if (!parse_number(it->second, v)) throw ConfigError(key, "not a number: '" + it->second + "'");
  return v;
}

inline bool scalar_bool(const RawConfig& raw, const std::string& key, bool fallback) {
  auto it = raw.scalars.find(key);
  if (it == raw.scalars.end()) return fallback;
  if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
  if (it->second == "false" || it->second == "0" || it->second == "no") return false;
  throw ConfigError(key, "expected true or false");
}

inline DenseMatrix block_matrix(const RawConfig& raw, const std::string& key, std::size_t rows, std::size_t cols,
                                bool required) {
  auto it = raw.blocks.find(key);
  if (it == raw.blocks.end()) {
    if (raw.scalars.count(key)) throw ConfigError(key, "expected a [ ... ] block");
    if (required) throw ConfigError(key, "required");
    return DenseMatrix(rows, cols);
  }
  const NumericBlock& b = it->second;
  if (rows == 0 && b.count() == 0) return DenseMatrix(0, cols);
  if (b.rows.size() != rows) throw ConfigError(key, "expected " + std::to_string(rows) + " rows, found " + std::to_string(b.rows.size()));
  DenseMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (b.rows[r].size() != cols)
      throw ConfigError(key, "row " + std::to_string(r) + " has " + std::to_string(b.rows[r].size()) +
                                 " entries, expected " + std::to_string(cols));
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = b.rows[r][c];
  }
  return m;
}

inline DenseVector block_vector(const RawConfig& raw, const std::string& key, std::optional<std::size_t> len,
                                bool required) {
  auto it = raw.blocks.find(key);
  if (it == raw.blocks.end()) {
    if (raw.scalars.count(key)) throw ConfigError(key, "expected a [ ... ] block");
    if (required) throw ConfigError(key, "required");
    return DenseVector(len.value_or(0), 0.0);
  }
  std::vector<double> flat;
  for (const auto& r : it->second.rows) flat.insert(flat.end(), r.begin(), r.end());
  if (len && flat.size() != *len)
    throw ConfigError(key, "expected " + std::to_string(*len) + " entries, found " + std::to_string(flat.size()));
  return DenseVector(flat);
}

/// (name, rows, cols, offset) of each coefficient block in stacked order.
struct BlockInfo {
  std::string name;
  std::size_t rows, cols, offset;
};

inline std::vector<BlockInfo> block_layout(const ProblemConfig& cfg) {
  if (cfg.kind == ProgramKind::Lp) {
    const std::size_t m = cfg.lp.rows(), k = cfg.lp.dim();
    return {{"A", m, k, 0}, {"b", m, 1, m * k}, {"c", k, 1, m * k + m}};
  }
  const std::size_t k = cfg.qp.dim(), mi = cfg.qp.ineq_rows(), me = cfg.qp.eq_rows();
  const QpLayout L(k, mi, me);
  return {{"Q", k, k, L.Q},          {"A_ineq", mi, k, L.A_ineq}, {"b_ineq", mi, 1, L.b_ineq},
          {"A_eq", me, k, L.A_eq},   {"b_eq", me, 1, L.b_eq},     {"c", k, 1, L.c}};
}

}  // namespace detail

inline ProblemConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  const RawConfig raw = read_raw(text);
  static const std::set<std::string> known{"kind", "n", "alpha", "grid_step", "nonneg", "simplex", "A", "b", "c",
                                           "Q", "A_ineq", "b_ineq", "A_eq", "b_eq", "stochastic", "V", "V_diag",
                                           "V_file", "theta_lower", "theta_upper", "theta_ineq_A", "theta_ineq_b",
                                           "mask_A", "mask_b", "mask_c", "mask_Q", "mask_A_ineq", "mask_b_ineq",
                                           "mask_A_eq", "mask_b_eq"};
  for (const auto& key : raw.order)
    if (!known.count(key)) throw ConfigError(key, "unknown key");

  ProblemConfig cfg;
  const auto kind_it = raw.scalars.find("kind");
  if (kind_it == raw.scalars.end()) throw ConfigError("kind", "required (lp or qp)");
  if (kind_it->second == "lp") {
    cfg.kind = ProgramKind::Lp;
  } else if (kind_it->second == "qp") {
    cfg.kind = ProgramKind::Qp;
  } else {
    throw ConfigError("kind", "expected lp or qp");
  }
  cfg.n = scalar_number(raw, "n", 0.0, true);
  if (!(cfg.n > 0.0)) throw ConfigError("n", "must be positive");
  cfg.alpha = scalar_number(raw, "alpha", 0.05);
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("alpha", "must lie in (0, 1)");
  cfg.grid_step = scalar_number(raw, "grid_step", 0.05);
  if (!(cfg.grid_step > 0.0)) throw ConfigError("grid_step", "must be positive");
  cfg.nonneg = scalar_bool(raw, "nonneg", false);
  cfg.simplex = scalar_bool(raw, "simplex", false);

  if (cfg.kind == ProgramKind::Lp) {
    for (const char* f : {"Q", "A_ineq", "b_ineq", "A_eq", "b_eq"})
      if (raw.blocks.count(f) || raw.scalars.count(f)) throw ConfigError(f, "not valid for kind = lp");
    const DenseVector c = block_vector(raw, "c", std::nullopt, true);
    const auto a_it = raw.blocks.find("A");
    if (a_it == raw.blocks.end()) throw ConfigError("A", "required");
    const std::size_t m = a_it->second.rows.size();
    cfg.lp.A = block_matrix(raw, "A", m, c.size(), true);
    cfg.lp.b = block_vector(raw, "b", m, true);
    cfg.lp.c = c;
    cfg.lp.nonneg = cfg.nonneg;
  } else {
    for (const char* f : {"A", "b"})
      if (raw.blocks.count(f) || raw.scalars.count(f)) throw ConfigError(f, "not valid for kind = qp");
    const DenseVector c = block_vector(raw, "c", std::nullopt, true);
    const std::size_t k = c.size();
    cfg.qp.Q = block_matrix(raw, "Q", k, k, true);
    auto rows_of = [&](const char* f) {
      auto it = raw.blocks.find(f);
      return it == raw.blocks.end() ? std::size_t{0} : it->second.rows.size();
    };
    cfg.qp.A_ineq = block_matrix(raw, "A_ineq", rows_of("A_ineq"), k, false);
    cfg.qp.b_ineq = block_vector(raw, "b_ineq", cfg.qp.A_ineq.rows(), cfg.qp.A_ineq.rows() > 0);
    cfg.qp.A_eq = block_matrix(raw, "A_eq", rows_of("A_eq"), k, false);
    cfg.qp.b_eq = block_vector(raw, "b_eq", cfg.qp.A_eq.rows(), cfg.qp.A_eq.rows() > 0);
    cfg.qp.c = c;
    cfg.qp.nonneg = cfg.nonneg;
    cfg.qp.normalize();
    try {
      cfg.qp.validate(true);
    } catch (const PreconditionError& e) {
      throw ConfigError("Q", e.what());
    }
  }
  if (cfg.kind == ProgramKind::Lp) {
    try {
      cfg.lp.validate();
    } catch (const Error& e) {
      throw ConfigError("A", e.what());
    }
  }
  const std::size_t k = cfg.dim();
  if (k == 0) throw ConfigError("c", "decision vector is empty");

  // Stochastic mask.
  const auto layout = block_layout(cfg);
  const std::size_t total = layout.back().offset + layout.back().rows * layout.back().cols;
  cfg.mask.assign(total, false);
  if (auto it = raw.scalars.find("stochastic"); it != raw.scalars.end()) {
    std::istringstream toks(it->second);
    std::string name;
    while (toks >> name) {
      auto bl = std::find_if(layout.begin(), layout.end(), [&](const BlockInfo& b) { return b.name == name; });
      if (bl == layout.end()) throw ConfigError("stochastic", "unknown block '" + name + "'");
      for (std::size_t i = 0; i < bl->rows * bl->cols; ++i) cfg.mask[bl->offset + i] = true;
    }
  }
  for (const auto& bl : layout) {
    const std::string key = "mask_" + bl.name;
    if (!raw.blocks.count(key)) continue;
    const DenseMatrix m = bl.cols == 1 ? DenseMatrix::column_vector(block_vector(raw, key, bl.rows, true))
                                       : block_matrix(raw, key, bl.rows, bl.cols, true);
    for (std::size_t r = 0; r < bl.rows; ++r)
      for (std::size_t c = 0; c < bl.cols; ++c) {
        const double v = m(r, c);
        if (v != 0.0 && v != 1.0) throw ConfigError(key, "entries must be 0 or 1");
        cfg.mask[bl.offset + c * bl.rows + r] = v == 1.0;  // column-major like vec
      }
  }
  std::vector<std::size_t> stoch;
  for (std::size_t i = 0; i < total; ++i)
    if (cfg.mask[i]) stoch.push_back(i);
  if (stoch.empty()) throw ConfigError("stochastic", "no coefficient is marked as estimated");

  // Covariance.
  const int sources = static_cast<int>(raw.blocks.count("V")) + static_cast<int>(raw.blocks.count("V_diag")) +
                      static_cast<int>(raw.scalars.count("V_file"));
  if (sources != 1) throw ConfigError("V", "give exactly one of V, V_diag, V_file");
  DenseMatrix vin;
  if (raw.blocks.count("V_diag")) {
    const DenseVector d = block_vector(raw, "V_diag", std::nullopt, true);
    vin = DenseMatrix::diagonal(d);
  } else {
    std::string key = "V";
    RawConfig file_raw;
    const RawConfig* src = &raw;
    if (raw.scalars.count("V_file")) {
      key = "V_file";
      std::filesystem::path p = raw.scalars.at("V_file");
      if (p.is_relative()) p = base_dir / p;
      std::ifstream in(p);
      if (!in) throw ConfigError("V_file", "cannot open " + p.string());
      std::ostringstream ss;
      ss << in.rdbuf();
      file_raw.blocks["V"] = parse_block("V_file", ss.str());
      src = &file_raw;
    }
    const NumericBlock& b = src->blocks.at("V");
    const std::size_t d = b.rows.size();
    vin = block_matrix(*src, "V", d, d, true);
    (void)key;
  }
  cfg.V = DenseMatrix(total, total);
  if (vin.rows() == total) {
    cfg.V = vin;
  } else if (vin.rows() == stoch.size()) {
    for (std::size_t a = 0; a < stoch.size(); ++a)
      for (std::size_t b = 0; b < stoch.size(); ++b) cfg.V(stoch[a], stoch[b]) = vin(a, b);
  } else {
    throw ConfigError("V", "size " + std::to_string(vin.rows()) + " matches neither the stacked length " +
                               std::to_string(total) + " nor the " + std::to_string(stoch.size()) +
                               " estimated entries");
  }
  if (!is_symmetric(cfg.V, 1e-8)) throw ConfigError("V", "not symmetric");
  for (std::size_t i = 0; i < total; ++i) {
    if (cfg.mask[i]) continue;
    for (std::size_t j = 0; j < total; ++j)
      if (cfg.V(i, j) != 0.0) throw ConfigError("V", "nonzero covariance for a known coefficient");
  }

  if (raw.blocks.count("theta_lower")) cfg.theta_lower = block_vector(raw, "theta_lower", k, true);
  if (raw.blocks.count("theta_upper")) cfg.theta_upper = block_vector(raw, "theta_upper", k, true);
  if (cfg.theta_lower.has_value() != cfg.theta_upper.has_value())
    throw ConfigError(cfg.theta_lower ? "theta_upper" : "theta_lower", "give both box bounds or neither");
  if (cfg.theta_lower)
    for (std::size_t j = 0; j < k; ++j)
      if (!((*cfg.theta_lower)[j] < (*cfg.theta_upper)[j])) throw ConfigError("theta_upper", "must exceed theta_lower");
  if (raw.blocks.count("theta_ineq_A")) {
    const std::size_t r = raw.blocks.at("theta_ineq_A").rows.size();
    const DenseMatrix a = block_matrix(raw, "theta_ineq_A", r, k, true);
    const DenseVector b = block_vector(raw, "theta_ineq_b", r, true);
    for (std::size_t i = 0; i < r; ++i) cfg.theta_inequalities.push_back({a.row_copy(i), b[i]});
  } else if (raw.blocks.count("theta_ineq_b")) {
    throw ConfigError("theta_ineq_A", "required with theta_ineq_b");
  }
  return cfg;
}

inline ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::path(path).parent_path());
}

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
  return buf;
}

inline void write_block(std::ostringstream& os, const std::string& key, const DenseMatrix& m) {
  os << key << " = [";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    os << (r == 0 ? " " : "\n  ");
    for (std::size_t c = 0; c < m.cols(); ++c) os << (c ? " " : "") << fmt17(m(r, c));
  }
  os << " ]\n";
}

inline void write_vector(std::ostringstream& os, const std::string& key, const DenseVector& v) {
  os << key << " = [";
  for (double x : v) os << " " << fmt17(x);
  os << " ]\n";
}

}  // namespace detail

/// Serializes a config; parse_config(write_config(cfg)) reproduces it exactly.
inline std::string write_config(const ProblemConfig& cfg) {
  using namespace detail;
  std::ostringstream os;
  os << "kind = " << (cfg.kind == ProgramKind::Lp ? "lp" : "qp") << "\n";
  os << "n = " << fmt17(cfg.n) << "\n";
  os << "alpha = " << fmt17(cfg.alpha) << "\n";
  os << "grid_step = " << fmt17(cfg.grid_step) << "\n";
  os << "nonneg = " << (cfg.nonneg ? "true" : "false") << "\n";
  os << "simplex = " << (cfg.simplex ? "true" : "false") << "\n";
  if (cfg.kind == ProgramKind::Lp) {
    write_block(os, "A", cfg.lp.A);
    write_vector(os, "b", cfg.lp.b);
    write_vector(os, "c", cfg.lp.c);
  } else {
    write_block(os, "Q", cfg.qp.Q);
    if (cfg.qp.ineq_rows() > 0) {
      write_block(os, "A_ineq", cfg.qp.A_ineq);
      write_vector(os, "b_ineq", cfg.qp.b_ineq);
    }
    if (cfg.qp.eq_rows() > 0) {
      write_block(os, "A_eq", cfg.qp.A_eq);
      write_vector(os, "b_eq", cfg.qp.b_eq);
    }
    write_vector(os, "c", cfg.qp.c);
  }
  for (const auto& bl : block_layout(cfg)) {
    if (bl.rows * bl.cols == 0) continue;
    DenseMatrix m(bl.rows, bl.cols);
    for (std::size_t r = 0; r < bl.rows; ++r)
      for (std::size_t c = 0; c < bl.cols; ++c) m(r, c) = cfg.mask[bl.offset + c * bl.rows + r] ? 1.0 : 0.0;
    if (bl.cols == 1) {
      write_vector(os, "mask_" + bl.name, m.col_copy(0));
    } else {
      write_block(os, "mask_" + bl.name, m);
    }
  }
  std::vector<std::size_t> stoch;
  for (std::size_t i = 0; i < cfg.mask.size(); ++i)
    if (cfg.mask[i]) stoch.push_back(i);
  write_block(os, "V", select(cfg.V, stoch, stoch));
  if (cfg.theta_lower) write_vector(os, "theta_lower", *cfg.theta_lower);
  if (cfg.theta_upper) write_vector(os, "theta_upper", *cfg.theta_upper);
  if (!cfg.theta_inequalities.empty()) {
    DenseMatrix a(cfg.theta_inequalities.size(), cfg.dim());
    DenseVector b(cfg.theta_inequalities.size());
    for (std::size_t r = 0; r < cfg.theta_inequalities.size(); ++r) {
      for (std::size_t j = 0; j < cfg.dim(); ++j) a(r, j) = cfg.theta_inequalities[r].a[j];
      b[r] = cfg.theta_inequalities[r].b;
    }
    write_block(os, "theta_ineq_A", a);
    write_vector(os, "theta_ineq_b", b);
  }
  return os.str();
}

/// The portfolio program expressed as a generic QP config.
inline ProblemConfig portfolio_config(const PortfolioInstance& inst, double alpha, double grid_step) {
  ProblemConfig cfg;
  cfg.kind = ProgramKind::Qp;
  cfg.qp = portfolio_problem(inst);
  cfg.n = inst.n;
  cfg.alpha = alpha;
  cfg.grid_step = grid_step;
  cfg.nonneg = true;
  cfg.simplex = true;
  const EstimatedCoefficients est = portfolio_estimates(inst);
  cfg.mask = est.stochastic_mask;
  cfg.V = est.V_hat;
  cfg.theta_lower = DenseVector(inst.assets(), 0.0);
  cfg.theta_upper = DenseVector(inst.assets(), 1.0);
  return cfg;
}

}  // namespace mpinfer
