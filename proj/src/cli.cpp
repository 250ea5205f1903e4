#include "hpbvp/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "hpbvp/conjugation_energy.hpp"
#include "hpbvp/errors.hpp"
#include "hpbvp/evans.hpp"
#include "hpbvp/parallel.hpp"
#include "hpbvp/subspaces.hpp"
#include "hpbvp/symbol.hpp"

namespace hpbvp::cli {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) fail(path + "." + key, "missing field");
  return j.at(key);
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

cd complex_entry(const json& j, const std::string& path) {
  if (j.is_number()) return {number(j, path), 0.0};
  if (j.is_array() && j.size() == 2) return {number(j[0], path + "[0]"), number(j[1], path + "[1]")};
  fail(path, "expected a number or [re, im]");
}

// Row-major nested arrays; entries real or [re, im].
CMat complex_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array()) fail(path + "[0]", "expected a row array");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  CMat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) fail(rp, "row length differs");
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = complex_entry(row[static_cast<size_t>(c)], rp + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

json complex_matrix_json(const CMat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(row);
  }
  return rows;
}

RVec real_vector(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  RVec v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

json vector_json(const RVec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// Matrix entry: number, or {"terms": [{"c": c, "pow": [...]}, ...]}.
Polynomial poly_entry(const json& j, int m, const std::string& path) {
  if (j.is_number()) return {Monomial{number(j, path), std::vector<int>(static_cast<size_t>(m), 0)}};
  const json& terms = need(j, "terms", path);
  if (!terms.is_array()) fail(path + ".terms", "expected an array");
  Polynomial p;
  for (size_t t = 0; t < terms.size(); ++t) {
    const std::string tp = path + ".terms[" + std::to_string(t) + "]";
    Monomial mono;
    mono.c = number(need(terms[t], "c", tp), tp + ".c");
    const json& pw = need(terms[t], "pow", tp);
    if (!pw.is_array() || static_cast<int>(pw.size()) != m) fail(tp + ".pow", "expected " + std::to_string(m) + " exponents");
    for (size_t k = 0; k < pw.size(); ++k) {
      const int e = integer(pw[k], tp + ".pow");
      if (e < 0) fail(tp + ".pow", "exponents must be >= 0");
      mono.pow.push_back(e);
    }
    p.push_back(mono);
  }
  return p;
}

PolyMatrix poly_matrix(const json& j, int n, int m, const std::string& path) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) fail(path, "expected " + std::to_string(n) + " rows");
  PolyMatrix pm;
  pm.rows = n;
  pm.cols = n;
  for (int r = 0; r < n; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<int>(row.size()) != n) fail(rp, "expected " + std::to_string(n) + " entries");
    for (int c = 0; c < n; ++c) pm.entries.push_back(poly_entry(row[static_cast<size_t>(c)], m, rp + "[" + std::to_string(c) + "]"));
  }
  return pm;
}

Axis parse_axis(const json& j, const std::string& path) {
  Axis a;
  if (j.is_array()) {
    for (size_t i = 0; i < j.size(); ++i) a.explicit_values.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
    if (a.explicit_values.empty()) fail(path, "grid count must be >= 1");
    a.count = static_cast<int>(a.explicit_values.size());
    return a;
  }
  if (!j.is_object()) fail(path, "expected an axis object or a list of values");
  if (j.contains("values")) return parse_axis(j.at("values"), path + ".values");
  a.min = number(need(j, "min", path), path + ".min");
  a.max = number(need(j, "max", path), path + ".max");
  a.count = integer(need(j, "count", path), path + ".count");
  if (a.count < 1) fail(path + ".count", "grid count must be >= 1");
  const std::string scale = j.value("scale", std::string("linear"));
  if (scale == "log") {
    a.log = true;
    if (!(a.min > 0.0 && a.max > 0.0)) fail(path, "log-scale axes need positive bounds");
  } else if (scale != "linear") {
    fail(path + ".scale", "expected 'linear' or 'log'");
  }
  return a;
}

std::vector<double> nonnegative_axis(const json& j, const std::string& path) {
  const auto v = parse_axis(j, path).values();
  for (double x : v) {
    if (x < 0.0) fail(path, "entries must be >= 0");
  }
  return v;
}

// Hyperspherical angles over (tau, eta, gamma); all angles in [0, pi]
// keep gamma >= 0.
Frequency direction_from_angles(const std::vector<double>& ang, int d) {
  std::vector<double> x(static_cast<size_t>(d) + 1, 0.0);
  double s = 1.0;
  for (int i = 0; i < d; ++i) {
    x[static_cast<size_t>(i)] = s * std::cos(ang[static_cast<size_t>(i)]);
    s *= std::sin(ang[static_cast<size_t>(i)]);
  }
  x[static_cast<size_t>(d)] = s;
  // cos(pi / 2), sin(pi) are not exactly zero.
  for (double& v : x) {
    if (std::abs(v) < 1e-15) v = 0.0;
  }
  Frequency f;
  f.tau = x[0];
  f.eta = RVec(d - 1);
  for (int i = 1; i < d; ++i) f.eta(i - 1) = x[static_cast<size_t>(i)];
  f.gamma = std::max(0.0, x[static_cast<size_t>(d)]);
  return f;
}

std::vector<Frequency> parse_directions(const json& j, int d, const std::string& path) {
  std::vector<Frequency> out;
  if (j.is_object()) {
    const json& angles = need(j, "angles", path);
    if (!angles.is_array() || static_cast<int>(angles.size()) != d) {
      fail(path + ".angles", "expected " + std::to_string(d) + " angle axes");
    }
    std::vector<std::vector<double>> axes;
    for (int i = 0; i < d; ++i) {
      const std::string ap = path + ".angles[" + std::to_string(i) + "]";
      axes.push_back(parse_axis(angles[static_cast<size_t>(i)], ap).values());
      for (double a : axes.back()) {
        if (a < 0.0 || a > std::numbers::pi + 1e-12) fail(ap, "angles must lie in [0, pi]");
      }
    }
    std::vector<size_t> idx(axes.size(), 0);
    for (;;) {
      std::vector<double> ang;
      for (size_t i = 0; i < axes.size(); ++i) ang.push_back(axes[i][idx[i]]);
      out.push_back(direction_from_angles(ang, d));
      size_t k = axes.size();
      while (k > 0) {
        --k;
        if (++idx[k] < axes[k].size()) break;
        idx[k] = 0;
        if (k == 0) return out;
      }
      if (axes.empty()) return out;
    }
  }
  if (!j.is_array() || j.empty()) fail(path, "grid count must be >= 1");
  for (size_t i = 0; i < j.size(); ++i) {
    const std::string dp = path + "[" + std::to_string(i) + "]";
    const RVec v = real_vector(j[i], dp);
    if (v.size() != d + 1) fail(dp, "expected (tau, eta..., gamma_check) with " + std::to_string(d + 1) + " entries");
    if (v(d) < 0.0) fail(dp, "gamma_check must be >= 0");
    if (v.norm() == 0.0) fail(dp, "direction must be nonzero");
    const RVec u = v / v.norm();
    Frequency f;
    f.tau = u(0);
    f.eta = u.segment(1, d - 1);
    f.gamma = u(d);
    out.push_back(f);
  }
  return out;
}

std::vector<RVec> parse_p_grid(const json& j, int m, const std::string& path) {
  std::vector<RVec> out;
  if (j.is_object()) {
    const json& axes_j = need(j, "axes", path);
    if (!axes_j.is_array() || static_cast<int>(axes_j.size()) != m) {
      fail(path + ".axes", "expected " + std::to_string(m) + " axes");
    }
    std::vector<std::vector<double>> axes;
    for (int i = 0; i < m; ++i) axes.push_back(parse_axis(axes_j[static_cast<size_t>(i)], path + ".axes[" + std::to_string(i) + "]").values());
    std::vector<size_t> idx(axes.size(), 0);
    for (;;) {
      RVec p(m);
      for (int i = 0; i < m; ++i) p(i) = axes[static_cast<size_t>(i)][idx[static_cast<size_t>(i)]];
      out.push_back(p);
      int k = m;
      bool done = true;
      while (k > 0) {
        --k;
        if (++idx[static_cast<size_t>(k)] < axes[static_cast<size_t>(k)].size()) {
          done = false;
          break;
        }
        idx[static_cast<size_t>(k)] = 0;
      }
      if (done) return out;
    }
  }
  if (!j.is_array() || j.empty()) fail(path, "grid count must be >= 1");
  for (size_t i = 0; i < j.size(); ++i) {
    const std::string pp = path + "[" + std::to_string(i) + "]";
    out.push_back(real_vector(j[i], pp));
    if (out.back().size() != m) fail(pp, "expected " + std::to_string(m) + " parameters");
  }
  return out;
}

Task parse_task(const std::string& s) {
  const std::vector<std::pair<std::string, Task>> names = {
      {"validate", Task::kValidate},       {"continuity", Task::kContinuity},
      {"certify", Task::kCertify},         {"evans-scan", Task::kEvansScan},
      {"factorization", Task::kFactorization}, {"conjugate", Task::kConjugate},
      {"energy-audit", Task::kEnergyAudit}};
  for (const auto& [n, t] : names) {
    if (n == s) return t;
  }
  fail("task", "unknown task '" + s + "'");
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json frequency_json(const Frequency& f) { return {{"tau", f.tau}, {"eta", vector_json(f.eta)}, {"gamma", f.gamma}}; }

Frequency frequency_from(const json& j, const std::string& path) {
  Frequency f;
  f.tau = number(need(j, "tau", path), path + ".tau");
  f.eta = real_vector(need(j, "eta", path), path + ".eta");
  f.gamma = number(need(j, "gamma", path), path + ".gamma");
  return f;
}

// Non-finite doubles serialise as strings so that the file stays valid.
json real_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double real_from(const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    fail(path, "unexpected string");
  }
  return number(j, path);
}

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  void row(const std::vector<std::string>& cells) { rows_.push_back(cells); }

  void write(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::kInvalidInput, "cannot write " + path);
    auto line = [&](const std::vector<std::string>& cells) {
      for (size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_escape(cells[i]);
      os << "\n";
    };
    line(header_);
    for (const auto& r : rows_) line(r);
  }

  size_t size() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string num(double v) { return format_number(v); }
std::string num(int v) { return std::to_string(v); }
std::string num(size_t v) { return std::to_string(v); }
std::string flag(bool b) { return b ? "1" : "0"; }

std::vector<std::string> p_header(int m) {
  std::vector<std::string> h;
  for (int i = 0; i < m; ++i) h.push_back("p" + std::to_string(i));
  return h;
}

std::vector<std::string> dir_header(int d) {
  std::vector<std::string> h = {"tau_check"};
  for (int i = 1; i < d; ++i) h.push_back("eta_check" + std::to_string(i));
  h.push_back("gamma_check");
  return h;
}

void append(std::vector<std::string>& a, const std::vector<std::string>& b) { a.insert(a.end(), b.begin(), b.end()); }

std::vector<std::string> p_cells(const RVec& p) {
  std::vector<std::string> c;
  for (Eigen::Index i = 0; i < p.size(); ++i) c.push_back(num(p(i)));
  return c;
}

std::vector<std::string> dir_cells(const Frequency& f) {
  std::vector<std::string> c = {num(f.tau)};
  for (Eigen::Index i = 0; i < f.eta.size(); ++i) c.push_back(num(f.eta(i)));
  c.push_back(num(f.gamma));
  return c;
}

json tolerances_json(const Tolerances& t) {
  return {{"hermiticity_rel", t.hermiticity_rel}, {"pass_tol", t.pass_tol}, {"jitter", t.jitter},
          {"gap_max", t.gap_max}, {"residual_factor", t.residual_factor},
          {"factorization_rho_max", t.factorization_rho_max}, {"residual_max", t.residual_max},
          {"slack_min", t.slack_min}, {"identity_max", t.identity_max}, {"threshold", t.threshold}};
}

struct TaskOutput {
  Table table{{}};
  bool pass = false;
  json summary = json::object();
  json failure = nullptr;
  std::optional<json> certificate;
};

TaskOutput run_validate(const RunConfig& c) {
  std::vector<Sample> samples;
  const auto base = default_samples(c.system, c.xi_directions);
  std::vector<RVec> xis;
  for (const auto& s : base) {
    if (std::none_of(xis.begin(), xis.end(), [&](const RVec& x) { return (x - s.xi).norm() == 0.0; })) xis.push_back(s.xi);
  }
  for (const auto& p : c.p_grid) {
    for (const auto& xi : xis) samples.push_back({p, xi});
  }
  const HypothesisReport rep = validate_hypotheses(c.system, samples);
  TaskOutput out;
  out.table = Table({"hypothesis", "pass", "value", "witness_p", "witness_xi", "detail"});
  auto vec_text = [](const RVec& v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_number(v(i));
    return s;
  };
  std::string mult;
  for (size_t i = 0; i < rep.h1_multiplicities.size(); ++i) mult += (i ? " " : "") + std::to_string(rep.h1_multiplicities[i]);
  out.table.row({"H1", flag(rep.h1_pass), num(rep.h1_max_imag), vec_text(rep.h1_p), vec_text(rep.h1_xi),
                 rep.h1_reason.empty() ? "multiplicities " + mult : rep.h1_reason});
  out.table.row({"H2", flag(rep.h2_pass), num(rep.h2_constant), vec_text(rep.h2_p), vec_text(rep.h2_xi), ""});
  out.table.row({"H3", flag(rep.h3_pass), num(rep.h3_min_det), vec_text(rep.h3_p), "", ""});
  out.pass = rep.all_pass();
  out.summary = {{"samples", samples.size()}, {"h1_pass", rep.h1_pass}, {"h2_pass", rep.h2_pass},
                 {"h3_pass", rep.h3_pass}, {"h2_constant", rep.h2_constant}, {"scope", rep.scope}};
  if (!out.pass) {
    out.failure = {{"h1_p", vector_json(rep.h1_p)}, {"h1_xi", vector_json(rep.h1_xi)}, {"reason", rep.h1_reason},
                   {"h3_p", vector_json(rep.h3_p)}};
  }
  return out;
}

TaskOutput run_continuity(const RunConfig& c, int workers) {
  TaskOutput out;
  std::vector<std::string> h = {"p_index"};
  append(h, p_header(c.system.m()));
  h.push_back("direction_index");
  append(h, dir_header(c.system.d()));
  append(h, {"rho", "gap", "stable_dim", "ok", "error"});
  out.table = Table(h);
  out.pass = true;
  double worst_final = 0.0;
  json sweeps = json::array();
  for (size_t ip = 0; ip < c.p_grid.size(); ++ip) {
    for (size_t id = 0; id < c.directions.size(); ++id) {
      const auto rows = continuity_sweep(c.system, c.p_grid[ip], c.directions[id], c.rho, workers);
      bool ok = true, monotone = true;
      for (size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        std::vector<std::string> cells = {num(ip)};
        append(cells, p_cells(c.p_grid[ip]));
        cells.push_back(num(id));
        append(cells, dir_cells(c.directions[id]));
        append(cells, {num(r.rho), num(r.gap), num(static_cast<int>(r.stable_dim)), flag(r.ok), r.error});
        out.table.row(cells);
        ok = ok && r.ok;
        // Gaps shrink as rho decreases along the list order.
        if (k > 0 && r.ok && rows[k - 1].ok) {
          const bool descending = r.rho < rows[k - 1].rho;
          const double prev = rows[k - 1].gap;
          if (descending ? r.gap > prev + c.tol.jitter : r.gap < prev - c.tol.jitter) monotone = false;
        }
      }
      const auto smallest = std::min_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.rho < b.rho; });
      const double final_gap = smallest == rows.end() ? 1.0 : smallest->gap;
      worst_final = std::max(worst_final, final_gap);
      const bool final_ok = c.tol.gap_max <= 0.0 || final_gap <= c.tol.gap_max;
      const double slope = rows.size() >= 2 ? loglog_slope(rows) : 0.0;
      sweeps.push_back({{"p_index", ip}, {"direction_index", id}, {"final_gap", final_gap}, {"monotone", monotone},
                        {"slope", real_json(slope)}, {"ok", ok}});
      const bool pass = ok && monotone && final_ok;
      if (!pass && out.pass) {
        out.failure = {{"p", vector_json(c.p_grid[ip])}, {"direction", frequency_json(c.directions[id])},
                       {"reason", !ok ? "row failure" : !monotone ? "gap not monotone" : "final gap above gap_max"},
                       {"final_gap", final_gap}};
      }
      out.pass = out.pass && pass;
    }
  }
  out.summary = {{"sweeps", sweeps}, {"max_final_gap", worst_final}};
  return out;
}

TaskOutput run_certify(const RunConfig& c, const RunOptions& o) {
  const RVec& p = c.p_grid.front();
  const Frequency& base = c.directions.front();
  const auto grid = product_grid(p, base, c.rho, c.gamma_check.empty() ? std::vector<double>{0.0} : c.gamma_check);
  CertificateOptions co;
  co.hermiticity_rel = c.tol.hermiticity_rel;
  co.pass_tol = c.tol.pass_tol;
  co.witness_samples = c.witness_samples;
  co.seed = o.seed;
  co.workers = o.workers;
  co.throw_on_failure = false;
  const auto cert = assemble_symmetrizer(c.system, p, base, c.kappa, grid, co);
  TaskOutput out;
  out.table = Table({"rho", "gamma_check", "hermiticity", "margin_hermitian", "margin_cone", "margin_dissipation",
                     "witness", "pass"});
  for (size_t i = 0; i < grid.size(); ++i) {
    const auto& m = cert.margins[i];
    out.table.row({num(grid[i].rho), num(grid[i].zcheck.gamma), num(m.hermiticity), num(m.margin_hermitian),
                   num(m.margin_cone), num(m.margin_dissipation), num(m.witness), flag(m.pass)});
  }
  double mh = std::numeric_limits<double>::infinity(), mc = mh, md = mh, mw = 0.0;
  for (const auto& m : cert.margins) {
    mh = std::min(mh, m.margin_hermitian);
    mc = std::min(mc, m.margin_cone);
    md = std::min(md, m.margin_dissipation);
    mw = std::max(mw, m.witness);
  }
  out.pass = cert.pass;
  out.summary = {{"kappa", cert.kappa}, {"kappa_eff", cert.kappa_eff}, {"kappa_upper", real_json(cert.kappa_upper)},
                 {"c", cert.c}, {"min_margin_hermitian", mh}, {"min_margin_cone", mc},
                 {"min_margin_dissipation", md}, {"max_witness", mw}};
  if (!cert.pass) out.failure = {{"reason", cert.failure}};
  out.certificate = certificate_to_json(cert, c.tol.pass_tol);
  return out;
}

TaskOutput run_evans_scan(const RunConfig& c, int workers) {
  const auto scan = uniform_stability_scan(c.system, c.boundary, c.p_grid, c.directions, c.rho, c.tol.threshold, workers);
  TaskOutput out;
  std::vector<std::string> h = {"p_index"};
  append(h, p_header(c.system.m()));
  h.push_back("direction_index");
  append(h, dir_header(c.system.d()));
  append(h, {"rho", "evans_modulus", "ok", "error"});
  out.table = Table(h);
  for (const auto& r : scan.rows) {
    std::vector<std::string> cells = {num(r.p_index)};
    append(cells, p_cells(c.p_grid[r.p_index]));
    cells.push_back(num(r.z_index));
    append(cells, dir_cells(c.directions[r.z_index]));
    append(cells, {num(c.rho[r.rho_index]), num(r.modulus), flag(r.ok), r.error});
    out.table.row(cells);
  }
  out.pass = scan.pass;
  out.summary = {{"min_modulus", real_json(scan.min_modulus)}, {"threshold", scan.threshold},
                 {"failed_rows", scan.failures}, {"argmin_row", scan.argmin}};
  if (!scan.pass && scan.argmin < scan.rows.size()) {
    const auto& r = scan.rows[scan.argmin];
    out.failure = {{"p", vector_json(c.p_grid[r.p_index])}, {"direction", frequency_json(c.directions[r.z_index])},
                   {"rho", c.rho[r.rho_index]}, {"modulus", real_json(r.modulus)}};
  }
  return out;
}

TaskOutput run_factorization(const RunConfig& c, int workers) {
  TaskOutput out;
  std::vector<std::string> h = {"p_index"};
  append(h, p_header(c.system.m()));
  h.push_back("direction_index");
  append(h, dir_header(c.system.d()));
  append(h, {"rho", "evans_modulus", "residual", "bound", "ok", "error"});
  out.table = Table(h);
  out.pass = true;
  json diags = json::array();
  for (size_t ip = 0; ip < c.p_grid.size(); ++ip) {
    for (size_t id = 0; id < c.directions.size(); ++id) {
      std::vector<double> rhos = c.rho;
      std::sort(rhos.begin(), rhos.end(), std::greater<>());
      const auto fd = factorization_sweep(c.system, c.boundary, c.p_grid[ip], c.directions[id], rhos, workers);
      bool pass = !fd.indeterminate;
      for (const auto& r : fd.rho_table) {
        const double bound = c.tol.residual_factor * r.rho;
        std::vector<std::string> cells = {num(ip)};
        append(cells, p_cells(c.p_grid[ip]));
        cells.push_back(num(id));
        append(cells, dir_cells(c.directions[id]));
        append(cells, {num(r.rho), num(r.modulus), num(r.residual), num(bound), flag(r.ok), r.error});
        out.table.row(cells);
        if (r.ok && r.rho <= c.tol.factorization_rho_max && r.residual > bound) pass = false;
      }
      diags.push_back({{"p_index", ip}, {"direction_index", id}, {"delta_lim", fd.delta_lim},
                       {"beta_estimate", fd.beta_estimate}, {"residual", fd.residual},
                       {"indeterminate", fd.indeterminate}});
      if (!pass && out.pass) {
        out.failure = {{"p", vector_json(c.p_grid[ip])}, {"direction", frequency_json(c.directions[id])},
                       {"reason", fd.indeterminate ? "limit determinant vanishes" : "residual above factor * rho"}};
      }
      out.pass = out.pass && pass;
    }
  }
  out.summary = {{"diagnostics", diags}};
  return out;
}

TaskOutput run_conjugate(const RunConfig& c) {
  const ConjugateSpec& cs = c.conjugate;
  const RVec& p = c.p_grid.front();
  const Frequency zeta = c.directions.front().scaled(c.rho.front());
  const CMat ginf = cs.G_inf ? *cs.G_inf : assemble_full_symbol(c.system, p, zeta).G;
  if (cs.perturbation.rows() != ginf.rows() || cs.perturbation.cols() != ginf.cols()) {
    throw ConfigError("conjugate.perturbation: shape must match G_inf");
  }
  const CMat pert = cs.perturbation;
  VariableSymbol vs;
  vs.G_inf = [ginf](const Frequency&) { return ginf; };
  vs.theta = cs.theta;
  vs.G_of_x = [ginf, pert, th = cs.theta](double x, const Frequency&) { return CMat(ginf + std::exp(-th * x) * pert); };
  vs.C_decay = cs.C_decay > 0.0 ? cs.C_decay : std::max(spectral_norm(pert), 1e-300);
  const double x_max = cs.x_max > 0.0 ? cs.x_max : 25.0 / cs.theta;
  const Conjugator conj = build_conjugator(vs, zeta, x_max, cs.grid_step);
  TaskOutput out;
  out.table = Table({"x", "w_minus_id", "cond_w"});
  const CMat id = CMat::Identity(ginf.rows(), ginf.cols());
  for (size_t i = 0; i < conj.xs.size(); ++i) {
    out.table.row({num(conj.xs[i]), num(spectral_norm(conj.W[i] - id)), num(condition_number(conj.W[i]))});
  }
  out.pass = conj.residual <= c.tol.residual_max && conj.theta1 > 0.0;
  out.summary = {{"theta1", real_json(conj.theta1)}, {"cond_bound", conj.cond_bound}, {"residual", conj.residual},
                 {"W0", complex_matrix_json(conj.W.front())}};
  if (!cs.G_inf) {
    const CMat gamma = c.boundary.gamma_matrix(p, zeta);
    if (gamma.cols() == ginf.rows()) out.summary["gamma1"] = complex_matrix_json(transform_boundary(gamma, conj));
  }
  if (!out.pass) out.failure = {{"reason", "residual above residual_max"}, {"residual", conj.residual}};
  return out;
}

TaskOutput run_energy(const RunConfig& c, const RunOptions& o) {
  const RVec& p = c.p_grid.front();
  const Frequency& base = c.directions.front();
  const Frequency zc = sphere_point(base.tau, base.eta, c.gamma_check.empty() ? base.gamma : c.gamma_check.front());
  const double rho = c.rho.front();
  const SymmetrizerFamily fam(c.system, p, base, c.kappa);
  const CMat s = fam.S(p, zc, rho);
  const CMat g = assemble_full_symbol(c.system, p, zc.scaled(rho)).G;
  const CMat gamma = c.boundary.gamma_matrix(p, zc.scaled(rho));
  const auto ma = manufactured_energy_audit(s, g, gamma, c.trials, o.seed);
  TaskOutput out;
  out.table = Table({"trial", "lhs", "rhs", "slack", "identity_residual", "hypotheses_hold", "failed"});
  for (size_t i = 0; i < ma.audits.size(); ++i) {
    const auto& a = ma.audits[i];
    out.table.row({num(i), num(a.lhs), num(a.rhs), num(a.slack), num(a.identity_residual), flag(a.hypotheses_hold), a.failed});
  }
  out.pass = ma.hypotheses_hold && ma.min_slack >= c.tol.slack_min && ma.max_identity_residual <= c.tol.identity_max;
  out.summary = {{"rho", rho}, {"gamma_check", zc.gamma}, {"C0", ma.constants.C0}, {"lambda", ma.constants.lambda},
                 {"delta", ma.constants.delta}, {"C1", ma.constants.C1}, {"min_slack", real_json(ma.min_slack)},
                 {"max_identity_residual", ma.max_identity_residual}, {"hypotheses_hold", ma.hypotheses_hold}};
  if (!out.pass) {
    out.failure = {{"reason", ma.hypotheses_hold ? "slack or identity residual out of tolerance" : ma.audits.front().failed}};
  }
  return out;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

const char* to_string(Task t) {
  switch (t) {
    case Task::kValidate: return "validate";
    case Task::kContinuity: return "continuity";
    case Task::kCertify: return "certify";
    case Task::kEvansScan: return "evans-scan";
    case Task::kFactorization: return "factorization";
    case Task::kConjugate: return "conjugate";
    case Task::kEnergyAudit: return "energy-audit";
  }
  return "?";
}

std::vector<double> Axis::values() const {
  if (!explicit_values.empty()) return explicit_values;
  std::vector<double> v;
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    v.push_back(log ? std::exp(std::log(min) + t * (std::log(max) - std::log(min))) : min + t * (max - min));
  }
  // Pin the endpoints exactly.
  v.front() = min;
  if (count > 1) v.back() = max;
  return v;
}

std::vector<std::string> tolerance_keys() {
  return {"hermiticity_rel", "pass_tol", "jitter", "gap_max", "residual_factor", "factorization_rho_max",
          "residual_max", "slack_min", "identity_max", "threshold"};
}

void set_tolerance(Tolerances& t, const std::string& key, double value) {
  if (key == "hermiticity_rel") t.hermiticity_rel = value;
  else if (key == "pass_tol") t.pass_tol = value;
  else if (key == "jitter") t.jitter = value;
  else if (key == "gap_max") t.gap_max = value;
  else if (key == "residual_factor") t.residual_factor = value;
  else if (key == "factorization_rho_max") t.factorization_rho_max = value;
  else if (key == "residual_max") t.residual_max = value;
  else if (key == "slack_min") t.slack_min = value;
  else if (key == "identity_max") t.identity_max = value;
  else if (key == "threshold") t.threshold = value;
  else throw ConfigError("tolerances." + key + ": unknown tolerance");
}

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) fail("<root>", "expected an object");
  if (doc.contains("schema") && doc.at("schema") != kConfigSchema) {
    fail("schema", std::string("expected '") + kConfigSchema + "'");
  }
  RunConfig c;
  c.raw = doc;
  const json& task = need(doc, "task", "<root>");
  if (!task.is_string()) fail("task", "expected a string");
  c.task = parse_task(task.get<std::string>());

  const json& sys = need(doc, "system", "<root>");
  RVec default_p;
  if (sys.is_string() || (sys.is_object() && sys.contains("catalog"))) {
    const std::string name = sys.is_string() ? sys.get<std::string>() : sys.at("catalog").get<std::string>();
    CatalogEntry e;
    try {
      e = builtin_example(name);
    } catch (const Error&) {
      fail("system", "unknown catalog system '" + name + "'");
    }
    c.system = e.system;
    c.boundary = e.boundary;
    c.system_label = name;
    default_p = e.default_p;
  } else if (sys.is_object()) {
    const std::string name = sys.value("name", std::string("inline"));
    const int n = integer(need(sys, "N", "system"), "system.N");
    const int d = integer(need(sys, "d", "system"), "system.d");
    const int m = sys.contains("M") ? integer(sys.at("M"), "system.M") : 0;
    if (n < 1 || d < 1 || m < 0) fail("system", "need N >= 1, d >= 1, M >= 0");
    const json& a = need(sys, "A", "system");
    const json& b = need(sys, "B", "system");
    if (!a.is_array() || static_cast<int>(a.size()) != d) fail("system.A", "expected d matrices");
    if (!b.is_array() || static_cast<int>(b.size()) != d * d) fail("system.B", "expected d*d matrices (row-major in j, k)");
    std::vector<PolyMatrix> am, bm;
    for (int j = 0; j < d; ++j) am.push_back(poly_matrix(a[static_cast<size_t>(j)], n, m, "system.A[" + std::to_string(j) + "]"));
    for (int j = 0; j < d * d; ++j) bm.push_back(poly_matrix(b[static_cast<size_t>(j)], n, m, "system.B[" + std::to_string(j) + "]"));
    ParamDomain dom;
    if (sys.contains("domain")) {
      const json& boxes = sys.at("domain");
      if (!boxes.is_array() || boxes.empty()) fail("system.domain", "expected a list of boxes");
      for (size_t i = 0; i < boxes.size(); ++i) {
        const std::string bp = "system.domain[" + std::to_string(i) + "]";
        ParamBox box{real_vector(need(boxes[i], "lo", bp), bp + ".lo"), real_vector(need(boxes[i], "hi", bp), bp + ".hi")};
        if (box.lo.size() != m || box.hi.size() != m) fail(bp, "box dimension must equal M");
        dom.boxes.push_back(box);
      }
    } else if (m == 0) {
      dom.boxes.push_back({RVec(0), RVec(0)});
    } else {
      fail("system.domain", "required when M > 0");
    }
    c.system = SystemDefinition::from_polynomials(name, n, d, m, am, bm, dom);
    c.system_label = name;
    default_p = m == 0 ? RVec(0) : dom.boxes.front().lo;
  } else {
    fail("system", "expected a catalog name or an inline definition");
  }

  if (doc.contains("boundary")) {
    const json& bj = doc.at("boundary");
    const CMat g = complex_matrix(bj.is_object() ? need(bj, "gamma", "boundary") : bj, "boundary.gamma");
    if (g.rows() != c.system.n() || g.cols() != 2 * c.system.n()) fail("boundary.gamma", "expected an N x 2N matrix");
    if (numerical_rank(g, 1e-12 * (1.0 + spectral_norm(g))) != c.system.n()) fail("boundary.gamma", "rank must be N");
    c.boundary = BoundaryData::constant(g);
  } else if (!sys.is_string() && !(sys.is_object() && sys.contains("catalog"))) {
    CMat g = CMat::Zero(c.system.n(), 2 * c.system.n());
    g.leftCols(c.system.n()) = CMat::Identity(c.system.n(), c.system.n());
    c.boundary = BoundaryData::constant(g);  // Dirichlet
  }

  const json grids = doc.value("grids", json::object());
  if (!grids.is_object()) fail("grids", "expected an object");
  c.p_grid = grids.contains("p") ? parse_p_grid(grids.at("p"), c.system.m(), "grids.p") : std::vector<RVec>{default_p};
  for (size_t i = 0; i < c.p_grid.size(); ++i) {
    if (!c.system.domain().contains(c.p_grid[i])) fail("grids.p[" + std::to_string(i) + "]", "outside the parameter domain");
  }
  if (grids.contains("directions")) {
    c.directions = parse_directions(grids.at("directions"), c.system.d(), "grids.directions");
  } else if (c.task != Task::kValidate && c.task != Task::kConjugate) {
    fail("grids.directions", "missing field");
  }
  if (grids.contains("rho")) c.rho = nonnegative_axis(grids.at("rho"), "grids.rho");
  if (grids.contains("gamma_check")) c.gamma_check = nonnegative_axis(grids.at("gamma_check"), "grids.gamma_check");
  const bool needs_rho = c.task == Task::kContinuity || c.task == Task::kCertify || c.task == Task::kEvansScan ||
                         c.task == Task::kFactorization || c.task == Task::kEnergyAudit;
  if (needs_rho && c.rho.empty()) fail("grids.rho", "missing field");
  if (c.task == Task::kConjugate && c.directions.empty()) c.directions = {Frequency{0.0, RVec::Zero(c.system.d() - 1), 1.0}};
  if (c.task == Task::kConjugate && c.rho.empty()) c.rho = {1.0};
  if (c.task == Task::kEnergyAudit && c.rho.front() <= 0.0) fail("grids.rho", "energy audit needs rho > 0");

  const json k = doc.value("constants", json::object());
  if (k.contains("kappa")) c.kappa = number(k.at("kappa"), "constants.kappa");
  if (k.contains("witness_samples")) c.witness_samples = integer(k.at("witness_samples"), "constants.witness_samples");
  if (k.contains("trials")) c.trials = integer(k.at("trials"), "constants.trials");
  if (k.contains("xi_directions")) c.xi_directions = integer(k.at("xi_directions"), "constants.xi_directions");
  if (k.contains("threshold")) c.tol.threshold = number(k.at("threshold"), "constants.threshold");
  if (!(c.kappa > 1.0)) fail("constants.kappa", "kappa must exceed 1");
  if (c.witness_samples < 1 || c.trials < 1 || c.xi_directions < 1) fail("constants", "counts must be >= 1");

  if (doc.contains("tolerances")) {
    const json& t = doc.at("tolerances");
    if (!t.is_object()) fail("tolerances", "expected an object");
    for (auto it = t.begin(); it != t.end(); ++it) set_tolerance(c.tol, it.key(), number(it.value(), "tolerances." + it.key()));
  }

  if (c.task == Task::kConjugate) {
    const json& cj = need(doc, "conjugate", "<root>");
    if (cj.contains("G_inf")) c.conjugate.G_inf = complex_matrix(cj.at("G_inf"), "conjugate.G_inf");
    c.conjugate.perturbation = complex_matrix(need(cj, "perturbation", "conjugate"), "conjugate.perturbation");
    c.conjugate.theta = number(need(cj, "theta", "conjugate"), "conjugate.theta");
    if (!(c.conjugate.theta > 0.0)) fail("conjugate.theta", "must be positive");
    if (cj.contains("C_decay")) c.conjugate.C_decay = number(cj.at("C_decay"), "conjugate.C_decay");
    if (cj.contains("x_max")) c.conjugate.x_max = number(cj.at("x_max"), "conjugate.x_max");
    if (cj.contains("grid_step")) c.conjugate.grid_step = number(cj.at("grid_step"), "conjugate.grid_step");
    if (c.conjugate.G_inf && c.conjugate.G_inf->rows() != c.conjugate.G_inf->cols()) fail("conjugate.G_inf", "must be square");
  }

  if (doc.contains("output")) {
    const json& oj = doc.at("output");
    if (oj.contains("prefix")) {
      if (!oj.at("prefix").is_string()) fail("output.prefix", "expected a string");
      c.prefix = oj.at("prefix").get<std::string>();
    }
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError(path + ": cannot open");
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string text = ss.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    size_t line = 1, col = 1;
    for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": syntax error");
  }
  return parse_config(doc);
}

RunResult run(const RunConfig& config, const RunOptions& opts) {
  RunConfig c = config;
  for (const auto& [k, v] : opts.tolerance_overrides) set_tolerance(c.tol, k, v);
  const int workers = resolve_workers(opts.workers);
  namespace fs = std::filesystem;
  fs::create_directories(opts.output_dir);
  RunResult res;
  res.table_path = (fs::path(opts.output_dir) / (c.prefix + "_" + to_string(c.task) + ".csv")).string();
  res.manifest_path = (fs::path(opts.output_dir) / (c.prefix + "_manifest.json")).string();

  TaskOutput out;
  json error = nullptr;
  try {
    switch (c.task) {
      case Task::kValidate: out = run_validate(c); break;
      case Task::kContinuity: out = run_continuity(c, workers); break;
      case Task::kCertify: out = run_certify(c, opts); break;
      case Task::kEvansScan: out = run_evans_scan(c, workers); break;
      case Task::kFactorization: out = run_factorization(c, workers); break;
      case Task::kConjugate: out = run_conjugate(c); break;
      case Task::kEnergyAudit: out = run_energy(c, opts); break;
    }
  } catch (const Error& e) {
    out = TaskOutput{};
    out.table = Table({"error"});
    out.table.row({e.what()});
    out.pass = false;
    error = e.what();
    out.failure = {{"reason", e.what()}};
  }
  out.table.write(res.table_path);
  if (out.certificate) {
    res.certificate_path = (fs::path(opts.output_dir) / (c.prefix + "_certificate.json")).string();
    std::ofstream cs(res.certificate_path, std::ios::binary);
    cs << out.certificate->dump(2) << "\n";
  }
  res.status = out.pass ? 0 : 1;
  res.summary = out.summary;

  json manifest = {{"schema", kManifestSchema},
                   {"task", to_string(c.task)},
                   {"system", c.system_label},
                   {"config_hash", hex64(fnv1a(c.raw.dump()))},
                   {"config", c.raw},
                   {"tolerances", tolerances_json(c.tol)},
                   {"seed", opts.seed},
                   {"workers", workers},
                   {"table", fs::path(res.table_path).filename().string()},
                   {"rows", out.table.size()},
                   {"summary", out.summary},
                   {"pass", out.pass},
                   {"status", res.status},
                   {"failure", out.failure},
                   {"error", error},
                   {"timestamp", timestamp()}};
  if (!res.certificate_path.empty()) manifest["certificate"] = fs::path(res.certificate_path).filename().string();
  std::ofstream ms(res.manifest_path, std::ios::binary);
  ms << manifest.dump(2) << "\n";
  return res;
}

json certificate_to_json(const SymmetrizerCertificate& cert, double pass_tol) {
  json grid = json::array(), s_vals = json::array(), g_vals = json::array(), margins = json::array(),
       blocks = json::array();
  for (size_t i = 0; i < cert.grid.size(); ++i) {
    grid.push_back({{"p", vector_json(cert.grid[i].p)}, {"zcheck", frequency_json(cert.grid[i].zcheck)},
                    {"rho", cert.grid[i].rho}});
    s_vals.push_back(complex_matrix_json(cert.S_values[i]));
    g_vals.push_back(complex_matrix_json(cert.G_values[i]));
    const auto& m = cert.margins[i];
    margins.push_back({{"hermiticity", m.hermiticity}, {"margin_hermitian", m.margin_hermitian},
                       {"margin_cone", m.margin_cone}, {"margin_dissipation", m.margin_dissipation},
                       {"witness", real_json(m.witness)}, {"pass", m.pass}});
  }
  for (const auto& b : cert.blocks) {
    blocks.push_back({{"kind", b.kind}, {"dim", b.dim}, {"n_minus", b.n_minus}, {"nu", b.nu}, {"beta", b.beta},
                      {"q_dot", b.q_dot}, {"branch", b.branch}});
  }
  return {{"schema", kCertificateSchema},
          {"system", cert.system_name},
          {"base_p", vector_json(cert.base_p)},
          {"base", frequency_json(cert.base)},
          {"kappa", cert.kappa},
          {"kappa_eff", cert.kappa_eff},
          {"kappa_upper", real_json(cert.kappa_upper)},
          {"c", cert.c},
          {"delta_scale", cert.delta_scale},
          {"hermiticity_rel", cert.hermiticity_tol},
          {"pass_tol", pass_tol},
          {"E_minus", complex_matrix_json(cert.E_minus_ref.basis)},
          {"E_plus", complex_matrix_json(cert.E_plus_ref.basis)},
          {"dim_parabolic_minus", cert.dim_parabolic_minus},
          {"blocks", blocks},
          {"grid", grid},
          {"S", s_vals},
          {"G", g_vals},
          {"margins", margins},
          {"pass", cert.pass},
          {"failure", cert.failure}};
}

SymmetrizerCertificate certificate_from_json(const json& doc) {
  if (!doc.is_object()) fail("<root>", "expected an object");
  if (!doc.contains("schema") || doc.at("schema") != kCertificateSchema) {
    fail("schema", std::string("expected '") + kCertificateSchema + "'");
  }
  SymmetrizerCertificate c;
  try {
    c.system_name = need(doc, "system", "<root>").get<std::string>();
  } catch (const json::exception&) {
    fail("system", "expected a string");
  }
  c.base_p = real_vector(need(doc, "base_p", "<root>"), "base_p");
  c.base = frequency_from(need(doc, "base", "<root>"), "base");
  c.kappa = number(need(doc, "kappa", "<root>"), "kappa");
  c.kappa_eff = number(need(doc, "kappa_eff", "<root>"), "kappa_eff");
  c.kappa_upper = real_from(need(doc, "kappa_upper", "<root>"), "kappa_upper");
  c.c = number(need(doc, "c", "<root>"), "c");
  c.delta_scale = number(need(doc, "delta_scale", "<root>"), "delta_scale");
  c.hermiticity_tol = number(need(doc, "hermiticity_rel", "<root>"), "hermiticity_rel");
  const CMat em = complex_matrix(need(doc, "E_minus", "<root>"), "E_minus");
  const CMat ep = complex_matrix(need(doc, "E_plus", "<root>"), "E_plus");
  if (em.rows() != ep.rows() || em.cols() + ep.cols() != em.rows()) fail("E_minus", "E_minus and E_plus must be complementary");
  c.E_minus_ref = Subspace{em, em.rows()};
  c.E_plus_ref = Subspace{ep, ep.rows()};
  const json& grid = need(doc, "grid", "<root>");
  const json& s = need(doc, "S", "<root>");
  const json& g = need(doc, "G", "<root>");
  if (!grid.is_array() || !s.is_array() || !g.is_array() || grid.size() != s.size() || grid.size() != g.size()) {
    fail("grid", "grid, S and G must be arrays of equal length");
  }
  for (size_t i = 0; i < grid.size(); ++i) {
    const std::string gp = "grid[" + std::to_string(i) + "]";
    c.grid.push_back({real_vector(need(grid[i], "p", gp), gp + ".p"), frequency_from(need(grid[i], "zcheck", gp), gp + ".zcheck"),
                      number(need(grid[i], "rho", gp), gp + ".rho")});
    c.S_values.push_back(complex_matrix(s[i], "S[" + std::to_string(i) + "]"));
    c.G_values.push_back(complex_matrix(g[i], "G[" + std::to_string(i) + "]"));
    if (c.S_values.back().rows() != em.rows() || c.S_values.back().cols() != em.rows() ||
        c.G_values.back().rows() != em.rows() || c.G_values.back().cols() != em.rows()) {
      fail(gp, "S and G must be square of the ambient dimension");
    }
  }
  if (doc.contains("pass") && doc.at("pass").is_boolean()) c.pass = doc.at("pass").get<bool>();
  return c;
}

ReplayResult replay_certificate(const json& doc) {
  const SymmetrizerCertificate c = certificate_from_json(doc);
  constexpr double kReplayTol = -1e-10;
  ReplayResult r;
  r.margins = verify_symmetrizer(c.S_values, c.G_values, c.E_minus_ref, c.E_plus_ref, c.kappa, c.c, c.grid,
                                 c.hermiticity_tol, kReplayTol);
  auto report = [&](const char* name, size_t i, double m) {
    std::ostringstream os;
    os << name << " at grid point " << i << " (rho=" << format_number(c.grid[i].rho)
       << ", gamma_check=" << format_number(c.grid[i].zcheck.gamma) << "): margin " << format_number(m);
    r.failures.push_back(os.str());
  };
  for (size_t i = 0; i < r.margins.size(); ++i) {
    const auto& m = r.margins[i];
    if (m.margin_hermitian < 0.0) report("hermiticity", i, m.margin_hermitian);
    if (m.margin_cone < scaled_tol(kReplayTol, c.S_values[i], CMat())) report("cone", i, m.margin_cone);
    if (m.margin_dissipation < scaled_tol(kReplayTol, c.S_values[i], c.G_values[i])) {
      report("dissipation", i, m.margin_dissipation);
    }
  }
  r.pass = r.failures.empty();
  return r;
}

ReplayResult replay_certificate_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError(path + ": cannot open");
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": corrupted certificate (" + std::string(e.what()) + ")");
  }
  return replay_certificate(doc);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace hpbvp::cli
