#include "hpbvp/system_model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hpbvp/errors.hpp"

namespace hpbvp {

bool ParamDomain::contains(const RVec& p) const {
  for (const auto& box : boxes) {
    if (box.lo.size() != p.size()) continue;
    bool inside = true;
    for (Eigen::Index i = 0; i < p.size() && inside; ++i) {
      inside = p(i) >= box.lo(i) && p(i) <= box.hi(i);
    }
    if (inside) return true;
  }
  return false;
}

int ParamDomain::dim() const {
  return boxes.empty() ? 0 : static_cast<int>(boxes.front().lo.size());
}

PolyMatrix PolyMatrix::constant(const RMat& m) {
  PolyMatrix out;
  out.rows = static_cast<int>(m.rows());
  out.cols = static_cast<int>(m.cols());
  out.entries.resize(static_cast<size_t>(out.rows * out.cols));
  for (int i = 0; i < out.rows; ++i) {
    for (int j = 0; j < out.cols; ++j) {
      if (m(i, j) != 0.0) out.entries[static_cast<size_t>(i * out.cols + j)] = {{m(i, j), {}}};
    }
  }
  return out;
}

RMat PolyMatrix::eval(const RVec& p) const {
  RMat out = RMat::Zero(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      double v = 0.0;
      for (const auto& term : entries[static_cast<size_t>(i * cols + j)]) {
        double t = term.c;
        for (size_t k = 0; k < term.pow.size(); ++k) {
          if (term.pow[k] == 0) continue;
          if (static_cast<Eigen::Index>(k) >= p.size()) {
            throw Error(ErrorCode::kEvaluation, "polynomial exponent refers to missing parameter");
          }
          t *= std::pow(p(static_cast<Eigen::Index>(k)), term.pow[k]);
        }
        v += t;
      }
      out(i, j) = v;
    }
  }
  return out;
}

SystemDefinition::SystemDefinition(std::string name, int n, int d, int m, AFun a, BFun b,
                                   ParamDomain domain)
    : name_(std::move(name)), n_(n), d_(d), m_(m), a_(std::move(a)), b_(std::move(b)),
      domain_(std::move(domain)) {
  if (n_ <= 0 || d_ <= 0 || m_ < 0) {
    throw Error(ErrorCode::kInvalidInput, "system dimensions must satisfy N > 0, d > 0, M >= 0");
  }
  for (const auto& box : domain_.boxes) {
    if (box.lo.size() != m_ || box.hi.size() != m_) {
      throw Error(ErrorCode::kInvalidInput, "parameter box dimension differs from M");
    }
  }
}

SystemDefinition SystemDefinition::from_polynomials(std::string name, int n, int d, int m,
                                                    std::vector<PolyMatrix> a,
                                                    std::vector<PolyMatrix> b,
                                                    ParamDomain domain) {
  if (static_cast<int>(a.size()) != d || static_cast<int>(b.size()) != d * d) {
    throw Error(ErrorCode::kInvalidInput, "expected d matrices A_j and d*d matrices B_jk");
  }
  auto check = [n](const PolyMatrix& pm) {
    if (pm.rows != n || pm.cols != n || static_cast<int>(pm.entries.size()) != n * n) {
      throw Error(ErrorCode::kInvalidInput, "coefficient matrix is not N x N");
    }
  };
  for (const auto& pm : a) check(pm);
  for (const auto& pm : b) check(pm);
  auto af = [a](const RVec& p, int j) { return a[static_cast<size_t>(j - 1)].eval(p); };
  auto bf = [b, d](const RVec& p, int j, int k) {
    return b[static_cast<size_t>((j - 1) * d + (k - 1))].eval(p);
  };
  return SystemDefinition(std::move(name), n, d, m, af, bf, std::move(domain));
}

namespace {

void check_matrix(const RMat& x, int n, const char* what) {
  if (x.rows() != n || x.cols() != n) {
    throw Error(ErrorCode::kEvaluation, std::string(what) + " has wrong shape");
  }
  if (!x.allFinite()) throw Error(ErrorCode::kEvaluation, std::string(what) + " has non-finite entries");
}

}  // namespace

RMat SystemDefinition::A(const RVec& p, int j) const {
  if (j < 1 || j > d_) throw Error(ErrorCode::kInvalidInput, "A_j index out of range");
  RMat out = a_(p, j);
  check_matrix(out, n_, "A_j");
  return out;
}

RMat SystemDefinition::B(const RVec& p, int j, int k) const {
  if (j < 1 || j > d_ || k < 1 || k > d_) throw Error(ErrorCode::kInvalidInput, "B_jk index out of range");
  RMat out = b_(p, j, k);
  check_matrix(out, n_, "B_jk");
  return out;
}

BoundaryData BoundaryData::constant(const CMat& gamma) {
  return BoundaryData([gamma](const RVec&, const Frequency&) { return gamma; });
}

CMat BoundaryData::gamma_matrix(const RVec& p, const Frequency& zeta) const {
  if (!gamma_) throw Error(ErrorCode::kInvalidInput, "boundary matrix not set");
  CMat g = gamma_(p, zeta);
  if (g.cols() != 2 * g.rows()) throw Error(ErrorCode::kInvalidInput, "boundary matrix must be N x 2N");
  if (!g.allFinite()) throw Error(ErrorCode::kEvaluation, "boundary matrix has non-finite entries");
  if (numerical_rank(g, 1e-12 * (1.0 + spectral_norm(g))) != g.rows()) {
    throw Error(ErrorCode::kInvalidInput, "boundary matrix does not have full row rank");
  }
  return g;
}

namespace {

// Sorted cluster sizes of a real spectrum.
std::vector<int> multiplicity_pattern(std::vector<double> ev, double gap) {
  std::sort(ev.begin(), ev.end());
  std::vector<int> sizes;
  int run = 1;
  for (size_t i = 1; i < ev.size(); ++i) {
    if (ev[i] - ev[i - 1] <= gap) {
      ++run;
    } else {
      sizes.push_back(run);
      run = 1;
    }
  }
  sizes.push_back(run);
  std::sort(sizes.begin(), sizes.end());
  return sizes;
}

}  // namespace

HypothesisReport validate_hypotheses(const SystemDefinition& system,
                                     const std::vector<Sample>& samples,
                                     const HypothesisTolerances& tol) {
  if (samples.empty()) throw Error(ErrorCode::kInvalidInput, "empty sample set");
  const int n = system.n();
  const int d = system.d();
  HypothesisReport rep;
  rep.h2_constant = std::numeric_limits<double>::infinity();
  rep.h3_min_det = std::numeric_limits<double>::infinity();
  std::vector<int> reference_pattern;

  for (const auto& s : samples) {
    if (s.xi.size() != d) throw Error(ErrorCode::kInvalidInput, "xi sample has wrong length");
    if (s.xi.norm() == 0.0) throw Error(ErrorCode::kInvalidInput, "xi sample must be nonzero");
    RMat axi = RMat::Zero(n, n);
    CMat h2 = CMat::Zero(n, n);
    for (int j = 1; j <= d; ++j) {
      const RMat aj = system.A(s.p, j);
      axi += s.xi(j - 1) * aj;
      for (int k = 1; k <= d; ++k) h2 += (s.xi(j - 1) * s.xi(k - 1)) * system.B(s.p, j, k).cast<cd>();
    }
    h2 += kI * axi.cast<cd>();

    if (rep.h1_pass) {
      Eigen::EigenSolver<RMat> es(axi, true);
      const CVec ev = es.eigenvalues();
      CMat vecs = es.eigenvectors();
      for (Eigen::Index c = 0; c < vecs.cols(); ++c) vecs.col(c).normalize();
      const double radius = ev.cwiseAbs().maxCoeff();
      double max_imag = 0.0;
      std::vector<double> re;
      for (Eigen::Index i = 0; i < ev.size(); ++i) {
        max_imag = std::max(max_imag, std::abs(ev(i).imag()));
        re.push_back(ev(i).real());
      }
      const double cond = condition_number(vecs);
      const auto pattern = multiplicity_pattern(re, tol.cluster_rel * std::max(radius, 1e-300));
      rep.h1_max_imag = std::max(rep.h1_max_imag, max_imag);
      rep.h1_max_cond = std::max(rep.h1_max_cond, cond);
      std::string reason;
      if (max_imag > tol.imag_tol * (1.0 + radius)) reason = "non-real eigenvalue";
      else if (!(cond <= tol.cond_max)) reason = "eigenvector matrix ill-conditioned (not semi-simple)";
      else if (!reference_pattern.empty() && pattern != reference_pattern) reason = "multiplicity pattern changes";
      if (reference_pattern.empty()) reference_pattern = pattern;
      if (!reason.empty()) {
        rep.h1_pass = false;
        rep.h1_reason = reason;
        rep.h1_p = s.p;
        rep.h1_xi = s.xi;
        rep.h1_multiplicities = pattern;
      }
    }

    const CVec mu = eigenvalues(h2);
    double min_re = mu.real().minCoeff();
    const double ratio = min_re / s.xi.squaredNorm();
    if (ratio < rep.h2_constant) {
      rep.h2_constant = ratio;
      rep.h2_p = s.p;
      rep.h2_xi = s.xi;
    }

    const double det = std::abs(system.A(s.p, d).determinant());
    if (det < rep.h3_min_det) {
      rep.h3_min_det = det;
      rep.h3_p = s.p;
    }
  }
  if (rep.h1_pass) {
    rep.h1_p = samples.front().p;
    rep.h1_xi = samples.front().xi;
    rep.h1_multiplicities = reference_pattern;
  }
  rep.h2_pass = rep.h2_constant > 0.0;
  rep.h3_pass = rep.h3_min_det > tol.det_tol;
  return rep;
}

std::vector<Sample> default_samples(const SystemDefinition& system, int directions) {
  const int m = system.m();
  const int d = system.d();
  std::vector<RVec> ps;
  if (system.domain().boxes.empty()) {
    ps.push_back(RVec::Zero(m));
  }
  for (const auto& box : system.domain().boxes) {
    const RVec inner_lo = box.lo + 0.1 * (box.hi - box.lo);
    const RVec inner_hi = box.hi - 0.1 * (box.hi - box.lo);
    ps.push_back(0.5 * (box.lo + box.hi));
    if (m <= 4) {
      for (int mask = 0; mask < (1 << m); ++mask) {
        RVec p(m);
        for (int i = 0; i < m; ++i) p(i) = (mask >> i) & 1 ? inner_hi(i) : inner_lo(i);
        ps.push_back(p);
      }
    }
  }
  std::vector<RVec> dirs;
  if (d == 1) {
    dirs.push_back(RVec::Constant(1, 1.0));
    dirs.push_back(RVec::Constant(1, -1.0));
  } else if (d == 2) {
    for (int k = 0; k < directions; ++k) {
      const double th = 2.0 * std::numbers::pi * (k + 0.5) / directions;
      RVec v(2);
      v << std::cos(th), std::sin(th);
      dirs.push_back(v);
    }
  } else {
    // Fibonacci points on the sphere, padded with zeros beyond three axes.
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < directions; ++k) {
      const double z = 1.0 - 2.0 * (k + 0.5) / directions;
      const double r = std::sqrt(1.0 - z * z);
      RVec v = RVec::Zero(d);
      v(0) = r * std::cos(golden * k);
      v(1) = r * std::sin(golden * k);
      v(2) = z;
      dirs.push_back(v);
    }
  }
  std::vector<Sample> out;
  for (const auto& p : ps) {
    for (const auto& dir : dirs) {
      for (double mag : {0.1, 1.0, 10.0}) out.push_back({p, mag * dir});
    }
  }
  return out;
}

namespace {

RMat scalar(double v) { return RMat::Constant(1, 1, v); }

CatalogEntry make_advdiff1d() {
  ParamDomain dom;
  RVec lo(2), hi(2);
  lo << 0.1, 0.1;
  hi << 10.0, 10.0;
  dom.boxes.push_back({lo, hi});
  lo << -10.0, 0.1;
  hi << -0.1, 10.0;
  dom.boxes.push_back({lo, hi});
  SystemDefinition sys(
      "advdiff1d", 1, 1, 2, [](const RVec& p, int) { return scalar(p(0)); },
      [](const RVec& p, int, int) { return scalar(p(1)); }, dom);
  CMat g(1, 2);
  g << 1.0, 0.0;
  RVec p0(2);
  p0 << 1.0, 1.0;
  return {sys, BoundaryData::constant(g), p0, {"H1", "H2", "H3"},
          "u_t + a u_x = nu u_xx, p = (a, nu), Dirichlet boundary"};
}

CatalogEntry make_advdiff2d() {
  ParamDomain dom;
  RVec lo(3), hi(3);
  lo << -10.0, 0.1, 0.1;
  hi << 10.0, 10.0, 10.0;
  dom.boxes.push_back({lo, hi});
  lo << -10.0, -10.0, 0.1;
  hi << 10.0, -0.1, 10.0;
  dom.boxes.push_back({lo, hi});
  SystemDefinition sys(
      "advdiff2d", 1, 2, 3, [](const RVec& p, int j) { return scalar(p(j - 1)); },
      [](const RVec& p, int j, int k) { return scalar(j == k ? p(2) : 0.0); }, dom);
  CMat g(1, 2);
  g << 1.0, 0.0;
  RVec p0(3);
  p0 << 1.0, 1.0, 1.0;
  return {sys, BoundaryData::constant(g), p0, {"H1", "H2", "H3"},
          "u_t + a1 u_y + a2 u_x = nu (u_xx + u_yy), p = (a1, a2, nu), x normal to the boundary"};
}

CatalogEntry make_wave2x2() {
  ParamDomain dom;
  dom.boxes.push_back({RVec(0), RVec(0)});
  SystemDefinition sys(
      "wave2x2", 2, 2, 0,
      [](const RVec&, int j) {
        RMat a(2, 2);
        if (j == 1) a << 0.0, 1.0, 1.0, 0.0;
        else a << 1.0, 0.0, 0.0, -1.0;
        return a;
      },
      [](const RVec&, int j, int k) { return j == k ? RMat(RMat::Identity(2, 2)) : RMat(RMat::Zero(2, 2)); },
      dom);
  CMat g = CMat::Zero(2, 4);
  g(0, 0) = 1.0;
  g(1, 1) = 1.0;
  return {sys, BoundaryData::constant(g), RVec(0), {"H1", "H2", "H3"},
          "symmetric 2x2 system A1 = [[0,1],[1,0]], A2 = diag(1,-1), identity viscosity; "
          "glancing where |tau| = |eta|"};
}

}  // namespace

std::vector<std::string> builtin_names() { return {"advdiff1d", "advdiff2d", "wave2x2"}; }

CatalogEntry builtin_example(const std::string& name) {
  if (name == "advdiff1d") return make_advdiff1d();
  if (name == "advdiff2d") return make_advdiff2d();
  if (name == "wave2x2") return make_wave2x2();
  throw Error(ErrorCode::kNotFound, "unknown catalog system '" + name + "'");
}

std::map<std::string, CatalogEntry> builtin_examples() {
  std::map<std::string, CatalogEntry> out;
  for (const auto& n : builtin_names()) out.emplace(n, builtin_example(n));
  return out;
}

}  // namespace hpbvp
