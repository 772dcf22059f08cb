#include "rbsos/uncertainty.hpp"

#include "rbsos/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace rbsos {

using conic::ConicProgram;
using conic::LinExpr;
using Eigen::MatrixXd;
using Eigen::VectorXd;

BoxSet BoxSet::symmetric(const std::vector<double>& gamma) {
  BoxSet b;
  for (double g : gamma) {
    if (!(g >= 0)) throw std::invalid_argument("box: negative half-width");
    b.lo.push_back(-g);
    b.hi.push_back(g);
  }
  return b;
}

bool BoxSet::is_symmetric() const {
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (lo[i] != -hi[i]) return false;
  return true;
}

std::vector<double> BoxSet::gamma() const {
  if (!is_symmetric()) throw std::invalid_argument("box: not symmetric");
  return hi;
}

bool BoxSet::contains(const VectorXd& u, double tol) const {
  if (u.size() != dim()) throw std::invalid_argument("box: dimension mismatch");
  for (int i = 0; i < dim(); ++i)
    if (u(i) < lo[static_cast<std::size_t>(i)] - tol || u(i) > hi[static_cast<std::size_t>(i)] + tol) return false;
  return true;
}

bool BallSet::contains(const VectorXd& u, double tol) const {
  if (u.size() != dim) throw std::invalid_argument("ball: dimension mismatch");
  return u.norm() <= radius + tol;
}

MatrixXd Spectrahedron::pencil(const VectorXd& u) const {
  if (u.size() != dim()) throw std::invalid_argument("spectrahedron: dimension mismatch");
  MatrixXd m = matrices[0];
  for (int i = 0; i < dim(); ++i) m += u(i) * matrices[static_cast<std::size_t>(i + 1)];
  return m;
}

bool Spectrahedron::contains(const VectorXd& u, double tol) const { return conic::psd_check(pencil(u), tol); }

void Spectrahedron::validate() const {
  if (matrices.empty()) throw std::invalid_argument("spectrahedron: needs at least A0");
  const auto p = matrices[0].rows();
  for (const MatrixXd& m : matrices) {
    if (m.rows() != p || m.cols() != p) throw std::invalid_argument("spectrahedron: matrices differ in size");
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw std::invalid_argument("spectrahedron: matrix not symmetric");
  }
}

int set_dim(const UncertaintySet& set) {
  return std::visit([](const auto& s) -> int {
    using T = std::decay_t<decltype(s)>;
    if constexpr (std::is_same_v<T, BallSet>)
      return s.dim;
    else
      return s.dim();
  }, set);
}

std::string set_kind(const UncertaintySet& set) {
  switch (set.index()) {
    case 0: return "box";
    case 1: return "ball";
    default: return "spectrahedron";
  }
}

bool set_contains(const UncertaintySet& set, const VectorXd& u, double tol) {
  return std::visit([&](const auto& s) { return s.contains(u, tol); }, set);
}

void AffineUncertainConstraint::validate() const {
  if (a.empty() || a.size() != b.size()) throw std::invalid_argument("constraint: need s+1 coefficient vectors and scalars");
  for (const VectorXd& v : a)
    if (v.size() != a[0].size()) throw std::invalid_argument("constraint: coefficient vectors differ in length");
  if (set_dim(set) != s()) throw std::invalid_argument("constraint: uncertainty dimension does not match coefficients");
  if (const auto* sp = std::get_if<Spectrahedron>(&set)) sp->validate();
  if (const auto* bx = std::get_if<BoxSet>(&set)) {
    if (bx->lo.size() != bx->hi.size()) throw std::invalid_argument("box: lo/hi length mismatch");
    for (std::size_t i = 0; i < bx->lo.size(); ++i)
      if (bx->lo[i] > bx->hi[i]) throw std::invalid_argument("box: lo > hi");
  }
}

AffineUncertainConstraint AffineUncertainConstraint::shifted(double shift) const {
  AffineUncertainConstraint c = *this;
  c.b[0] -= shift;
  return c;
}

Spectrahedron box_to_spectrahedron(const std::vector<double>& gamma) {
  for (double g : gamma)
    if (!(g > 0)) throw std::invalid_argument("box_to_spectrahedron: gamma must be positive");
  return box_to_spectrahedron(BoxSet::symmetric(gamma));
}

Spectrahedron box_to_spectrahedron(const BoxSet& box) {
  const int s = box.dim();
  Spectrahedron sp;
  MatrixXd a0 = MatrixXd::Zero(2 * s, 2 * s);
  for (int i = 0; i < s; ++i) {
    a0(i, i) = -box.lo[static_cast<std::size_t>(i)];
    a0(s + i, s + i) = box.hi[static_cast<std::size_t>(i)];
  }
  sp.matrices.push_back(a0);
  for (int i = 0; i < s; ++i) {
    MatrixXd ai = MatrixXd::Zero(2 * s, 2 * s);
    ai(i, i) = 1.0;
    ai(s + i, s + i) = -1.0;
    sp.matrices.push_back(ai);
  }
  return sp;
}

Spectrahedron ball_to_spectrahedron(int s, double radius) {
  if (s < 1) throw std::invalid_argument("ball_to_spectrahedron: dimension must be >= 1");
  Spectrahedron sp;
  sp.matrices.push_back(radius * MatrixXd::Identity(s + 1, s + 1));
  for (int i = 0; i < s; ++i) {
    MatrixXd ai = MatrixXd::Zero(s + 1, s + 1);
    ai(i, s) = ai(s, i) = 1.0;
    sp.matrices.push_back(ai);
  }
  return sp;
}

Spectrahedron to_spectrahedron(const UncertaintySet& set) {
  if (const auto* b = std::get_if<BoxSet>(&set)) return box_to_spectrahedron(*b);
  if (const auto* b = std::get_if<BallSet>(&set)) return ball_to_spectrahedron(b->dim, b->radius);
  return std::get<Spectrahedron>(set);
}

std::size_t enumeration_cap() {
  if (const char* env = std::getenv("RBSOS_MAX_ENUM")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 4096;
}

namespace {

void check_cap(std::size_t dims) {
  const std::size_t cap = enumeration_cap();
  if (dims >= 63 || (std::size_t{1} << dims) > cap)
    throw CapExceededError("extreme-point enumeration of 2^" + std::to_string(dims) + " points exceeds cap " +
                           std::to_string(cap) + " (set RBSOS_MAX_ENUM to raise it)");
}

std::vector<VectorXd> enumerate(const std::vector<std::pair<double, double>>& bounds, bool collapse) {
  std::vector<std::vector<double>> choices;
  std::size_t free_dims = 0;
  for (const auto& [lo, hi] : bounds) {
    if (lo > hi) throw std::invalid_argument("box: lo > hi");
    if (collapse && lo == hi) {
      choices.push_back({lo});
    } else {
      choices.push_back({lo, hi});
      ++free_dims;
    }
  }
  check_cap(free_dims);
  std::size_t total = 1;
  for (const auto& c : choices) total *= c.size();
  std::vector<VectorXd> out;
  out.reserve(total);
  const auto s = static_cast<Eigen::Index>(bounds.size());
  for (std::size_t k = 0; k < total; ++k) {
    VectorXd p(s);
    std::size_t rem = k;
    // first coordinate is the most significant digit
    for (Eigen::Index i = s; i-- > 0;) {
      const auto& c = choices[static_cast<std::size_t>(i)];
      p(i) = c[rem % c.size()];
      rem /= c.size();
    }
    out.push_back(p);
  }
  return out;
}

std::vector<std::pair<double, double>> bounds_of(const BoxSet& box) {
  std::vector<std::pair<double, double>> b;
  for (int i = 0; i < box.dim(); ++i) b.emplace_back(box.lo[static_cast<std::size_t>(i)], box.hi[static_cast<std::size_t>(i)]);
  return b;
}

}  // namespace

std::vector<VectorXd> box_extreme_points(const std::vector<std::pair<double, double>>& bounds) {
  return enumerate(bounds, true);
}

std::vector<VectorXd> box_extreme_points(const BoxSet& box) { return enumerate(bounds_of(box), true); }

std::vector<VectorXd> box_vertices_nominal(const std::vector<std::pair<double, double>>& bounds) {
  return enumerate(bounds, false);
}

double max_affine_over_set(const AffineFunction& f, const UncertaintySet& set) {
  if (f.c.size() != set_dim(set)) throw std::invalid_argument("max_affine_over_set: dimension mismatch");
  if (const auto* box = std::get_if<BoxSet>(&set)) {
    double v = f.c0;
    for (int i = 0; i < box->dim(); ++i)
      v += std::max(f.c(i) * box->lo[static_cast<std::size_t>(i)], f.c(i) * box->hi[static_cast<std::size_t>(i)]);
    return v;
  }
  if (const auto* ball = std::get_if<BallSet>(&set)) return f.c0 + ball->radius * f.c.norm();

  const auto& sp = std::get<Spectrahedron>(set);
  sp.validate();
  const int s = sp.dim(), p = sp.order();
  ConicProgram prog;
  const int u = prog.add_free(s);
  const int z = prog.add_psd(p);
  for (int c = 0; c < p; ++c)
    for (int r = c; r < p; ++r) {
      LinExpr e = ConicProgram::psd_entry(z, p, r, c);
      e += LinExpr(-sp.matrices[0](r, c));
      for (int i = 0; i < s; ++i) e.add(u + i, -sp.matrices[static_cast<std::size_t>(i + 1)](r, c));
      prog.add_equality(e);
    }
  LinExpr obj;
  for (int i = 0; i < s; ++i) obj.add(u + i, f.c(i));
  prog.set_maximize(obj);
  const auto sol = conic::solve(prog);
  switch (sol.status) {
    case conic::SolveStatus::optimal: return f.c0 + sol.objective;
    case conic::SolveStatus::infeasible: return -std::numeric_limits<double>::infinity();
    case conic::SolveStatus::unbounded: throw UnboundedSetError("max_affine_over_set: spectrahedron is not compact");
    case conic::SolveStatus::numerical_failure:
    case conic::SolveStatus::inaccurate: break;
  }
  throw IndeterminateError("max_affine_over_set: solver did not converge");
}

double worst_case_value(const AffineUncertainConstraint& con, const VectorXd& z, double shift) {
  if (z.size() != con.n()) throw std::invalid_argument("worst_case_value: dimension mismatch");
  AffineFunction f{con.a[0].dot(z) - con.b[0] + shift, VectorXd(con.s())};
  for (int i = 0; i < con.s(); ++i)
    f.c(i) = con.a[static_cast<std::size_t>(i + 1)].dot(z) - con.b[static_cast<std::size_t>(i + 1)];
  return max_affine_over_set(f, con.set);
}

void add_robust_constraint(ConicProgram& prog, const UncertaintySet& set, const LinExpr& c0,
                           const std::vector<LinExpr>& ci) {
  const int s = set_dim(set);
  if (static_cast<int>(ci.size()) != s) throw std::invalid_argument("robust constraint: dimension mismatch");
  if (const auto* box = std::get_if<BoxSet>(&set)) {
    LinExpr total = c0;
    for (int i = 0; i < s; ++i) {
      const double lo = box->lo[static_cast<std::size_t>(i)], hi = box->hi[static_cast<std::size_t>(i)];
      if (lo == hi) {
        total.add(ci[static_cast<std::size_t>(i)], lo);
        continue;
      }
      const int t = prog.add_free(1);
      prog.add_less_equal(ci[static_cast<std::size_t>(i)] * lo - LinExpr::var(t));
      prog.add_less_equal(ci[static_cast<std::size_t>(i)] * hi - LinExpr::var(t));
      total.add(t, 1.0);
    }
    prog.add_less_equal(total);
    return;
  }
  if (const auto* ball = std::get_if<BallSet>(&set)) {
    const int q = prog.add_soc(s + 1);
    for (int i = 0; i < s; ++i) prog.add_equality(LinExpr::var(q + 1 + i) - ci[static_cast<std::size_t>(i)]);
    LinExpr total = c0;
    total.add(q, ball->radius);
    prog.add_less_equal(total);
    return;
  }
  // dual of max {c^T u : A0 + sum u_i A_i psd}: <A_i, Z> = -c_i, value <A0, Z>
  const auto& sp = std::get<Spectrahedron>(set);
  const int p = sp.order();
  const int z = prog.add_psd(p);
  auto inner = [&](const MatrixXd& a) {
    LinExpr e;
    for (int c = 0; c < p; ++c)
      for (int r = c; r < p; ++r)
        if (a(r, c) != 0.0) e.add(ConicProgram::psd_entry(z, p, r, c), r == c ? a(r, c) : 2.0 * a(r, c));
    return e;
  };
  for (int i = 0; i < s; ++i) prog.add_equality(inner(sp.matrices[static_cast<std::size_t>(i + 1)]) + ci[static_cast<std::size_t>(i)]);
  prog.add_less_equal(c0 + inner(sp.matrices[0]));
}

void add_pencil_constraint(ConicProgram& prog, const UncertaintySet& set, const LinExpr& l0,
                           const std::vector<LinExpr>& li) {
  const int s = set_dim(set);
  if (static_cast<int>(li.size()) != s) throw std::invalid_argument("pencil constraint: dimension mismatch");
  if (const auto* box = std::get_if<BoxSet>(&set)) {
    prog.add_greater_equal(l0);
    for (int i = 0; i < s; ++i) {
      // l0*lo_i <= l_i <= l0*hi_i
      prog.add_less_equal(l0 * box->lo[static_cast<std::size_t>(i)] - li[static_cast<std::size_t>(i)]);
      prog.add_less_equal(li[static_cast<std::size_t>(i)] - l0 * box->hi[static_cast<std::size_t>(i)]);
    }
    return;
  }
  if (const auto* ball = std::get_if<BallSet>(&set)) {
    const int q = prog.add_soc(s + 1);
    prog.add_equality(LinExpr::var(q) - l0 * ball->radius);
    for (int i = 0; i < s; ++i) prog.add_equality(LinExpr::var(q + 1 + i) - li[static_cast<std::size_t>(i)]);
    return;
  }
  const auto& sp = std::get<Spectrahedron>(set);
  const int p = sp.order();
  const int z = prog.add_psd(p);
  for (int c = 0; c < p; ++c)
    for (int r = c; r < p; ++r) {
      LinExpr e = ConicProgram::psd_entry(z, p, r, c);
      e.add(l0, -sp.matrices[0](r, c));
      for (int i = 0; i < s; ++i) e.add(li[static_cast<std::size_t>(i)], -sp.matrices[static_cast<std::size_t>(i + 1)](r, c));
      prog.add_equality(e);
    }
}

bool pencil_psd(const UncertaintySet& set, double l0, const VectorXd& li, double tol) {
  const Spectrahedron sp = to_spectrahedron(set);
  MatrixXd m = l0 * sp.matrices[0];
  for (int i = 0; i < sp.dim(); ++i) m += li(i) * sp.matrices[static_cast<std::size_t>(i + 1)];
  // absolute tolerance: pencil >= -tol*I
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0) >= -tol;
}

SlaterResult slater_check(const std::vector<AffineUncertainConstraint>& constraints, int nvars) {
  SlaterResult res;
  if (constraints.empty()) {
    res.holds = true;
    res.slack = std::numeric_limits<double>::infinity();
    res.witness = VectorXd::Zero(nvars);
    return res;
  }
  ConicProgram prog;
  const int z = prog.add_free(nvars);
  const int delta = prog.add_free(1);
  for (const auto& con : constraints) {
    con.validate();
    if (con.n() != nvars) throw std::invalid_argument("slater_check: constraint length mismatch");
    auto affine = [&](int i) {
      LinExpr e(-con.b[static_cast<std::size_t>(i)]);
      for (int k = 0; k < nvars; ++k) e.add(z + k, con.a[static_cast<std::size_t>(i)](k));
      return e;
    };
    LinExpr c0 = affine(0);
    c0.add(delta, 1.0);
    std::vector<LinExpr> ci;
    for (int i = 1; i <= con.s(); ++i) ci.push_back(affine(i));
    add_robust_constraint(prog, con.set, c0, ci);
  }
  prog.add_less_equal(LinExpr::var(delta) + LinExpr(-1.0));
  prog.set_maximize(LinExpr::var(delta));
  const auto sol = conic::solve(prog);
  if (sol.status == conic::SolveStatus::numerical_failure || sol.status == conic::SolveStatus::inaccurate)
    throw IndeterminateError("slater_check: solver did not converge");
  if (sol.status != conic::SolveStatus::optimal) return res;
  res.slack = sol.objective;
  res.holds = res.slack > kSlaterThreshold;
  if (res.holds) res.witness = sol.x.segment(z, nvars);
  return res;
}

std::string to_string(Closedness c) {
  switch (c) {
    case Closedness::polytope: return "polytope";
    case Closedness::slater: return "slater";
    case Closedness::unknown: return "unknown";
  }
  return "unknown";
}

Closedness closedness_sufficient(const std::vector<AffineUncertainConstraint>& constraints, int nvars) {
  bool all_box = true;
  for (const auto& c : constraints) all_box = all_box && std::holds_alternative<BoxSet>(c.set);
  if (all_box) return Closedness::polytope;
  try {
    if (slater_check(constraints, nvars).holds) return Closedness::slater;
  } catch (const IndeterminateError&) {
  }
  return Closedness::unknown;
}

}  // namespace rbsos
