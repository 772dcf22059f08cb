#include "rbsos/bilevel.hpp"

#include "rbsos/errors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rbsos {

using Eigen::VectorXd;

std::vector<std::pair<double, double>> UpperBoxConstraint::bounds() const {
  std::vector<std::pair<double, double>> out;
  for (Eigen::Index i = 0; i < a_lo.size(); ++i) out.emplace_back(a_lo(i), a_hi(i));
  for (Eigen::Index i = 0; i < b_lo.size(); ++i) out.emplace_back(b_lo(i), b_hi(i));
  out.emplace_back(c_lo, c_hi);
  return out;
}

double UpperBoxConstraint::worst_case(const VectorXd& x, const VectorXd& y) const {
  double v = -c_lo;
  for (Eigen::Index i = 0; i < x.size(); ++i) v += std::max(a_lo(i) * x(i), a_hi(i) * x(i));
  for (Eigen::Index i = 0; i < y.size(); ++i) v += std::max(b_lo(i) * y(i), b_hi(i) * y(i));
  return v;
}

LevelKind BilevelProblem::kind() const {
  if (!lower.constraints.empty() && std::holds_alternative<BallSet>(lower.constraints[0].set)) return LevelKind::ball;
  return LevelKind::box;
}

void BilevelProblem::validate() const {
  if (m < 1 || n < 1) throw std::invalid_argument("bilevel: m and n must be positive");
  if (f.nvars() > m + n) throw std::invalid_argument("bilevel: objective uses more than m + n variables");
  lower.validate();
  if (lower.m() != m || lower.n() != n) throw std::invalid_argument("bilevel: lower-level dimensions differ from m, n");
  const LevelKind k = kind();
  const int s = lower.constraints[0].s();
  for (const auto& con : lower.constraints) {
    const bool box = std::holds_alternative<BoxSet>(con.set);
    const bool ball = std::holds_alternative<BallSet>(con.set);
    if ((k == LevelKind::box && !box) || (k == LevelKind::ball && !ball))
      throw std::invalid_argument("bilevel: lower-level sets must be all boxes or all balls");
    if (con.s() != s) throw std::invalid_argument("bilevel: lower-level sets must share one dimension");
  }
  for (const auto& row : upper) {
    if (row.a_lo.size() != m || row.a_hi.size() != m || row.b_lo.size() != n || row.b_hi.size() != n)
      throw std::invalid_argument("bilevel: upper constraint has the wrong length");
    for (const auto& [lo, hi] : row.bounds())
      if (!(lo <= hi)) throw std::invalid_argument("bilevel: upper interval with lo > hi");
  }
  for (const auto& con : upper_ball) {
    con.validate();
    if (!std::holds_alternative<BallSet>(con.set)) throw std::invalid_argument("bilevel: upper_ball needs ball sets");
    if (con.n() != m + n) throw std::invalid_argument("bilevel: upper_ball rows act on (x, y)");
  }
  if (k == LevelKind::box && !upper_ball.empty())
    throw std::invalid_argument("bilevel: ball upper rows with box lower level");
  if (k == LevelKind::ball && !upper.empty())
    throw std::invalid_argument("bilevel: box upper rows with ball lower level");
  if (feasible_point && feasible_point->size() != m + n)
    throw std::invalid_argument("bilevel: feasible_point must have m + n entries");
}

std::string to_string(GTag tag) {
  switch (tag) {
    case GTag::upper_extreme: return "upper-extreme";
    case GTag::lower_extreme: return "lower-extreme";
    case GTag::mu0_sign: return "mu0-sign";
    case GTag::mu_sign: return "mu-sign";
    case GTag::dual_slack: return "dual-slack";
    case GTag::dual_box: return "dual-box";
  }
  return "?";
}

int SingleLevelProgram::max_degree() const {
  int d = objective.degree();
  for (const auto& p : g) d = std::max(d, p.degree());
  for (const auto& p : h) d = std::max(d, p.degree());
  return d;
}

std::size_t expected_g_count(int l, int m, int n, int q, int s) {
  return static_cast<std::size_t>(l) * (std::size_t{1} << (m + n + 1)) +
         static_cast<std::size_t>(q) * ((std::size_t{1} << s) + static_cast<std::size_t>(s) + 1) + 2;
}

namespace {

Polynomial lift(const Polynomial& p, int nvars) {
  Polynomial out(nvars);
  for (const auto& [mono, coeff] : p.terms()) out.add_term(mono, coeff);
  return out;
}

}  // namespace

SingleLevelProgram build_single_level(const BilevelProblem& prob, bool prune) {
  prob.validate();
  if (prob.kind() != LevelKind::box) throw std::invalid_argument("build_single_level: box lower level required");
  const int m = prob.m, n = prob.n, q = prob.lower.q(), s = prob.lower.constraints[0].s();
  for (const auto& con : prob.lower.constraints)
    if (!std::get<BoxSet>(con.set).is_symmetric())
      throw std::invalid_argument("build_single_level: lower-level boxes must be symmetric");

  SingleLevelProgram out;
  out.layout = VariableLayout(m, n, q, s);
  const VariableLayout& lay = out.layout;
  const int N = lay.total();
  out.objective = lift(prob.f, N);
  auto var = [&](int i) { return Polynomial::variable(N, i); };
  auto cst = [&](double v) { return Polynomial::constant(N, v); };

  std::vector<Polynomial> g;
  std::vector<GTag> tags;

  for (const auto& row : prob.upper) {
    for (const VectorXd& v : box_vertices_nominal(row.bounds())) {
      Polynomial p = cst(v(m + n));
      for (int i = 0; i < m; ++i) p -= v(i) * var(lay.x(i));
      for (int i = 0; i < n; ++i) p -= v(m + i) * var(lay.y(i));
      g.push_back(p);
      tags.push_back(GTag::upper_extreme);
    }
  }

  std::vector<std::vector<double>> gammas;
  for (int j = 0; j < q; ++j) {
    const auto& con = prob.lower.constraints[static_cast<std::size_t>(j)];
    const auto& box = std::get<BoxSet>(con.set);
    gammas.push_back(box.gamma());
    std::vector<std::pair<double, double>> bounds;
    for (int i = 0; i < s; ++i) bounds.emplace_back(box.lo[static_cast<std::size_t>(i)], box.hi[static_cast<std::size_t>(i)]);
    for (const VectorXd& u : box_vertices_nominal(bounds)) {
      double b = con.b[0];
      VectorXd a = con.a[0];
      for (int i = 0; i < s; ++i) {
        b += u(i) * con.b[static_cast<std::size_t>(i + 1)];
        a += u(i) * con.a[static_cast<std::size_t>(i + 1)];
      }
      Polynomial p = cst(b);
      for (int i = 0; i < m; ++i) p -= prob.lower.c[static_cast<std::size_t>(j)](i) * var(lay.x(i));
      for (int i = 0; i < n; ++i) p -= a(i) * var(lay.y(i));
      g.push_back(p);
      tags.push_back(GTag::lower_extreme);
    }
  }

  g.push_back(var(lay.mu0()));
  tags.push_back(GTag::mu0_sign);
  for (int k = 1; k <= q; ++k) {
    g.push_back(var(lay.mu(k)));
    tags.push_back(GTag::mu_sign);
  }

  {
    Polynomial slack(N);
    for (int i = 0; i < n; ++i) slack -= prob.lower.d0(i) * (var(lay.mu0()) * var(lay.y(i)));
    for (int k = 1; k <= q; ++k) {
      const auto& con = prob.lower.constraints[static_cast<std::size_t>(k - 1)];
      const VectorXd& ck = prob.lower.c[static_cast<std::size_t>(k - 1)];
      slack -= con.b[0] * var(lay.mu(k));
      for (int i = 0; i < m; ++i) slack += ck(i) * (var(lay.mu(k)) * var(lay.x(i)));
      for (int i = 1; i <= s; ++i) slack -= con.b[static_cast<std::size_t>(i)] * var(lay.mu(k, i));
    }
    g.push_back(slack);
    tags.push_back(GTag::dual_slack);
  }

  for (int k = 1; k <= q; ++k)
    for (int i = 1; i <= s; ++i) {
      const double gam = gammas[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(i - 1)];
      Polynomial p = (gam * gam) * (var(lay.mu(k)) * var(lay.mu(k))) - var(lay.mu(k, i)) * var(lay.mu(k, i));
      g.push_back(p);
      tags.push_back(GTag::dual_box);
    }

  for (int j = 0; j < n; ++j) {
    Polynomial p = prob.lower.d0(j) * var(lay.mu0());
    for (int k = 1; k <= q; ++k) {
      const auto& con = prob.lower.constraints[static_cast<std::size_t>(k - 1)];
      p += con.a[0](j) * var(lay.mu(k));
      for (int i = 1; i <= s; ++i) p += con.a[static_cast<std::size_t>(i)](j) * var(lay.mu(k, i));
    }
    out.h.push_back(p);
  }
  {
    Polynomial p = cst(1.0);
    for (int v = lay.mu0(); v < N; ++v) p -= var(v) * var(v);
    out.h.push_back(p);
  }

  out.unpruned_count = static_cast<int>(g.size());
  out.pruned = prune;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (prune) {
      if (g[i].is_zero()) continue;
      bool seen = false;
      for (const auto& kept : out.g) seen = seen || kept == g[i];
      if (seen) continue;
    }
    out.g.push_back(g[i]);
    out.tags.push_back(tags[i]);
    out.source.push_back(static_cast<int>(i));
  }
  return out;
}

VectorXd stack_point(const VariableLayout& layout, const VectorXd& x, const VectorXd& y, const VectorXd& mu) {
  if (x.size() != layout.m() || y.size() != layout.n() || mu.size() != layout.num_mu())
    throw std::invalid_argument("stack_point: block length mismatch");
  VectorXd p(layout.total());
  p << x, y, mu;
  return p;
}

namespace {

void check_point(const BilevelProblem& prob, const VectorXd& x, const VectorXd& y) {
  if (x.size() != prob.m || y.size() != prob.n) throw std::invalid_argument("bilevel: point has the wrong length");
}

}  // namespace

FeasibilityVerdict robust_feasible(const BilevelProblem& prob, const VectorXd& x, const VectorXd& y, double tol) {
  prob.validate();
  if (prob.kind() != LevelKind::box) throw std::invalid_argument("robust_feasible: box lower level required");
  check_point(prob, x, y);
  FeasibilityVerdict out;
  out.upper_violation = -std::numeric_limits<double>::infinity();
  for (const auto& row : prob.upper) out.upper_violation = std::max(out.upper_violation, row.worst_case(x, y));
  out.upper_ok = out.upper_violation <= tol;

  out.lower = is_robust_solution(prob.lower, x, y, tol);
  if (out.lower->certificate) {
    const FarkasCertificate& cert = out.lower->certificate->dual;
    const int q = prob.lower.q(), s = prob.lower.constraints[0].s();
    const VariableLayout lay(prob.m, prob.n, q, s);
    double norm2 = 1.0;
    for (int k = 0; k < q; ++k) norm2 += cert.lambda0[static_cast<std::size_t>(k)] * cert.lambda0[static_cast<std::size_t>(k)] +
                                         cert.lambda[static_cast<std::size_t>(k)].squaredNorm();
    const double scale = 1.0 / std::sqrt(norm2);
    VectorXd mu(lay.num_mu());
    const int base = lay.mu0();
    mu(lay.mu0() - base) = scale;
    for (int k = 1; k <= q; ++k) {
      mu(lay.mu(k) - base) = scale * cert.lambda0[static_cast<std::size_t>(k - 1)];
      for (int i = 1; i <= s; ++i) mu(lay.mu(k, i) - base) = scale * cert.lambda[static_cast<std::size_t>(k - 1)](i - 1);
    }
    out.lower_ok = mu(0) > kMu0Threshold;
    out.mu = mu;
  }
  out.feasible = out.upper_ok && out.lower_ok;
  return out;
}

BallFeasibilityVerdict ball_robust_feasible(const BilevelProblem& prob, const VectorXd& x, const VectorXd& y,
                                            double tol) {
  prob.validate();
  if (prob.kind() != LevelKind::ball) throw std::invalid_argument("ball_robust_feasible: ball lower level required");
  check_point(prob, x, y);
  BallFeasibilityVerdict out;
  const auto shifted = prob.lower.at(x);
  out.closedness = closedness_sufficient(shifted, prob.n);

  BallFeasibilityCertificate cert;
  VectorXd xy(prob.m + prob.n);
  xy << x, y;
  for (const auto& con : prob.upper_ball) {
    const auto t = s_lemma_multiplier(con, xy, tol);
    if (!t) return out;
    cert.upper_multipliers.push_back(*t);
  }
  for (const auto& con : shifted) {
    const auto t = s_lemma_multiplier(con, y, tol);
    if (!t) return out;
    cert.lower_multipliers.push_back(*t);
  }
  FarkasOptions opts;
  opts.tol = tol;
  const auto search = find_certificate(prob.lower.d0, prob.lower.d0.dot(y), shifted, opts);
  if (!search.certificate) return out;
  cert.dual = *search.certificate;
  out.certificate = std::move(cert);
  out.feasible = true;
  return out;
}

CoercivityCheck hessian_check(const Polynomial& f, const VectorXd& point) {
  if (point.size() < f.nvars()) throw std::invalid_argument("hessian_check: point too short");
  const Polynomial lifted = lift(f, static_cast<int>(point.size()));
  const auto H = hessian(lifted);
  const auto d = static_cast<Eigen::Index>(H.size());
  Eigen::MatrixXd M(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      M(i, j) = H[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].evaluate(point);
  CoercivityCheck out;
  if (d == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = eig.eigenvalues()(0);
  out.positive_definite = out.min_eigenvalue > 1e-9 * (1.0 + M.cwiseAbs().maxCoeff());
  return out;
}

SlaterResult lower_slater(const BilevelProblem& prob, const VectorXd& x) {
  prob.validate();
  return slater_check(prob.lower.at(x), prob.n);
}

}  // namespace rbsos
