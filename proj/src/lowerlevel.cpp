#include "rbsos/lowerlevel.hpp"

#include "rbsos/errors.hpp"

#include <stdexcept>

namespace rbsos {

using conic::ConicProgram;
using conic::LinExpr;
using Eigen::VectorXd;

void LowerLevelProblem::validate() const {
  if (constraints.empty()) throw std::invalid_argument("lower level: at least one constraint required");
  if (c.size() != constraints.size()) throw std::invalid_argument("lower level: one c_j per constraint required");
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    constraints[j].validate();
    if (constraints[j].n() != n()) throw std::invalid_argument("lower level: constraint length differs from d0");
    if (c[j].size() != m()) throw std::invalid_argument("lower level: c_j length differs from c0");
  }
}

std::vector<AffineUncertainConstraint> LowerLevelProblem::at(const VectorXd& x) const {
  if (x.size() != m()) throw std::invalid_argument("lower level: x has the wrong length");
  std::vector<AffineUncertainConstraint> out;
  for (std::size_t j = 0; j < constraints.size(); ++j) out.push_back(constraints[j].shifted(c[j].dot(x)));
  return out;
}

bool robust_feasible_point(const LowerLevelProblem& prob, const VectorXd& x, const VectorXd& z, double tol) {
  prob.validate();
  if (z.size() != prob.n()) throw std::invalid_argument("lower level: z has the wrong length");
  for (const auto& con : prob.at(x))
    if (worst_case_value(con, z) > tol) return false;
  return true;
}

std::optional<double> s_lemma_multiplier(const AffineUncertainConstraint& con, const VectorXd& z, double tol) {
  const auto* ball = std::get_if<BallSet>(&con.set);
  if (!ball) throw std::invalid_argument("s_lemma_multiplier: ball constraint expected");
  const int s = con.s();
  const double rho2 = ball->radius * ball->radius;
  // u^T u <= rho^2  ==>  v^T u + w <= 0; S-lemma: t(rho^2 - u^T u) - v^T u - w >= 0 for all u
  VectorXd v(s);
  for (int i = 0; i < s; ++i) v(i) = con.b[static_cast<std::size_t>(i + 1)] - con.a[static_cast<std::size_t>(i + 1)].dot(z);
  const double w0 = con.b[0] - con.a[0].dot(z);
  ConicProgram prog;
  const int t = prog.add_nonneg(1);
  const int e = prog.add_free(1);
  const int mat = prog.add_psd(s + 1);
  for (int c = 0; c <= s; ++c)
    for (int r = c; r <= s; ++r) {
      LinExpr entry = ConicProgram::psd_entry(mat, s + 1, r, c);
      if (r == c) entry.add(e, 1.0);
      if (r == c && r < s) entry.add(t, -1.0);
      if (r == s && c < s) entry += LinExpr(-0.5 * v(c));
      if (r == s && c == s) {
        entry.add(t, rho2);
        entry += LinExpr(-w0);
      }
      prog.add_equality(entry);
    }
  prog.add_less_equal(LinExpr::var(e) + LinExpr(-1.0));
  prog.set_maximize(LinExpr::var(e));
  const auto sol = conic::solve(prog);
  if (sol.status == conic::SolveStatus::numerical_failure || sol.status == conic::SolveStatus::inaccurate)
    throw IndeterminateError("s_lemma_multiplier: solver stopped without a verdict");
  if (!sol.optimal() || sol.objective < -tol) return std::nullopt;
  return std::max(0.0, sol.x(t));
}

LowerVerdict is_robust_solution(const LowerLevelProblem& prob, const VectorXd& x, const VectorXd& y, double tol) {
  prob.validate();
  if (y.size() != prob.n()) throw std::invalid_argument("lower level: y has the wrong length");
  const auto shifted = prob.at(x);
  LowerVerdict out;
  out.closedness = closedness_sufficient(shifted, prob.n());

  LowerCertificate cert;
  out.feasible = true;
  for (const auto& con : shifted) {
    if (std::holds_alternative<BallSet>(con.set)) {
      const auto t = s_lemma_multiplier(con, y, tol);
      if (!t) {
        out.feasible = false;
        break;
      }
      cert.s_lemma.push_back(*t);
    } else if (worst_case_value(con, y) > tol) {
      out.feasible = false;
      break;
    }
  }
  if (!out.feasible) return out;

  FarkasOptions opts;
  opts.tol = tol;
  const auto search = find_certificate(prob.d0, prob.d0.dot(y), shifted, opts);
  out.dual_slack = search.best_slack;
  if (search.certificate) {
    cert.dual = *search.certificate;
    out.certificate = std::move(cert);
    out.robust_solution = true;
  } else {
    out.closedness_caveat = out.closedness == Closedness::unknown;
  }
  return out;
}

LowerSolution solve_lower_robust(const LowerLevelProblem& prob, const VectorXd& x) {
  prob.validate();
  const auto shifted = prob.at(x);
  const int n = prob.n();
  ConicProgram prog;
  const int z = prog.add_free(n);
  for (const auto& con : shifted) {
    if (const auto* box = std::get_if<BoxSet>(&con.set)) {
      for (const VectorXd& u : box_extreme_points(*box)) {
        LinExpr row(-con.b[0]);
        for (int i = 0; i < con.s(); ++i) row += LinExpr(-u(i) * con.b[static_cast<std::size_t>(i + 1)]);
        for (int k = 0; k < n; ++k) {
          double a = con.a[0](k);
          for (int i = 0; i < con.s(); ++i) a += u(i) * con.a[static_cast<std::size_t>(i + 1)](k);
          row.add(z + k, a);
        }
        prog.add_less_equal(row);
      }
      continue;
    }
    LinExpr c0(-con.b[0]);
    for (int k = 0; k < n; ++k) c0.add(z + k, con.a[0](k));
    std::vector<LinExpr> ci;
    for (int i = 1; i <= con.s(); ++i) {
      LinExpr e(-con.b[static_cast<std::size_t>(i)]);
      for (int k = 0; k < n; ++k) e.add(z + k, con.a[static_cast<std::size_t>(i)](k));
      ci.push_back(e);
    }
    add_robust_constraint(prog, con.set, c0, ci);
  }
  LinExpr obj(prob.c0.dot(x));
  for (int k = 0; k < n; ++k) obj.add(z + k, prob.d0(k));
  prog.set_objective(obj);
  const auto sol = conic::solve(prog);
  LowerSolution out;
  out.status = sol.status;
  if (sol.optimal()) {
    out.value = sol.objective;
    out.z = sol.x.segment(z, n);
  }
  return out;
}

}  // namespace rbsos
