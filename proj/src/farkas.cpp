#include "rbsos/farkas.hpp"

#include "rbsos/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>

namespace rbsos {

using conic::ConicProgram;
using conic::LinExpr;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void check_dims(const VectorXd& p, const std::vector<AffineUncertainConstraint>& constraints) {
  for (const auto& c : constraints) {
    c.validate();
    if (c.n() != p.size()) throw std::invalid_argument("farkas: constraint length differs from the target vector");
  }
}

}  // namespace

FarkasSearch find_certificate(const VectorXd& p, double r, const std::vector<AffineUncertainConstraint>& constraints,
                              const FarkasOptions& options) {
  check_dims(p, constraints);
  const auto n = p.size();
  ConicProgram prog;
  std::vector<int> l0(constraints.size()), li(constraints.size());
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    l0[j] = prog.add_nonneg(1);
    li[j] = prog.add_free(constraints[j].s());
  }
  const int delta = prog.add_free(1);

  for (Eigen::Index k = 0; k < n; ++k) {
    LinExpr e(p(k));
    for (std::size_t j = 0; j < constraints.size(); ++j) {
      const auto& c = constraints[j];
      e.add(l0[j], c.a[0](k));
      for (int i = 0; i < c.s(); ++i) e.add(li[j] + i, c.a[static_cast<std::size_t>(i + 1)](k));
    }
    prog.add_equality(e);
  }
  // delta <= -r - sum_j (l0 b0 + sum_i li bi)
  LinExpr slack = LinExpr::var(delta) + LinExpr(r);
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    const auto& c = constraints[j];
    slack.add(l0[j], c.b[0]);
    for (int i = 0; i < c.s(); ++i) slack.add(li[j] + i, c.b[static_cast<std::size_t>(i + 1)]);
  }
  prog.add_less_equal(slack);
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    std::vector<LinExpr> lin;
    for (int i = 0; i < constraints[j].s(); ++i) lin.push_back(LinExpr::var(li[j] + i));
    add_pencil_constraint(prog, constraints[j].set, LinExpr::var(l0[j]), lin);
    prog.add_less_equal(LinExpr::var(l0[j]) + LinExpr(-options.multiplier_bound));
  }
  prog.add_less_equal(LinExpr::var(delta) + LinExpr(-options.slack_cap));
  prog.set_maximize(LinExpr::var(delta));

  const auto sol = conic::solve(prog);
  FarkasSearch out;
  out.status = sol.status;
  out.iterations = sol.iterations;
  switch (sol.status) {
    case conic::SolveStatus::numerical_failure:
    case conic::SolveStatus::inaccurate:
      throw IndeterminateError("find_certificate: solver stopped without a verdict");
    case conic::SolveStatus::infeasible:
      out.ray_residual = sol.certificate_residual;
      return out;
    case conic::SolveStatus::unbounded:
      throw IndeterminateError("find_certificate: multiplier program reported unbounded");
    case conic::SolveStatus::optimal:
      break;
  }
  out.best_slack = sol.objective;
  if (out.best_slack < -options.tol) return out;
  FarkasCertificate cert;
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    cert.lambda0.push_back(std::max(0.0, sol.x(l0[j])));
    cert.lambda.push_back(sol.x.segment(li[j], constraints[j].s()));
  }
  cert.slack = certificate_residuals(cert, p, r, constraints).slack;
  out.certificate = std::move(cert);
  return out;
}

CertificateResiduals certificate_residuals(const FarkasCertificate& cert, const VectorXd& p, double r,
                                           const std::vector<AffineUncertainConstraint>& constraints) {
  if (cert.lambda0.size() != constraints.size() || cert.lambda.size() != constraints.size())
    throw std::invalid_argument("certificate: one multiplier block per constraint expected");
  CertificateResiduals res;
  VectorXd station = p;
  double slack = -r;
  double scale = 1.0 + p.norm() + std::abs(r);
  res.sign = std::numeric_limits<double>::infinity();
  res.pencil = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    const auto& c = constraints[j];
    const double l0 = cert.lambda0[j];
    const VectorXd& li = cert.lambda[j];
    if (li.size() != c.s()) throw std::invalid_argument("certificate: multiplier length mismatch");
    station += l0 * c.a[0];
    slack -= l0 * c.b[0];
    scale += std::abs(l0) * (c.a[0].norm() + std::abs(c.b[0]));
    for (int i = 0; i < c.s(); ++i) {
      station += li(i) * c.a[static_cast<std::size_t>(i + 1)];
      slack -= li(i) * c.b[static_cast<std::size_t>(i + 1)];
      scale += std::abs(li(i)) * (c.a[static_cast<std::size_t>(i + 1)].norm() + std::abs(c.b[static_cast<std::size_t>(i + 1)]));
    }
    res.sign = std::min(res.sign, l0);
    const Spectrahedron sp = to_spectrahedron(c.set);
    MatrixXd m = l0 * sp.matrices[0];
    for (int i = 0; i < sp.dim(); ++i) m += li(i) * sp.matrices[static_cast<std::size_t>(i + 1)];
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    res.pencil = std::min(res.pencil, es.eigenvalues()(0));
  }
  if (constraints.empty()) res.sign = res.pencil = 0.0;
  res.stationarity = station.norm();
  res.slack = slack;
  res.scale = scale;
  return res;
}

bool verify_certificate(const FarkasCertificate& cert, const VectorXd& p, double r,
                        const std::vector<AffineUncertainConstraint>& constraints, double tol) {
  CertificateResiduals res;
  try {
    res = certificate_residuals(cert, p, r, constraints);
  } catch (const std::invalid_argument&) {
    return false;
  }
  return res.stationarity <= tol * res.scale && res.slack >= -tol * res.scale && res.sign >= -1e-9 &&
         res.pencil >= -tol;
}

namespace {

class FeasibleSampler {
 public:
  FeasibleSampler(const std::vector<AffineUncertainConstraint>& cons, int n, double radius)
      : cons_(cons), n_(n), radius_(radius) {}

  // argmin of obj over the robust set intersected with the box; nullopt if empty
  std::optional<VectorXd> solve(const std::function<void(ConicProgram&, int)>& objective) {
    ConicProgram prog;
    const int x = prog.add_free(n_);
    for (const auto& c : cons_) {
      LinExpr c0(-c.b[0]);
      for (int k = 0; k < n_; ++k) c0.add(x + k, c.a[0](k));
      std::vector<LinExpr> ci;
      for (int i = 1; i <= c.s(); ++i) {
        LinExpr e(-c.b[static_cast<std::size_t>(i)]);
        for (int k = 0; k < n_; ++k) e.add(x + k, c.a[static_cast<std::size_t>(i)](k));
        ci.push_back(e);
      }
      add_robust_constraint(prog, c.set, c0, ci);
    }
    for (int k = 0; k < n_; ++k) {
      prog.add_less_equal(LinExpr::var(x + k) + LinExpr(-radius_));
      prog.add_greater_equal(LinExpr::var(x + k) + LinExpr(radius_));
    }
    objective(prog, x);
    const auto sol = conic::solve(prog);
    if (sol.status == conic::SolveStatus::infeasible) {
      empty_ = true;
      return std::nullopt;
    }
    if (!sol.optimal()) return std::nullopt;
    return VectorXd(sol.x.segment(x, n_));
  }

  std::optional<VectorXd> project(const VectorXd& target) {
    return solve([&](ConicProgram& prog, int x) {
      const int q = prog.add_soc(n_ + 1);
      for (int k = 0; k < n_; ++k) prog.add_equality(LinExpr::var(q + 1 + k) - LinExpr::var(x + k) + LinExpr(target(k)));
      prog.set_objective(LinExpr::var(q));
    });
  }

  std::optional<VectorXd> minimize(const VectorXd& dir) {
    return solve([&](ConicProgram& prog, int x) {
      LinExpr obj;
      for (int k = 0; k < n_; ++k) obj.add(x + k, dir(k));
      prog.set_objective(obj);
    });
  }

  double violation(const VectorXd& z) const {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& c : cons_) v = std::max(v, worst_case_value(c, z));
    return v;
  }

  bool empty() const { return empty_; }

 private:
  const std::vector<AffineUncertainConstraint>& cons_;
  int n_;
  double radius_;
  bool empty_ = false;
};

}  // namespace

ImplicationSample check_implication_sampled(const VectorXd& p, double r,
                                            const std::vector<AffineUncertainConstraint>& constraints,
                                            std::size_t n_samples, double tol, std::uint64_t seed, double radius) {
  check_dims(p, constraints);
  const int n = static_cast<int>(p.size());
  ImplicationSample out;
  out.min_value = std::numeric_limits<double>::infinity();
  if (n_samples == 0) return out;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-radius, radius);
  std::normal_distribution<double> gauss;

  FeasibleSampler sampler(constraints, n, radius);
  std::optional<VectorXd> interior;
  double interior_margin = 0.0;
  try {
    const auto sl = slater_check(constraints, n);
    if (sl.holds && sl.witness && sl.witness->cwiseAbs().maxCoeff() <= radius) {
      interior = *sl.witness;
      interior_margin = sl.slack;
    }
  } catch (const IndeterminateError&) {
  }

  std::vector<VectorXd> raw;
  if (auto x = sampler.minimize(p)) raw.push_back(*x);
  if (sampler.empty()) return out;
  const std::size_t per_kind = std::min<std::size_t>(n_samples, 16);
  for (std::size_t k = 0; k < per_kind; ++k) {
    VectorXd t(n), d(n);
    for (int i = 0; i < n; ++i) {
      t(i) = box(rng);
      d(i) = gauss(rng);
    }
    if (auto x = sampler.project(t)) raw.push_back(*x);
    if (auto x = sampler.minimize(d)) raw.push_back(*x);
  }

  // Feasible anchors. A point only counts as a witness when its violation is
  // below tol^2 / (2(1 + |x|)): near a set without interior a violation v can
  // move a linear function by sqrt(2 v |x|).
  std::vector<VectorXd> anchors;
  auto consider = [&](const VectorXd& x) {
    const double v = sampler.violation(x);
    const double size = 1.0 + x.norm();
    if (v > 1e-9 * size) return;
    anchors.push_back(x);
    const double val = p.dot(x) - r;
    out.min_value = std::min(out.min_value, val);
    if (val < -tol && v <= tol * tol / (2.0 * size) && !out.witness) {
      out.holds = false;
      out.witness = x;
    }
  };
  for (const VectorXd& x : raw) {
    if (interior) {
      // pull towards the strictly feasible point so the violation turns negative
      const double v = std::max(sampler.violation(x), 1e-12);
      const double theta = std::min(0.5, 10.0 * v / interior_margin);
      consider(x + theta * (*interior - x));
    }
    for (double h : {1e-2, 1e-3}) consider((x / h).array().round().matrix() * h);
    if (!interior) consider(x);
  }
  if (anchors.empty()) return out;

  std::uniform_int_distribution<std::size_t> pick(0, anchors.size() - 1);
  std::exponential_distribution<double> expo(1.0);
  while (out.feasible_points < n_samples) {
    if (out.feasible_points < anchors.size()) {
      ++out.feasible_points;
      continue;
    }
    VectorXd x = VectorXd::Zero(n);
    double total = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double w = expo(rng);
      x += w * anchors[pick(rng)];
      total += w;
    }
    x /= total;
    out.min_value = std::min(out.min_value, p.dot(x) - r);
    ++out.feasible_points;
  }
  return out;
}

}  // namespace rbsos
