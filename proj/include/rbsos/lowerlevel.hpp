#pragma once

#include "rbsos/conic.hpp"
#include "rbsos/farkas.hpp"
#include "rbsos/uncertainty.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace rbsos {

// min_z c0^T x + d0^T z  s.t.  c_j^T x + a_j(u)^T z <= b_j(u) for all u in U_j
struct LowerLevelProblem {
  Eigen::VectorXd c0;                               // length m
  Eigen::VectorXd d0;                               // length n
  std::vector<Eigen::VectorXd> c;                   // q vectors of length m
  std::vector<AffineUncertainConstraint> constraints;  // q constraints over z

  int m() const { return static_cast<int>(c0.size()); }
  int n() const { return static_cast<int>(d0.size()); }
  int q() const { return static_cast<int>(constraints.size()); }
  void validate() const;
  // the constraints at a fixed x: b0_j replaced by b0_j - c_j^T x
  std::vector<AffineUncertainConstraint> at(const Eigen::VectorXd& x) const;
};

bool robust_feasible_point(const LowerLevelProblem& prob, const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                           double tol = 1e-9);

// Multiplier t >= 0 making
//   [[t I, v/2], [v^T/2, -t - a0^T z + b0']] psd,  v_i = b_i - a_i^T z
// for a ball-constrained row (b0' = b0 - c^T x). Absent if none exists.
std::optional<double> s_lemma_multiplier(const AffineUncertainConstraint& con, const Eigen::VectorXd& z,
                                         double tol = 1e-6);

struct LowerCertificate {
  FarkasCertificate dual;
  std::vector<double> s_lemma;  // one per ball constraint, empty otherwise
};

struct LowerVerdict {
  bool feasible = false;
  bool robust_solution = false;
  std::optional<LowerCertificate> certificate;
  Closedness closedness = Closedness::unknown;
  // true when the verdict is negative and closedness was not established, so the
  // missing certificate does not prove y is not a solution
  bool closedness_caveat = false;
  double dual_slack = 0.0;  // best slack of the multiplier search
};

// Throws IndeterminateError when the solver gives no verdict.
LowerVerdict is_robust_solution(const LowerLevelProblem& prob, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                double tol = 1e-6);

struct LowerSolution {
  conic::SolveStatus status = conic::SolveStatus::numerical_failure;
  double value = 0.0;  // c0^T x + d0^T z*
  Eigen::VectorXd z;
};

// Direct solve of the robust counterpart: box rows by extreme points, ball rows
// by norm cones, spectrahedra by their dual LMI.
LowerSolution solve_lower_robust(const LowerLevelProblem& prob, const Eigen::VectorXd& x);

}  // namespace rbsos
