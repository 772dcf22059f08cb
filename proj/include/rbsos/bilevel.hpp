#pragma once

#include "rbsos/farkas.hpp"
#include "rbsos/lowerlevel.hpp"
#include "rbsos/poly.hpp"
#include "rbsos/uncertainty.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rbsos {

// a^T x + b^T y <= c for every (a, b, c) in [a_lo, a_hi] x [b_lo, b_hi] x [c_lo, c_hi]
struct UpperBoxConstraint {
  Eigen::VectorXd a_lo, a_hi;  // length m
  Eigen::VectorXd b_lo, b_hi;  // length n
  double c_lo = 0.0, c_hi = 0.0;

  // (a_1..a_m, b_1..b_n, c) interval bounds in that order
  std::vector<std::pair<double, double>> bounds() const;
  // max over the box of a^T x + b^T y - c
  double worst_case(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
};

enum class LevelKind { box, ball };

struct BilevelProblem {
  std::string name;
  Polynomial f;  // over (x_1..x_m, y_1..y_n)
  int m = 0, n = 0;
  std::vector<UpperBoxConstraint> upper;
  // ball path only: constraints over the stacked vector (x, y)
  std::vector<AffineUncertainConstraint> upper_ball;
  LowerLevelProblem lower;
  bool assert_coercive = false;
  std::optional<Eigen::VectorXd> feasible_point;  // (x, y) stacked
  std::optional<double> kappa;

  // kind of the lower sets (all box or all ball)
  LevelKind kind() const;
  void validate() const;
};

enum class GTag { upper_extreme, lower_extreme, mu0_sign, mu_sign, dual_slack, dual_box };
std::string to_string(GTag tag);

struct SingleLevelProgram {
  VariableLayout layout;
  Polynomial objective;       // f lifted to the full variable space
  std::vector<Polynomial> g;  // g_i >= 0
  std::vector<GTag> tags;
  std::vector<int> source;    // position of each g in the unpruned list
  std::vector<Polynomial> h;  // h_j == 0
  int unpruned_count = 0;
  bool pruned = false;

  int num_vars() const { return layout.total(); }
  int max_degree() const;
};

// l 2^(m+n+1) + q (2^s + s + 1) + 2
std::size_t expected_g_count(int l, int m, int n, int q, int s);

// Requires symmetric boxes at the lower level. With prune set, identically
// zero and repeated g's are dropped; tags and source positions are kept.
SingleLevelProgram build_single_level(const BilevelProblem& prob, bool prune = true);

// Stacked (x, y, mu) point for evaluating g and h.
Eigen::VectorXd stack_point(const VariableLayout& layout, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& mu);

struct FeasibilityVerdict {
  bool feasible = false;
  bool upper_ok = false;
  bool lower_ok = false;           // y is a robust solution of the lower level at x
  double upper_violation = 0.0;    // largest worst-case upper row value
  std::optional<Eigen::VectorXd> mu;  // normalized multipliers in layout order
  std::optional<LowerVerdict> lower;
};

inline constexpr double kMu0Threshold = 1e-7;

// Box path. Throws IndeterminateError when the solver gives no verdict.
FeasibilityVerdict robust_feasible(const BilevelProblem& prob, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                   double tol = 1e-6);

struct BallFeasibilityCertificate {
  std::vector<double> upper_multipliers;  // one S-lemma multiplier per upper row
  std::vector<double> lower_multipliers;  // one per lower row
  FarkasCertificate dual;
};

struct BallFeasibilityVerdict {
  bool feasible = false;
  std::optional<BallFeasibilityCertificate> certificate;
  Closedness closedness = Closedness::unknown;
};

// Ball path: S-lemma LMIs for both levels plus the lower dual system with
// norm-cone rows on the multipliers.
BallFeasibilityVerdict ball_robust_feasible(const BilevelProblem& prob, const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& y, double tol = 1e-6);

struct CoercivityCheck {
  bool positive_definite = false;
  double min_eigenvalue = 0.0;
};

// Smallest eigenvalue of the exact Hessian of f at the point.
CoercivityCheck hessian_check(const Polynomial& f, const Eigen::VectorXd& point);

// Lower-level Slater test at a given x.
SlaterResult lower_slater(const BilevelProblem& prob, const Eigen::VectorXd& x);

}  // namespace rbsos
