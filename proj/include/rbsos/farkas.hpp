#pragma once

#include "rbsos/conic.hpp"
#include "rbsos/uncertainty.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace rbsos {

// Multipliers certifying  a_j(u)^T x <= b_j(u) for all u, j  ==>  p^T x >= r.
struct FarkasCertificate {
  std::vector<double> lambda0;           // one per constraint, >= 0
  std::vector<Eigen::VectorXd> lambda;   // one vector of length s_j per constraint
  double slack = 0.0;                    // -r - sum_j (lambda0_j b0_j + sum_i lambda_j^i b_j^i)
};

struct FarkasOptions {
  // upper bound on every lambda0_j; keeps the search compact
  double multiplier_bound = 1e4;
  // slack is maximized but capped here
  double slack_cap = 1.0;
  // a certificate needs maximized slack >= -tol
  double tol = 1e-6;
};

struct FarkasSearch {
  std::optional<FarkasCertificate> certificate;
  conic::SolveStatus status = conic::SolveStatus::numerical_failure;
  // best slack the search reached (meaningful when status is optimal)
  double best_slack = 0.0;
  // residual of the solver's infeasibility ray when status is infeasible
  double ray_residual = 0.0;
  int iterations = 0;
};

// Throws IndeterminateError when the solver stops without a verdict.
FarkasSearch find_certificate(const Eigen::VectorXd& p, double r,
                              const std::vector<AffineUncertainConstraint>& constraints,
                              const FarkasOptions& options = {});

struct CertificateResiduals {
  double stationarity = 0.0;  // ||p + sum_j (lambda0_j a0_j + sum_i lambda_j^i a_j^i)||
  double slack = 0.0;         // the slack value itself (should be >= -tol)
  double sign = 0.0;          // min_j lambda0_j
  double pencil = 0.0;        // min_j lambda_min of the pencil at the multipliers (absolute)
  double scale = 1.0;         // magnitude the stationarity test is relative to
};

CertificateResiduals certificate_residuals(const FarkasCertificate& cert, const Eigen::VectorXd& p, double r,
                                           const std::vector<AffineUncertainConstraint>& constraints);

bool verify_certificate(const FarkasCertificate& cert, const Eigen::VectorXd& p, double r,
                        const std::vector<AffineUncertainConstraint>& constraints, double tol = 1e-6);

struct ImplicationSample {
  bool holds = true;
  std::optional<Eigen::VectorXd> witness;  // feasible x with p^T x < r - tol
  std::size_t feasible_points = 0;
  double min_value = 0.0;                  // smallest p^T x - r seen
};

// Samples feasible points inside [-radius, radius]^n: projections of random
// box points, extreme points in random directions, the minimizer of p^T x,
// and random convex combinations of those.
ImplicationSample check_implication_sampled(const Eigen::VectorXd& p, double r,
                                            const std::vector<AffineUncertainConstraint>& constraints,
                                            std::size_t n_samples, double tol = 1e-6, std::uint64_t seed = 1,
                                            double radius = 10.0);

}  // namespace rbsos
