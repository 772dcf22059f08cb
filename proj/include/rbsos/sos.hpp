#pragma once

#include "rbsos/bilevel.hpp"
#include "rbsos/conic.hpp"
#include "rbsos/poly.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rbsos {

// One psd Gram block: the multiplier is v^T G v over `basis`, and it enters
// the identity multiplied by `weight`.
struct GramBlock {
  enum class Role { sigma0, sigma, zeta };
  Role role = Role::sigma;
  int g_index = -1;  // position in the g list for Role::sigma
  int degree = 0;    // basis degree
  std::vector<Monomial> basis;
  Polynomial weight;
  int start = 0;     // first conic variable of the block
};

// Free coefficient vector of xi_j over all monomials of degree <= k - deg h_j.
struct FreeBlock {
  int h_index = 0;
  std::vector<Monomial> basis;
  int start = 0;
};

struct RelaxationLevel {
  int k = 0;
  double kappa = 0.0;
  int nvars = 0;
  conic::ConicProgram conic;
  std::vector<GramBlock> grams;  // sigma0 first
  std::vector<FreeBlock> xis;
  std::vector<Monomial> rows;    // monomial matched by each equality row
  int t_index = 0;
  std::vector<int> absorbed;     // positive constant g's merged into sigma0
};

class DegreeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline int round_up_even(int k) { return k % 2 == 0 ? k : k + 1; }

// f - sum sigma_i g_i - sum xi_j h_j - zeta (kappa - f) - t = sigma0, maximize t.
// Throws DegreeError when k is below the degree of f, some g_i or some h_j.
RelaxationLevel build_relaxation(const SingleLevelProgram& slp, double kappa, int k,
                                 std::size_t basis_cap = kDefaultBasisCap);

struct SosMultipliers {
  double t = 0.0;
  Eigen::MatrixXd sigma0_gram;
  std::vector<Monomial> sigma0_basis;
  Polynomial sigma0;
  std::vector<Polynomial> sigma;      // one per g, zero when absent
  std::vector<Eigen::MatrixXd> sigma_grams;
  std::vector<std::vector<Monomial>> sigma_bases;
  Polynomial zeta;
  Eigen::MatrixXd zeta_gram;
  std::vector<Monomial> zeta_basis;
  std::vector<Polynomial> xi;
};

// f - sum sigma_i g_i - sum xi_j h_j - zeta (kappa - f) - t - sigma0
Polynomial identity_residual(const SingleLevelProgram& slp, double kappa, const SosMultipliers& mult);

// G ~ sum v_j v_j^T, f_j = v_j^T basis. Throws std::invalid_argument when
// lambda_min(G) < -tol.
std::vector<Polynomial> extract_sos_decomposition(const Eigen::MatrixXd& gram, const std::vector<Monomial>& basis,
                                                  int nvars, double tol = 1e-6);

enum class LevelStatus { solved, rejected, infeasible, unbounded, failed };
std::string to_string(LevelStatus s);

struct LevelResult {
  int k = 0;
  LevelStatus status = LevelStatus::failed;
  double value = 0.0;  // -inf when rejected or infeasible
  std::string message;
  int iterations = 0;
  double seconds = 0.0;
  int rows = 0, variables = 0, largest_block = 0;
  double identity_residual = 0.0;       // coefficient max-norm
  double decomposition_residual = 0.0;  // worst Gram reconstruction error
  double min_gram_eigenvalue = 0.0;
  std::optional<SosMultipliers> multipliers;
};

struct SosOptions {
  double tol = 1e-6;
  conic::SolverSettings solver;
  std::size_t basis_cap = kDefaultBasisCap;
  std::string dump_dir;  // when set, each level's conic program is written there
};

LevelResult solve_level(const SingleLevelProgram& slp, double kappa, int k, const SosOptions& options = {});

class HypothesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HypothesisReport {
  bool point_feasible = false;
  bool coercive = false;
  std::string coercivity_source;  // "asserted", "hessian" or "none"
  bool lsc = false;
  int lsc_points = 0;
  std::vector<std::string> warnings;
  bool ok() const { return point_feasible && coercive && lsc; }
};

// Robust feasibility of the point, coercivity (assertion or Hessian) and the
// lower-level Slater condition at a set of sampled x values.
HypothesisReport check_hypotheses(const BilevelProblem& prob, const Eigen::VectorXd& point, double tol = 1e-6);

struct HierarchyOptions {
  int k_min = 0;  // 0 picks the largest degree in the program, rounded up to even
  int k_max = 0;  // 0 picks k_min + 4
  std::optional<double> kappa;
  SosOptions sos;
};

struct HierarchyReport {
  std::vector<LevelResult> levels;
  double kappa = 0.0;
  Eigen::VectorXd point;
  double point_value = 0.0;
  bool monotone = true;
  double best_bound = 0.0;  // -inf when no level solved
  HypothesisReport hypotheses;
  int g_count = 0, h_count = 0, nvars = 0;
};

// Throws HypothesisError when the point is not robust feasible or kappa < f(point).
HierarchyReport run_hierarchy(const BilevelProblem& prob, const Eigen::VectorXd& point,
                              const HierarchyOptions& options = {});

struct CertifyResult {
  bool found = false;
  double target = 0.0;  // f at the candidate
  double t_star = 0.0;  // best t of the degree-k program
  LevelResult level;
  std::optional<SosMultipliers> certificate;  // identity with t = target
  double identity_residual = 0.0;
  std::string note;
};

// Searches f - sum sigma_i g_i - sum xi_j h_j - zeta (kappa - f) - f(point) = sigma0 at degree k.
CertifyResult certify_global(const BilevelProblem& prob, const Eigen::VectorXd& point, double kappa, int k,
                             const SosOptions& options = {});

// The representation with t = target from an already solved level; needs
// t* >= target - tol and re-verifies the shifted identity.
CertifyResult certify_from_level(const SingleLevelProgram& slp, double kappa, double target, LevelResult level,
                                 double tol);

// Multipliers as polynomial literals, one "name = expression" per line; Gram
// multipliers are written as sums of squares.
void write_certificate(std::ostream& os, const SosMultipliers& mult, const VariableLayout& layout);
std::map<std::string, Polynomial> read_certificate(std::istream& is, const VariableLayout& layout);

}  // namespace rbsos
