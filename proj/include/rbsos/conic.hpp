#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace rbsos::conic {

enum class ConeKind { free, nonneg, soc, psd };

// A contiguous slice of the variable vector. For psd cones `order` is the
// matrix dimension and size = order*(order+1)/2.
struct Cone {
  ConeKind kind;
  int start;
  int size;
  int order;
};

int svec_size(int order);
// Position of entry (row, col) of a symmetric matrix inside its svec.
// Lower triangle, column by column.
int svec_index(int order, int row, int col);
// Factor applied to the matrix entry when it is stored in the svec.
inline double svec_scale(int row, int col);

Eigen::VectorXd svec(const Eigen::MatrixXd& m);
Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v, int order);

// Affine expression sum(coef * var) + constant.
struct LinExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  LinExpr() = default;
  explicit LinExpr(double c) : constant(c) {}
  static LinExpr var(int index, double coef = 1.0) {
    LinExpr e;
    e.terms.emplace_back(index, coef);
    return e;
  }

  LinExpr& add(int index, double coef) {
    if (coef != 0.0) terms.emplace_back(index, coef);
    return *this;
  }
  LinExpr& add(const LinExpr& other, double scale = 1.0);
  LinExpr& operator+=(const LinExpr& o) { return add(o, 1.0); }
  LinExpr& operator-=(const LinExpr& o) { return add(o, -1.0); }
  LinExpr& operator*=(double s);
  LinExpr& operator+=(double c) {
    constant += c;
    return *this;
  }

  friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
  friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
  friend LinExpr operator*(LinExpr a, double s) { return a *= s; }
  friend LinExpr operator*(double s, LinExpr a) { return a *= s; }

  double evaluate(const Eigen::VectorXd& x) const;
};

struct Triplet {
  int row;
  int col;
  double value;
};

// minimize c^T x + c0  s.t.  A x = b,  x in K1 x ... x Kp
class ConicProgram {
 public:
  int add_free(int count);
  int add_nonneg(int count);
  int add_soc(int dim);
  int add_psd(int order);

  // Expression for entry (r, c) of the psd matrix whose slice starts at `start`.
  static LinExpr psd_entry(int start, int order, int r, int c);

  // expr == 0
  int add_equality(const LinExpr& expr);
  // expr <= 0, through a fresh nonnegative slack
  int add_less_equal(const LinExpr& expr);
  // expr >= 0
  int add_greater_equal(const LinExpr& expr);

  void set_objective(const LinExpr& expr);  // minimized
  void set_maximize(const LinExpr& expr);   // stored negated

  int num_variables() const { return num_vars_; }
  int num_rows() const { return static_cast<int>(b_.size()); }
  const std::vector<Cone>& cones() const { return cones_; }
  const std::vector<Triplet>& entries() const { return entries_; }
  const std::vector<double>& rhs() const { return b_; }
  Eigen::VectorXd objective() const;
  double objective_constant() const { return c0_; }
  bool maximize() const { return maximize_; }
  const Cone& cone_of(int var) const;

  // Throws std::invalid_argument when a variable index or cone is malformed.
  void validate() const;

  // Sparse text dump, one nonzero per line.
  void write_dump(std::ostream& os) const;

 private:
  int add_cone(ConeKind kind, int size, int order);

  int num_vars_ = 0;
  std::vector<Cone> cones_;
  std::vector<int> cone_index_;  // per variable
  std::vector<Triplet> entries_;
  std::vector<double> b_;
  std::vector<std::pair<int, double>> c_;
  double c0_ = 0.0;
  bool maximize_ = false;
};

// inaccurate: the iteration stalled; x, y, s hold the best iterate seen, whose
// residuals and gap are within tol_inaccurate.
enum class SolveStatus { optimal, inaccurate, infeasible, unbounded, numerical_failure };

std::string to_string(SolveStatus s);

struct SolverSettings {
  double tol_feas = 1e-8;
  double tol_gap = 1e-8;
  double tol_infeas = 1e-8;
  double tol_inaccurate = 1e-5;
  int max_iter = 200;
  bool verbose = false;
};

struct ConicSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  Eigen::VectorXd x;  // primal
  Eigen::VectorXd y;  // equality multipliers
  Eigen::VectorXd s;  // dual slacks
  // objective in the caller's sense (maximization programs report the maximum)
  double objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  // For infeasible: ||A^T y + s|| / b^T y of the normalized ray.
  // For unbounded: ||A x|| / -c^T x.
  double certificate_residual = 0.0;
  Eigen::VectorXd ray;

  bool optimal() const { return status == SolveStatus::optimal; }
};

ConicSolution solve(const ConicProgram& prog, const SolverSettings& settings = {});

// lambda_min(M) >= -tol * (1 + ||M||_2). Throws if M is not symmetric within 1e-10.
bool psd_check(const Eigen::MatrixXd& m, double tol);

inline double svec_scale(int row, int col) { return row == col ? 1.0 : 1.4142135623730951; }

}  // namespace rbsos::conic
