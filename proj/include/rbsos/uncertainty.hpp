#pragma once

#include "rbsos/conic.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rbsos {

// Product of intervals [lo_i, hi_i].
struct BoxSet {
  std::vector<double> lo, hi;

  static BoxSet symmetric(const std::vector<double>& gamma);
  int dim() const { return static_cast<int>(lo.size()); }
  bool is_symmetric() const;
  // gamma_i of a symmetric box
  std::vector<double> gamma() const;
  bool contains(const Eigen::VectorXd& u, double tol = 0.0) const;
};

// Closed ball of the given radius centred at the origin.
struct BallSet {
  int dim = 1;
  double radius = 1.0;
  bool contains(const Eigen::VectorXd& u, double tol = 0.0) const;
};

// {u : A0 + sum_i u_i A_i psd}
struct Spectrahedron {
  std::vector<Eigen::MatrixXd> matrices;

  int dim() const { return static_cast<int>(matrices.size()) - 1; }
  int order() const { return matrices.empty() ? 0 : static_cast<int>(matrices[0].rows()); }
  Eigen::MatrixXd pencil(const Eigen::VectorXd& u) const;
  bool contains(const Eigen::VectorXd& u, double tol = 1e-9) const;
  void validate() const;
};

using UncertaintySet = std::variant<BoxSet, BallSet, Spectrahedron>;

int set_dim(const UncertaintySet& set);
std::string set_kind(const UncertaintySet& set);
bool set_contains(const UncertaintySet& set, const Eigen::VectorXd& u, double tol = 1e-9);

// a(u)^T z <= b(u) for all u in set, with a(u) = a0 + sum u_i a_i and b(u) likewise.
struct AffineUncertainConstraint {
  std::vector<Eigen::VectorXd> a;  // s+1 vectors of length n
  std::vector<double> b;           // s+1 scalars
  UncertaintySet set;

  int n() const { return a.empty() ? 0 : static_cast<int>(a[0].size()); }
  int s() const { return static_cast<int>(a.size()) - 1; }
  void validate() const;
  // the same constraint with b0 replaced by b0 - shift
  AffineUncertainConstraint shifted(double shift) const;
};

Spectrahedron box_to_spectrahedron(const std::vector<double>& gamma);
Spectrahedron box_to_spectrahedron(const BoxSet& box);
Spectrahedron ball_to_spectrahedron(int s, double radius = 1.0);
Spectrahedron to_spectrahedron(const UncertaintySet& set);

// 4096 unless RBSOS_MAX_ENUM is set.
std::size_t enumeration_cap();

// Vertices in binary counting order (first coordinate most significant, lo
// before hi); coordinates with lo == hi contribute a single value.
std::vector<Eigen::VectorXd> box_extreme_points(const std::vector<std::pair<double, double>>& bounds);
std::vector<Eigen::VectorXd> box_extreme_points(const BoxSet& box);
// All 2^s nominal vertices, repeated when edges are degenerate.
std::vector<Eigen::VectorXd> box_vertices_nominal(const std::vector<std::pair<double, double>>& bounds);

// c0 + c^T u
struct AffineFunction {
  double c0 = 0.0;
  Eigen::VectorXd c;
  double operator()(const Eigen::VectorXd& u) const { return c0 + c.dot(u); }
};

// Returns -infinity for an empty spectrahedron.
double max_affine_over_set(const AffineFunction& f, const UncertaintySet& set);

// max over the set of a(u)^T z - b(u) + shift
double worst_case_value(const AffineUncertainConstraint& con, const Eigen::VectorXd& z, double shift = 0.0);

// Adds rows enforcing c0 + max_{u in set} sum_i u_i c_i <= 0 where c0 and c_i are
// affine in the program's variables.
void add_robust_constraint(conic::ConicProgram& prog, const UncertaintySet& set, const conic::LinExpr& c0,
                           const std::vector<conic::LinExpr>& ci);

// Adds rows enforcing l0*A0 + sum_i li*A_i psd for the set's pencil.
void add_pencil_constraint(conic::ConicProgram& prog, const UncertaintySet& set, const conic::LinExpr& l0,
                           const std::vector<conic::LinExpr>& li);
// Same test on numbers.
bool pencil_psd(const UncertaintySet& set, double l0, const Eigen::VectorXd& li, double tol);

struct SlaterResult {
  bool holds = false;
  double slack = 0.0;
  std::optional<Eigen::VectorXd> witness;
};

inline constexpr double kSlaterThreshold = 1e-7;

// Strict robust feasibility of {z : a_j(u)^T z < b_j(u) for all u, j}.
SlaterResult slater_check(const std::vector<AffineUncertainConstraint>& constraints, int nvars);

enum class Closedness { polytope, slater, unknown };
std::string to_string(Closedness c);
Closedness closedness_sufficient(const std::vector<AffineUncertainConstraint>& constraints, int nvars);

}  // namespace rbsos
