#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rbsos {

// Coefficients smaller than this in absolute value are dropped after arithmetic.
inline constexpr double kDropTolerance = 1e-12;

// Default cap on the number of monomials a basis may hold.
inline constexpr std::size_t kDefaultBasisCap = 200000;

class Monomial {
 public:
  Monomial() = default;

  static Monomial variable(int index, int power = 1);
  static Monomial from_exponents(std::span<const int> exponents);

  int degree() const { return degree_; }
  int exponent(int var) const;
  bool is_constant() const { return factors_.empty(); }

  // (variable, power) pairs sorted by variable, powers strictly positive.
  const std::vector<std::pair<int, int>>& factors() const { return factors_; }

  // Highest variable index used plus one (0 for the constant monomial).
  int span_vars() const { return factors_.empty() ? 0 : factors_.back().first + 1; }

  std::vector<int> dense(int nvars) const;
  double evaluate(std::span<const double> point) const;

  Monomial operator*(const Monomial& other) const;
  bool operator==(const Monomial& other) const = default;

 private:
  std::vector<std::pair<int, int>> factors_;
  int degree_ = 0;
};

// Graded lexicographic order: lower total degree first, then a larger power of
// the lowest-indexed variable first.
struct GrlexLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

struct MonomialHash {
  std::size_t operator()(const Monomial& m) const;
};

class Polynomial {
 public:
  using Terms = std::map<Monomial, double, GrlexLess>;

  explicit Polynomial(int nvars = 0) : nvars_(nvars) {}

  static Polynomial constant(int nvars, double value);
  static Polynomial variable(int nvars, int index);
  static Polynomial monomial(int nvars, const Monomial& m, double coeff = 1.0);

  int nvars() const { return nvars_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  // Maximum total degree of stored terms; 0 for the zero polynomial.
  int degree() const;
  // Maximum degree counting only variables in [first, last).
  int degree_in(int first, int last) const;

  double coefficient(const Monomial& m) const;
  void add_term(const Monomial& m, double coeff);

  double evaluate(std::span<const double> point) const;
  double evaluate(const Eigen::VectorXd& point) const {
    return evaluate(std::span<const double>(point.data(), static_cast<std::size_t>(point.size())));
  }

  Polynomial derivative(int var) const;
  double max_abs_coefficient() const;

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double scalar);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator-(Polynomial a) { return a *= -1.0; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);

  bool operator==(const Polynomial& other) const {
    return nvars_ == other.nvars_ && terms_ == other.terms_;
  }

  // Human-readable form; names[i] labels variable i, falling back to v<i>.
  std::string to_string(const std::vector<std::string>& names = {}) const;

 private:
  int nvars_ = 0;
  Terms terms_;
};

// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

class PolynomialParseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Reads the syntax written by Polynomial::to_string: numbers, named variables,
// v<i> for unnamed ones, + - * ^ and parentheses. nvars defaults to names.size().
Polynomial parse_polynomial(const std::string& text, const std::vector<std::string>& names, int nvars = -1);

std::size_t binomial(int n, int k);

// All monomials of total degree <= degree in graded-lex order.
std::vector<Monomial> monomial_basis(int nvars, int degree, std::size_t cap = kDefaultBasisCap);

// v(x)^T G v(x) for the monomial vector v given by basis.
Polynomial gram_expand(std::span<const Monomial> basis, const Eigen::MatrixXd& gram, int nvars);

// Symbolic Hessian entries d2p / dxi dxj.
std::vector<std::vector<Polynomial>> hessian(const Polynomial& p);

// Index registry for the (x, y, mu) space of the single-level program.
class VariableLayout {
 public:
  VariableLayout() = default;
  VariableLayout(int m, int n, int q, int s) : m_(m), n_(n), q_(q), s_(s) {}

  int m() const { return m_; }
  int n() const { return n_; }
  int q() const { return q_; }
  int s() const { return s_; }

  int x(int i) const { return i; }
  int y(int i) const { return m_ + i; }
  int mu0() const { return m_ + n_; }
  // k in 1..q
  int mu(int k) const { return m_ + n_ + k; }
  // k in 1..q, i in 1..s
  int mu(int k, int i) const { return m_ + n_ + 1 + q_ + (i - 1) * q_ + (k - 1); }

  int num_mu() const { return q_ * (s_ + 1) + 1; }
  int total() const { return m_ + n_ + num_mu(); }

  std::vector<std::string> names() const;

 private:
  int m_ = 0, n_ = 0, q_ = 0, s_ = 0;
};

}  // namespace rbsos
