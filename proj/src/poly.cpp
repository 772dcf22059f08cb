#include "rbsos/poly.hpp"

#include "rbsos/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rbsos {

Monomial Monomial::variable(int index, int power) {
  if (index < 0 || power < 0) throw std::invalid_argument("monomial: negative index or power");
  Monomial m;
  if (power > 0) {
    m.factors_.emplace_back(index, power);
    m.degree_ = power;
  }
  return m;
}

Monomial Monomial::from_exponents(std::span<const int> exponents) {
  Monomial m;
  for (std::size_t i = 0; i < exponents.size(); ++i) {
    if (exponents[i] < 0) throw std::invalid_argument("monomial: negative exponent");
    if (exponents[i] > 0) {
      m.factors_.emplace_back(static_cast<int>(i), exponents[i]);
      m.degree_ += exponents[i];
    }
  }
  return m;
}

int Monomial::exponent(int var) const {
  for (const auto& [v, p] : factors_) {
    if (v == var) return p;
    if (v > var) break;
  }
  return 0;
}

std::vector<int> Monomial::dense(int nvars) const {
  std::vector<int> e(static_cast<std::size_t>(nvars), 0);
  for (const auto& [v, p] : factors_) {
    if (v >= nvars) throw std::invalid_argument("monomial: variable outside ambient space");
    e[static_cast<std::size_t>(v)] = p;
  }
  return e;
}

double Monomial::evaluate(std::span<const double> point) const {
  double r = 1.0;
  for (const auto& [v, p] : factors_) {
    const double base = point[static_cast<std::size_t>(v)];
    double t = 1.0;
    for (int k = 0; k < p; ++k) t *= base;
    r *= t;
  }
  return r;
}

Monomial Monomial::operator*(const Monomial& other) const {
  Monomial r;
  r.factors_.reserve(factors_.size() + other.factors_.size());
  auto a = factors_.begin();
  auto b = other.factors_.begin();
  while (a != factors_.end() || b != other.factors_.end()) {
    if (b == other.factors_.end() || (a != factors_.end() && a->first < b->first)) {
      r.factors_.push_back(*a++);
    } else if (a == factors_.end() || b->first < a->first) {
      r.factors_.push_back(*b++);
    } else {
      r.factors_.emplace_back(a->first, a->second + b->second);
      ++a;
      ++b;
    }
  }
  r.degree_ = degree_ + other.degree_;
  return r;
}

bool GrlexLess::operator()(const Monomial& a, const Monomial& b) const {
  if (a.degree() != b.degree()) return a.degree() < b.degree();
  // Same degree: compare exponent vectors lexicographically, larger first.
  const auto& fa = a.factors();
  const auto& fb = b.factors();
  std::size_t i = 0;
  for (; i < fa.size() && i < fb.size(); ++i) {
    if (fa[i].first != fb[i].first) return fa[i].first < fb[i].first;
    if (fa[i].second != fb[i].second) return fa[i].second > fb[i].second;
  }
  // With equal degree one list cannot be a strict prefix of the other.
  return false;
}

std::size_t MonomialHash::operator()(const Monomial& m) const {
  std::size_t h = 1469598103934665603ull;
  for (const auto& [v, p] : m.factors()) {
    h ^= static_cast<std::size_t>(v) * 31u + static_cast<std::size_t>(p);
    h *= 1099511628211ull;
  }
  return h;
}

Polynomial Polynomial::constant(int nvars, double value) {
  Polynomial p(nvars);
  p.add_term(Monomial{}, value);
  return p;
}

Polynomial Polynomial::variable(int nvars, int index) {
  if (index < 0 || index >= nvars) throw std::invalid_argument("polynomial: variable index out of range");
  Polynomial p(nvars);
  p.add_term(Monomial::variable(index), 1.0);
  return p;
}

Polynomial Polynomial::monomial(int nvars, const Monomial& m, double coeff) {
  Polynomial p(nvars);
  p.add_term(m, coeff);
  return p;
}

int Polynomial::degree() const {
  // terms_ is graded, so the last key carries the maximum degree
  return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
}

int Polynomial::degree_in(int first, int last) const {
  int d = 0;
  for (const auto& [m, c] : terms_) {
    int part = 0;
    for (const auto& [v, p] : m.factors())
      if (v >= first && v < last) part += p;
    d = std::max(d, part);
  }
  return d;
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Monomial& m, double coeff) {
  if (m.span_vars() > nvars_) throw std::invalid_argument("polynomial: monomial outside ambient space");
  if (coeff == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(m, coeff);
  if (!inserted) it->second += coeff;
  if (std::abs(it->second) < kDropTolerance) terms_.erase(it);
}

double Polynomial::evaluate(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != nvars_)
    throw std::invalid_argument("poly_eval: point has length " + std::to_string(point.size()) +
                                ", expected " + std::to_string(nvars_));
  double r = 0.0;
  for (const auto& [m, c] : terms_) r += c * m.evaluate(point);
  return r;
}

Polynomial Polynomial::derivative(int var) const {
  Polynomial d(nvars_);
  for (const auto& [m, c] : terms_) {
    const int p = m.exponent(var);
    if (p == 0) continue;
    std::vector<int> e = m.dense(nvars_);
    e[static_cast<std::size_t>(var)] -= 1;
    d.add_term(Monomial::from_exponents(e), c * p);
  }
  return d;
}

double Polynomial::max_abs_coefficient() const {
  double r = 0.0;
  for (const auto& [m, c] : terms_) r = std::max(r, std::abs(c));
  return r;
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  if (other.nvars_ != nvars_) throw std::invalid_argument("polynomial: nvars mismatch");
  for (const auto& [m, c] : other.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  if (other.nvars_ != nvars_) throw std::invalid_argument("polynomial: nvars mismatch");
  for (const auto& [m, c] : other.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double scalar) {
  if (scalar == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= scalar;
    if (std::abs(it->second) < kDropTolerance)
      it = terms_.erase(it);
    else
      ++it;
  }
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.nvars_ != b.nvars_) throw std::invalid_argument("poly_mul: nvars mismatch");
  // accumulate before dropping so cancellations are resolved exactly once
  Polynomial::Terms acc;
  for (const auto& [ma, ca] : a.terms_)
    for (const auto& [mb, cb] : b.terms_) acc[ma * mb] += ca * cb;
  Polynomial r(a.nvars_);
  for (auto& [m, c] : acc)
    if (std::abs(c) >= kDropTolerance) r.terms_.emplace_hint(r.terms_.end(), m, c);
  return r;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string Polynomial::to_string(const std::vector<std::string>& names) const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [m, c] : terms_) {
    double mag = c;
    if (!first) {
      os << (c < 0 ? " - " : " + ");
      mag = std::abs(c);
    }
    const bool unit = std::abs(mag - 1.0) < 1e-15 && !m.is_constant();
    const bool neg_unit = first && std::abs(mag + 1.0) < 1e-15 && !m.is_constant();
    if (neg_unit)
      os << "-";
    else if (!unit)
      os << format_number(mag);
    bool sep = !(unit || neg_unit);
    for (const auto& [v, p] : m.factors()) {
      if (sep) os << "*";
      sep = true;
      if (static_cast<std::size_t>(v) < names.size())
        os << names[static_cast<std::size_t>(v)];
      else
        os << "v" << v;
      if (p > 1) os << "^" << p;
    }
    first = false;
  }
  return os.str();
}

namespace {

class Parser {
 public:
  Parser(const std::string& text, const std::vector<std::string>& names, int nvars)
      : text_(text), names_(names), nvars_(nvars) {}

  Polynomial run() {
    Polynomial p = expr();
    skip();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw PolynomialParseError("polynomial literal, column " + std::to_string(pos_ + 1) + ": " + what);
  }
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Polynomial expr() {
    Polynomial p = term();
    for (;;) {
      if (eat('+'))
        p += term();
      else if (eat('-'))
        p -= term();
      else
        return p;
    }
  }
  Polynomial term() {
    Polynomial p = unary();
    while (eat('*')) p = p * unary();
    return p;
  }
  Polynomial unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    Polynomial base = primary();
    if (eat('^')) {
      skip();
      const std::size_t start = pos_;
      int e = 0;
      const auto res = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), e);
      if (res.ec != std::errc() || e < 0) fail("expected a nonnegative integer exponent");
      pos_ = static_cast<std::size_t>(res.ptr - text_.data());
      if (pos_ == start) fail("expected an exponent");
      Polynomial r = Polynomial::constant(nvars_, 1.0);
      for (int i = 0; i < e; ++i) r = r * base;
      return r;
    }
    return base;
  }
  Polynomial primary() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    if (eat('(')) {
      Polynomial p = expr();
      if (!eat(')')) fail("expected ')'");
      return p;
    }
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0.0;
      const auto res = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
      if (res.ec != std::errc()) fail("bad number");
      pos_ = static_cast<std::size_t>(res.ptr - text_.data());
      return Polynomial::constant(nvars_, v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
      const std::string name = text_.substr(start, pos_ - start);
      for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return Polynomial::variable(nvars_, static_cast<int>(i));
      if (name.size() > 1 && name[0] == 'v') {
        int idx = -1;
        const auto res = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
        if (res.ec == std::errc() && res.ptr == name.data() + name.size() && idx >= 0 && idx < nvars_)
          return Polynomial::variable(nvars_, idx);
      }
      pos_ = start;
      fail("unknown variable '" + name + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  const std::string& text_;
  const std::vector<std::string>& names_;
  int nvars_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial parse_polynomial(const std::string& text, const std::vector<std::string>& names, int nvars) {
  if (nvars < 0) nvars = static_cast<int>(names.size());
  return Parser(text, names, nvars).run();
}

std::size_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) {
    const std::size_t num = static_cast<std::size_t>(n - k + i);
    if (r > std::numeric_limits<std::size_t>::max() / num) throw std::overflow_error("binomial overflow");
    r = r * num / static_cast<std::size_t>(i);
  }
  return r;
}

namespace {

// Exponent vectors of exact total degree d, lexicographically descending.
void enumerate_degree(int nvars, int d, int var, std::vector<int>& cur, std::vector<Monomial>& out) {
  if (var == nvars - 1) {
    cur[static_cast<std::size_t>(var)] = d;
    out.push_back(Monomial::from_exponents(cur));
    cur[static_cast<std::size_t>(var)] = 0;
    return;
  }
  for (int p = d; p >= 0; --p) {
    cur[static_cast<std::size_t>(var)] = p;
    enumerate_degree(nvars, d - p, var + 1, cur, out);
  }
  cur[static_cast<std::size_t>(var)] = 0;
}

}  // namespace

std::vector<Monomial> monomial_basis(int nvars, int degree, std::size_t cap) {
  if (degree < 0) throw std::invalid_argument("monomial_basis: negative degree");
  if (nvars < 0) throw std::invalid_argument("monomial_basis: negative variable count");
  const std::size_t count = binomial(nvars + degree, degree);
  if (count > cap)
    throw CapExceededError("monomial_basis: " + std::to_string(count) + " monomials exceeds cap " +
                             std::to_string(cap));
  std::vector<Monomial> out;
  out.reserve(count);
  out.emplace_back();
  if (nvars == 0) return out;
  std::vector<int> cur(static_cast<std::size_t>(nvars), 0);
  for (int d = 1; d <= degree; ++d) enumerate_degree(nvars, d, 0, cur, out);
  return out;
}

Polynomial gram_expand(std::span<const Monomial> basis, const Eigen::MatrixXd& gram, int nvars) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  if (gram.rows() != n || gram.cols() != n) throw std::invalid_argument("gram_expand: dimension mismatch");
  Polynomial::Terms acc;
  for (Eigen::Index a = 0; a < n; ++a) {
    acc[basis[a] * basis[a]] += gram(a, a);
    for (Eigen::Index b = a + 1; b < n; ++b) acc[basis[a] * basis[b]] += gram(a, b) + gram(b, a);
  }
  Polynomial p(nvars);
  for (const auto& [m, c] : acc) p.add_term(m, c);
  return p;
}

std::vector<std::vector<Polynomial>> hessian(const Polynomial& p) {
  const int n = p.nvars();
  std::vector<std::vector<Polynomial>> h(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Polynomial di = p.derivative(i);
    for (int j = 0; j < n; ++j) h[static_cast<std::size_t>(i)].push_back(di.derivative(j));
  }
  return h;
}

std::vector<std::string> VariableLayout::names() const {
  std::vector<std::string> out;
  for (int i = 0; i < m_; ++i) out.push_back(m_ == 1 ? "x" : "x" + std::to_string(i + 1));
  for (int i = 0; i < n_; ++i) out.push_back(n_ == 1 ? "y" : "y" + std::to_string(i + 1));
  out.push_back("mu0");
  for (int k = 1; k <= q_; ++k) out.push_back("mu" + std::to_string(k));
  for (int i = 1; i <= s_; ++i)
    for (int k = 1; k <= q_; ++k) out.push_back("mu" + std::to_string(k) + "_" + std::to_string(i));
  return out;
}

}  // namespace rbsos
