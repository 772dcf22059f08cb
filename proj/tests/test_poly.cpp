#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rbsos/poly.hpp"

#include <random>
#include <set>

using namespace rbsos;

namespace {

Polynomial from_terms(int nvars, std::initializer_list<std::pair<std::vector<int>, double>> terms) {
  Polynomial p(nvars);
  for (const auto& [e, c] : terms) p.add_term(Monomial::from_exponents(e), c);
  return p;
}

// Pascal triangle, independent of the library's binomial.
std::size_t pascal(int n, int k) {
  std::vector<std::vector<std::size_t>> t(static_cast<std::size_t>(n + 1));
  for (int i = 0; i <= n; ++i) {
    t[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(i + 1), 1);
    for (int j = 1; j < i; ++j)
      t[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          t[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] + t[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j)];
  }
  return t[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)];
}

Polynomial random_poly(std::mt19937& rng, int nvars, int deg, int terms) {
  std::uniform_int_distribution<int> pw(0, deg);
  std::uniform_real_distribution<double> co(-2, 2);
  Polynomial p(nvars);
  for (int t = 0; t < terms; ++t) {
    std::vector<int> e(static_cast<std::size_t>(nvars));
    int budget = deg;
    for (auto& x : e) {
      x = std::min(budget, pw(rng) / 2);
      budget -= x;
    }
    p.add_term(Monomial::from_exponents(e), co(rng));
  }
  return p;
}

}  // namespace

TEST_CASE("poly_eval examples") {
  const Polynomial p = from_terms(2, {{{2, 0}, 1.0}, {{0, 2}, 1.0}});
  const double pt[] = {1.0, 2.0};
  CHECK(p.evaluate(pt) == doctest::Approx(5.0));
  CHECK(Polynomial(2).evaluate(pt) == 0.0);
  const Polynomial f = from_terms(2, {{{4, 0}, 1.0}, {{1, 1}, -4.0}, {{0, 4}, 1.0}, {{0, 0}, -2.0}});
  const double origin[] = {0.0, 0.0};
  CHECK(f.evaluate(origin) == doctest::Approx(-2.0));
  const double bad[] = {1.0};
  CHECK_THROWS_AS(p.evaluate(bad), std::invalid_argument);
}

TEST_CASE("poly_mul examples") {
  const Polynomial xp1 = from_terms(1, {{{1}, 1.0}, {{0}, 1.0}});
  const Polynomial xm1 = from_terms(1, {{{1}, 1.0}, {{0}, -1.0}});
  CHECK(xp1 * xm1 == from_terms(1, {{{2}, 1.0}, {{0}, -1.0}}));
  CHECK((xp1 * Polynomial(1)).is_zero());
  const Polynomial s = from_terms(2, {{{1, 0}, 1.0}, {{0, 1}, 1.0}});
  CHECK(s * s == from_terms(2, {{{2, 0}, 1.0}, {{1, 1}, 2.0}, {{0, 2}, 1.0}}));
  CHECK((s * s).degree() == 2);
}

TEST_CASE("drop tolerance and degree conventions") {
  Polynomial p(1);
  p.add_term(Monomial::variable(0), 1.0);
  p.add_term(Monomial::variable(0), -1.0 + 1e-14);
  CHECK(p.is_zero());
  CHECK(p.degree() == 0);
  for (const auto& [m, c] : (from_terms(1, {{{1}, 1.0}}) * 1e-13).terms()) CHECK(std::abs(c) >= kDropTolerance);
}

TEST_CASE("monomial_basis examples and ordering") {
  const auto b = monomial_basis(2, 2);
  REQUIRE(b.size() == 6);
  CHECK(b[0].dense(2) == std::vector<int>{0, 0});
  CHECK(b[1].dense(2) == std::vector<int>{1, 0});
  CHECK(b[2].dense(2) == std::vector<int>{0, 1});
  CHECK(b[3].dense(2) == std::vector<int>{2, 0});
  CHECK(b[4].dense(2) == std::vector<int>{1, 1});
  CHECK(b[5].dense(2) == std::vector<int>{0, 2});
  CHECK(monomial_basis(1, 0).size() == 1);
  CHECK(monomial_basis(5, 3).size() == pascal(8, 3));
  CHECK_THROWS_AS(monomial_basis(5, 6, 100), std::length_error);
  CHECK_THROWS_AS(monomial_basis(2, -1), std::invalid_argument);

  for (int nv = 1; nv <= 5; ++nv)
    for (int d = 0; d <= 6; ++d) {
      const auto basis = monomial_basis(nv, d);
      CHECK(basis.size() == pascal(nv + d, d));
      GrlexLess less;
      std::set<std::vector<int>> seen;
      for (std::size_t i = 0; i < basis.size(); ++i) {
        CHECK(seen.insert(basis[i].dense(nv)).second);
        if (i > 0) CHECK(less(basis[i - 1], basis[i]));
      }
    }
}

TEST_CASE("gram_expand examples") {
  const auto basis = monomial_basis(1, 1);
  CHECK(gram_expand(basis, Eigen::MatrixXd::Identity(2, 2), 1) == from_terms(1, {{{0}, 1.0}, {{2}, 1.0}}));
  CHECK(gram_expand(basis, Eigen::MatrixXd::Ones(2, 2), 1) == from_terms(1, {{{0}, 1.0}, {{1}, 2.0}, {{2}, 1.0}}));
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 3);
  g(2, 2) = 1.0;
  CHECK(gram_expand(monomial_basis(1, 2), g, 1) == from_terms(1, {{{4}, 1.0}}));
  CHECK_THROWS_AS(gram_expand(basis, Eigen::MatrixXd::Identity(3, 3), 1), std::invalid_argument);
}

TEST_CASE("property: evaluation is multiplicative") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 200; ++trial) {
    const int nv = 1 + trial % 4;
    const Polynomial p = random_poly(rng, nv, 4, 6), q = random_poly(rng, nv, 4, 6);
    const Polynomial pq = p * q;
    std::vector<double> pt(static_cast<std::size_t>(nv));
    for (auto& v : pt) v = u(rng);
    const double lhs = pq.evaluate(pt), rhs = p.evaluate(pt) * q.evaluate(pt);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
    if (!p.is_zero() && !q.is_zero()) CHECK(pq.degree() == p.degree() + q.degree());
    // distributivity
    const Polynomial r = random_poly(rng, nv, 3, 4);
    const Polynomial left = p * (q + r), right = p * q + p * r;
    CHECK(std::abs(left.evaluate(pt) - right.evaluate(pt)) <= 1e-10 * (1.0 + std::abs(left.evaluate(pt))));
  }
}

TEST_CASE("property: PSD gram expansions are nonnegative") {
  std::mt19937 rng(11);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const int nv = 1 + trial % 3, d = 1 + trial % 2;
    const auto basis = monomial_basis(nv, d);
    const auto sz = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd f(sz, sz);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = nd(rng);
    const Eigen::MatrixXd g = f * f.transpose();
    const Polynomial p = gram_expand(basis, g, nv);
    const double gnorm = g.norm();
    std::vector<double> pt(static_cast<std::size_t>(nv));
    for (int s = 0; s < 1000; ++s) {
      for (auto& v : pt) v = u(rng);
      CHECK(p.evaluate(pt) >= -1e-9 * (1.0 + gnorm));
    }
  }
}

TEST_CASE("derivatives and hessian") {
  const Polynomial f = from_terms(2, {{{4, 0}, 1.0}, {{0, 2}, 1.0}, {{0, 1}, 1.0}, {{0, 0}, 1.0}});
  const auto h = hessian(f);
  const double pt[] = {-1.0, 0.0};
  CHECK(h[0][0].evaluate(pt) == doctest::Approx(12.0));
  CHECK(h[1][1].evaluate(pt) == doctest::Approx(2.0));
  CHECK(h[0][1].evaluate(pt) == doctest::Approx(0.0));
}

TEST_CASE("variable layout") {
  const VariableLayout L(1, 1, 2, 3);
  CHECK(L.total() == 1 + 1 + 2 * 4 + 1);
  CHECK(L.mu0() == 2);
  CHECK(L.mu(1) == 3);
  CHECK(L.mu(2) == 4);
  CHECK(L.mu(1, 1) == 5);
  CHECK(L.mu(2, 1) == 6);
  CHECK(L.mu(2, 3) == 10);
  const auto names = L.names();
  CHECK(names.size() == 11);
  std::set<std::string> uniq(names.begin(), names.end());
  CHECK(uniq.size() == names.size());
}

TEST_CASE("parse_polynomial examples") {
  const std::vector<std::string> xy = {"x", "y"};
  const Polynomial ep2 = parse_polynomial("x^4 + y^2 + y + 1", xy);
  CHECK(ep2 == from_terms(2, {{{4, 0}, 1.0}, {{0, 2}, 1.0}, {{0, 1}, 1.0}, {{0, 0}, 1.0}}));
  const Polynomial ep3 = parse_polynomial("x^4 - 4*x*y + y^4 - 2", xy);
  CHECK(ep3 == from_terms(2, {{{4, 0}, 1.0}, {{1, 1}, -4.0}, {{0, 4}, 1.0}, {{0, 0}, -2.0}}));
  CHECK(parse_polynomial("(x + y)^2", xy) == from_terms(2, {{{2, 0}, 1.0}, {{1, 1}, 2.0}, {{0, 2}, 1.0}}));
  CHECK(parse_polynomial("-x^2", xy) == from_terms(2, {{{2, 0}, -1.0}}));
  CHECK(parse_polynomial("0.25*v1 - 1e-3", {}, 3) == from_terms(3, {{{0, 1, 0}, 0.25}, {{0, 0, 0}, -1e-3}}));
  CHECK(parse_polynomial("0", xy).is_zero());
  CHECK_THROWS_AS(parse_polynomial("x + z", xy), PolynomialParseError);
  CHECK_THROWS_AS(parse_polynomial("x +", xy), PolynomialParseError);
  CHECK_THROWS_AS(parse_polynomial("(x", xy), PolynomialParseError);
  CHECK_THROWS_AS(parse_polynomial("x^-1", xy), PolynomialParseError);
  CHECK_THROWS_AS(parse_polynomial("x y", xy), PolynomialParseError);
}

TEST_CASE("property: to_string and parse_polynomial round-trip exactly") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> coef(-5, 5);
  std::uniform_int_distribution<int> pw(0, 3);
  const VariableLayout L(1, 1, 1, 1);
  const auto names = L.names();
  for (int trial = 0; trial < 200; ++trial) {
    Polynomial p(L.total());
    for (int t = 0; t < 6; ++t) {
      std::vector<int> e(static_cast<std::size_t>(L.total()));
      for (int& v : e) v = pw(rng) == 3 ? pw(rng) : 0;
      p.add_term(Monomial::from_exponents(e), coef(rng) * std::pow(10.0, pw(rng) - 2));
    }
    CHECK(parse_polynomial(p.to_string(names), names) == p);
    CHECK(parse_polynomial(p.to_string(), {}, L.total()) == p);
  }
}
