#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bilevel_examples.hpp"
#include "rbsos/errors.hpp"

#include <cstdlib>
#include <random>

using namespace rbsos;
using namespace testdata;

namespace {

std::vector<Polynomial> parse_all(const std::vector<std::string>& texts, const VariableLayout& lay) {
  std::vector<Polynomial> out;
  for (const auto& t : texts) out.push_back(parse_polynomial(t, lay.names()));
  return out;
}

bool contains(const std::vector<Polynomial>& family, const Polynomial& p) {
  for (const auto& g : family)
    if ((g - p).max_abs_coefficient() <= 1e-12) return true;
  return false;
}

bool same_family(const std::vector<Polynomial>& a, const std::vector<Polynomial>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if ((a[i] - b[i]).max_abs_coefficient() > 1e-12) return false;
  return true;
}

// explicit vertex enumeration of every upper row
bool upper_oracle(const BilevelProblem& p, const VectorXd& x, const VectorXd& y, double tol) {
  for (const auto& row : p.upper)
    for (const VectorXd& v : box_vertices_nominal(row.bounds())) {
      double lhs = -v(p.m + p.n);
      for (int i = 0; i < p.m; ++i) lhs += v(i) * x(i);
      for (int i = 0; i < p.n; ++i) lhs += v(p.m + i) * y(i);
      if (lhs > tol) return false;
    }
  return true;
}

void check_witness(const SingleLevelProgram& slp, const VectorXd& x, const VectorXd& y, const VectorXd& mu) {
  const VectorXd pt = stack_point(slp.layout, x, y, mu);
  for (const auto& g : slp.g) CHECK(g.evaluate(pt) >= -1e-6);
  for (const auto& h : slp.h) CHECK(std::abs(h.evaluate(pt)) <= 1e-6);
}

struct RandomShape {
  int l, m, n, q, s;
};

BilevelProblem random_problem(std::mt19937& rng, const RandomShape& sh) {
  std::uniform_real_distribution<double> u(-1, 1), pos(0.2, 1.2);
  BilevelProblem p;
  p.m = sh.m;
  p.n = sh.n;
  Polynomial f(sh.m + sh.n);
  for (int i = 0; i < sh.m + sh.n; ++i) f.add_term(Monomial::variable(i, 2), 1.0);
  p.f = f;
  for (int r = 0; r < sh.l; ++r) {
    UpperBoxConstraint row;
    row.a_lo = VectorXd(sh.m);
    row.a_hi = VectorXd(sh.m);
    row.b_lo = VectorXd(sh.n);
    row.b_hi = VectorXd(sh.n);
    for (int i = 0; i < sh.m; ++i) {
      row.a_lo(i) = u(rng);
      row.a_hi(i) = row.a_lo(i) + (i % 2 == 0 ? 0.0 : 0.5 * pos(rng));
    }
    for (int i = 0; i < sh.n; ++i) {
      row.b_lo(i) = u(rng);
      row.b_hi(i) = row.b_lo(i) + 0.3 * pos(rng);
    }
    row.c_lo = 1.0 + std::abs(u(rng));
    row.c_hi = row.c_lo + 0.5;
    p.upper.push_back(row);
  }
  LowerLevelProblem& low = p.lower;
  low.c0 = VectorXd::NullaryExpr(sh.m, [&] { return u(rng); });
  low.d0 = VectorXd::Zero(sh.n);
  for (int j = 0; j < sh.q; ++j) {
    AffineUncertainConstraint con;
    std::vector<double> gamma;
    for (int i = 0; i < sh.s; ++i) gamma.push_back(pos(rng));
    con.set = BoxSet::symmetric(gamma);
    for (int i = 0; i <= sh.s; ++i) {
      con.a.push_back(VectorXd::NullaryExpr(sh.n, [&] { return u(rng); }));
      con.b.push_back(0.3 * u(rng));
    }
    con.b[0] = 1.0 + std::abs(con.b[0]);
    for (const VectorXd& ext : box_extreme_points(BoxSet::symmetric(gamma))) {
      VectorXd row = con.a[0];
      for (int i = 0; i < sh.s; ++i) row += ext(i) * con.a[static_cast<std::size_t>(i + 1)];
      low.d0 -= pos(rng) * row;
    }
    low.constraints.push_back(con);
    low.c.push_back(VectorXd::NullaryExpr(sh.m, [&] { return 0.2 * u(rng); }));
  }
  return p;
}

}  // namespace

TEST_CASE("build_single_level: first example family after pruning") {
  const auto slp = build_single_level(ep1());
  const auto& lay = slp.layout;
  CHECK(lay.total() == 5);
  CHECK(same_family(slp.g, parse_all({"-2*y", "mu0", "mu1", "mu0*y", "mu1^2 - mu1_1^2"}, lay)));
  CHECK(same_family(slp.h, parse_all({"-mu0 + mu1 + mu1_1", "1 - mu0^2 - mu1^2 - mu1_1^2"}, lay)));
  CHECK(slp.tags == std::vector<GTag>{GTag::lower_extreme, GTag::mu0_sign, GTag::mu_sign, GTag::dual_slack,
                                      GTag::dual_box});
  CHECK(slp.unpruned_count == 14);
  // sources point back into the unpruned list
  const auto full = build_single_level(ep1(), false);
  REQUIRE(full.g.size() == 14);
  for (std::size_t i = 0; i < slp.g.size(); ++i) CHECK(full.g[static_cast<std::size_t>(slp.source[i])] == slp.g[i]);
}

TEST_CASE("build_single_level: third example family after pruning") {
  const auto slp = build_single_level(ep3());
  const auto& lay = slp.layout;
  CHECK(same_family(slp.g, parse_all({"-0.5*y", "-1.5*y", "mu0", "mu1", "mu0*y", "0.25*mu1^2 - mu1_1^2"}, lay)));
  CHECK(same_family(slp.h, parse_all({"-mu0 + mu1 + mu1_1", "1 - mu0^2 - mu1^2 - mu1_1^2"}, lay)));
  CHECK(slp.max_degree() == 4);
}

TEST_CASE("build_single_level: second example contains the published family") {
  const auto slp = build_single_level(ep2());
  const auto& lay = slp.layout;
  const auto published = parse_all({"1", "-x", "-x + 1", "-y", "-y + 1", "-x - y", "-x - y + 1", "mu0", "mu1",
                                    "mu0*y", "mu1^2 - mu1_1^2"},
                                   lay);
  for (const auto& g : published) CHECK(contains(slp.g, g));
  CHECK(slp.g.size() == 13);
  // the two extra rows are the lower-level extreme-point rows, implied by -y >= 0
  for (const auto& extra : parse_all({"-0.5*y", "-1.5*y"}, lay)) CHECK(contains(slp.g, extra));
  CHECK(same_family(slp.h, parse_all({"-mu0 + mu1 + 0.5*mu1_1", "1 - mu0^2 - mu1^2 - mu1_1^2"}, lay)));
  CHECK(slp.unpruned_count == static_cast<int>(expected_g_count(1, 1, 1, 1, 1)));
}

TEST_CASE("property: count identity and degree structure") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    const RandomShape sh{trial % 3, 1 + trial % 2, 1 + (trial / 2) % 2, 1 + (trial / 3) % 2, 1 + (trial / 5) % 2};
    const auto prob = random_problem(rng, sh);
    const auto slp = build_single_level(prob, false);
    CHECK(slp.g.size() == expected_g_count(sh.l, sh.m, sh.n, sh.q, sh.s));
    CHECK(slp.unpruned_count == static_cast<int>(slp.g.size()));
    CHECK(slp.h.size() == static_cast<std::size_t>(sh.n + 1));
    const int xy = sh.m + sh.n, all = slp.layout.total();
    for (const auto& g : slp.g) {
      CHECK(g.degree_in(xy, all) <= 2);
      CHECK(g.degree_in(0, xy) <= 1);
    }
    for (int j = 0; j < sh.n; ++j) {
      CHECK(slp.h[static_cast<std::size_t>(j)].degree_in(0, xy) == 0);
      CHECK(slp.h[static_cast<std::size_t>(j)].degree() <= 1);
    }
    CHECK(slp.h.back().degree() == 2);
    CHECK(slp.h.back().degree_in(0, xy) == 0);
  }
}

TEST_CASE("build_single_level errors") {
  BilevelProblem p = ep2();
  p.lower.constraints[0].set = BoxSet{{-1.0}, {2.0}};
  CHECK_THROWS_AS(build_single_level(p), std::invalid_argument);
  p = ep2();
  p.lower.constraints[0].set = BallSet{1, 1.0};
  CHECK_THROWS_AS(build_single_level(p), std::invalid_argument);
  p = ep2();
  p.upper[0].a_lo = vec({2.0});
  CHECK_THROWS_AS(build_single_level(p), std::invalid_argument);
  p = ep2();
  p.m = 2;
  CHECK_THROWS_AS(build_single_level(p), std::invalid_argument);

  setenv("RBSOS_MAX_ENUM", "4", 1);
  CHECK_THROWS_AS(build_single_level(ep2()), CapExceededError);
  setenv("RBSOS_MAX_ENUM", "8", 1);
  CHECK_NOTHROW(build_single_level(ep2()));
  unsetenv("RBSOS_MAX_ENUM");
}

TEST_CASE("robust_feasible examples") {
  const auto prob = ep2();
  const auto slp = build_single_level(prob);
  const auto a = robust_feasible(prob, vec({-1.0}), vec({0.0}));
  CHECK(a.feasible);
  REQUIRE(a.mu.has_value());
  CHECK((*a.mu)(0) > kMu0Threshold);
  check_witness(slp, vec({-1.0}), vec({0.0}), *a.mu);

  const auto b = robust_feasible(prob, vec({0.0}), vec({0.0}));
  CHECK(b.feasible);
  REQUIRE(b.mu.has_value());
  check_witness(slp, vec({0.0}), vec({0.0}), *b.mu);

  const auto c = robust_feasible(prob, vec({1.0}), vec({0.0}));
  CHECK_FALSE(c.feasible);
  CHECK_FALSE(c.upper_ok);
  CHECK(c.upper_violation == doctest::Approx(1.0));

  // y = -1 is lower-feasible but not optimal
  const auto d = robust_feasible(prob, vec({0.0}), vec({-1.0}));
  CHECK_FALSE(d.feasible);
  CHECK(d.upper_ok);
  CHECK_FALSE(d.lower_ok);

  // first example: y in Y(x) = {0}
  CHECK(robust_feasible(ep1(), vec({0.0}), vec({0.0})).feasible);
  CHECK(robust_feasible(ep1(), vec({2.0}), vec({0.0})).feasible);
  CHECK_FALSE(robust_feasible(ep1(), vec({0.0}), vec({-1.0})).feasible);
  CHECK(robust_feasible(ep3(), vec({1.0}), vec({0.0})).feasible);

  CHECK_THROWS_AS(robust_feasible(prob, vec({0.0, 1.0}), vec({0.0})), std::invalid_argument);
}

TEST_CASE("property: robust_feasible matches the vertex and lower-level oracles") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(-1, 1);
  int agree = 0, positives = 0, negatives = 0, total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const RandomShape sh{1 + trial % 2, 1, 1 + trial % 2, 1 + (trial / 2) % 2, 1 + (trial / 4) % 2};
    const auto prob = random_problem(rng, sh);
    const auto slp = build_single_level(prob);
    const VectorXd x = VectorXd::NullaryExpr(sh.m, [&] { return 2.0 * u(rng); });
    const auto opt = solve_lower_robust(prob.lower, x);
    REQUIRE(opt.status == conic::SolveStatus::optimal);
    std::vector<VectorXd> ys = {opt.z, VectorXd(opt.z + VectorXd::NullaryExpr(sh.n, [&] { return 0.5 * u(rng); }))};
    for (const VectorXd& y : ys) {
      const bool oracle = upper_oracle(prob, x, y, 1e-6) && is_robust_solution(prob.lower, x, y).robust_solution;
      const auto verdict = robust_feasible(prob, x, y);
      ++total;
      if (verdict.feasible == oracle) ++agree;
      (oracle ? positives : negatives) += 1;
      if (verdict.feasible) {
        REQUIRE(verdict.mu.has_value());
        check_witness(slp, x, y, *verdict.mu);
      }
    }
  }
  CHECK(agree == total);
  CHECK(positives >= 20);
  CHECK(negatives >= 20);
}

TEST_CASE("property: pruning keeps the feasible set") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<BilevelProblem> problems = {ep1(), ep2(), ep3()};
  for (int t = 0; t < 5; ++t) problems.push_back(random_problem(rng, {2, 1, 1, 2, 1}));
  for (const auto& prob : problems) {
    const auto pruned = build_single_level(prob, true);
    const auto full = build_single_level(prob, false);
    CHECK(pruned.g.size() <= full.g.size());
    int mismatches = 0;
    for (int k = 0; k < 1000; ++k) {
      VectorXd pt = VectorXd::NullaryExpr(full.layout.total(), [&] { return u(rng); });
      // snap some coordinates to zero so boundary cases appear
      for (Eigen::Index i = 0; i < pt.size(); ++i)
        if (k % 3 == 0 && i % 2 == 0) pt(i) = 0.0;
      auto ok = [&](const SingleLevelProgram& s) {
        for (const auto& g : s.g)
          if (g.evaluate(pt) < 0) return false;
        return true;
      };
      if (ok(pruned) != ok(full)) ++mismatches;
    }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("ball_robust_feasible examples") {
  // min -z s.t. z <= 0 with vanishing uncertainty rows
  BilevelProblem p;
  p.m = p.n = 1;
  p.f = parse_polynomial("x^2 + y^2", {"x", "y"});
  p.lower.c0 = vec({0.0});
  p.lower.d0 = vec({-1.0});
  p.lower.c = {vec({0.0})};
  AffineUncertainConstraint con;
  con.a = {vec({1.0}), vec({0.0})};
  con.b = {0.0, 0.0};
  con.set = BallSet{1, 1.0};
  p.lower.constraints = {con};
  const auto a = ball_robust_feasible(p, vec({0.0}), vec({0.0}));
  CHECK(a.feasible);
  REQUIRE(a.certificate.has_value());
  CHECK(a.certificate->lower_multipliers.size() == 1);
  CHECK(verify_certificate(a.certificate->dual, p.lower.d0, 0.0, p.lower.at(vec({0.0}))));
  CHECK_FALSE(ball_robust_feasible(p, vec({0.0}), vec({-1.0})).feasible);

  // (1 + u/2) z <= 1 + 0.3 u - x/2 over |u| <= 1 reads z + |z/2 - 0.3| <= 1 - x/2;
  // upper row (1 + 0.2 u) x <= 1, so x <= 1/1.2
  BilevelProblem q = p;
  q.lower.c = {vec({0.5})};
  q.lower.constraints[0].a = {vec({1.0}), vec({0.5})};
  q.lower.constraints[0].b = {1.0, 0.3};
  AffineUncertainConstraint up;
  up.a = {vec({1.0, 0.0}), vec({0.2, 0.0})};
  up.b = {1.0, 0.0};
  up.set = BallSet{1, 1.0};
  q.upper_ball = {up};
  auto ystar = [](double x) {
    const double hi = (1.3 - 0.5 * x) / 1.5;
    return hi >= 0.6 ? hi : 1.4 - x;
  };
  const double y0 = ystar(0.0), y5 = ystar(0.5);
  const auto b = ball_robust_feasible(q, vec({0.0}), vec({y0}));
  CHECK(b.feasible);
  REQUIRE(b.certificate.has_value());
  CHECK(b.certificate->upper_multipliers.size() == 1);
  CHECK(ball_robust_feasible(q, vec({0.5}), vec({y5})).feasible);
  CHECK_FALSE(ball_robust_feasible(q, vec({0.0}), vec({y0 + 1e-3})).feasible);
  CHECK_FALSE(ball_robust_feasible(q, vec({0.0}), vec({y0 - 0.1})).feasible);
  const double xmax = 1.0 / 1.2;
  const double x_out = xmax + 1e-3, y_out = ystar(x_out);
  CHECK_FALSE(ball_robust_feasible(q, vec({x_out}), vec({y_out})).feasible);
  const double x_in = xmax - 1e-3, y_in = ystar(x_in);
  CHECK(ball_robust_feasible(q, vec({x_in}), vec({y_in})).feasible);

  CHECK_THROWS_AS(ball_robust_feasible(ep2(), vec({0.0}), vec({0.0})), std::invalid_argument);
  BilevelProblem mixed = q;
  mixed.upper = ep2().upper;
  CHECK_THROWS_AS(ball_robust_feasible(mixed, vec({0.0}), vec({y0})), std::invalid_argument);
}

TEST_CASE("hessian_check and lower_slater") {
  const auto a = hessian_check(ep2().f, vec({-1.0, 0.0}));
  CHECK(a.positive_definite);
  CHECK(a.min_eigenvalue == doctest::Approx(2.0));
  CHECK_FALSE(hessian_check(ep2().f, vec({0.0, 0.0})).positive_definite);
  // [[12, -4], [-4, 0]]: smallest eigenvalue 6 - sqrt(52)
  const auto c = hessian_check(ep3().f, vec({1.0, 0.0}));
  CHECK_FALSE(c.positive_definite);
  CHECK(c.min_eigenvalue == doctest::Approx(6.0 - std::sqrt(52.0)));
  CHECK(hessian_check(ep1().f, vec({0.3, -2.0})).positive_definite);

  CHECK_FALSE(lower_slater(ep1(), vec({0.0})).holds);
  CHECK(lower_slater(ep2(), vec({0.0})).holds);
  CHECK(lower_slater(ep3(), vec({0.0})).holds);
}
