#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "bilevel_examples.hpp"
#include "rbsos/io.hpp"

#include <random>
#include <string>

using namespace rbsos;
using testdata::vec;
using Eigen::VectorXd;

namespace {

std::string fixture(const std::string& name) { return read_file(std::string(RBSOS_DATA_DIR) + "/" + name); }

std::string parse_message(const std::string& text) {
  try {
    parse_bilevel(text);
  } catch (const ProblemParseError& e) {
    return e.what();
  }
  return "";
}

const std::string kMinimal = R"({
  "objective": "x^2 + y^2",
  "m": 1, "n": 1,
  "lower": {"c0": [1], "d0": [-1], "c": [[0]], "a_coeffs": [[[1], [1]]], "b_coeffs": [[0, 0]],
            "uncertainty": {"kind": "box", "gamma": [1]}}
})";

}  // namespace

TEST_CASE("fixtures round-trip and match the reference problems") {
  for (const char* name : {"ep1.json", "ep2.json", "ep3.json"}) {
    INFO(name);
    const BilevelProblem p = parse_bilevel(fixture(name));
    const BilevelProblem back = parse_bilevel(serialize_bilevel(p));
    CHECK(same_problem(p, back));
    CHECK(serialize_bilevel(back) == serialize_bilevel(p));
  }
  BilevelProblem ep1 = testdata::ep1();
  ep1.kappa = 0.0;
  CHECK(same_problem(parse_bilevel(fixture("ep1.json")), ep1));
  CHECK(same_problem(parse_bilevel(fixture("ep2.json")), testdata::ep2()));
  CHECK(same_problem(parse_bilevel(fixture("ep3.json")), testdata::ep3()));

  for (const char* name : {"example23.json", "trivial_farkas.json"}) {
    INFO(name);
    CHECK(detect_problem_kind(fixture(name)) == ProblemKind::farkas);
    const FarkasProblem p = parse_farkas(fixture(name));
    CHECK(same_problem(p, parse_farkas(serialize_farkas(p))));
  }
  const FarkasProblem ex = parse_farkas(fixture("example23.json"));
  CHECK(ex.n == 2);
  CHECK(ex.r == 0.0);
  CHECK(std::holds_alternative<Spectrahedron>(ex.constraints[0].set));
  CHECK(detect_problem_kind(fixture("ep2.json")) == ProblemKind::bilevel);
}

TEST_CASE("parse_bilevel accepts the string objective and optional fields") {
  const BilevelProblem p = parse_bilevel(kMinimal);
  CHECK(p.f == parse_polynomial("x^2 + y^2", {"x", "y"}));
  CHECK(p.upper.empty());
  CHECK_FALSE(p.feasible_point.has_value());
  CHECK_FALSE(p.kappa.has_value());
  CHECK_FALSE(p.assert_coercive);
  CHECK(same_problem(p, parse_bilevel(serialize_bilevel(p))));
}

TEST_CASE("parse errors carry a location") {
  const std::string bad = parse_message(fixture("malformed.json"));
  CHECK(bad.find("line 5") != std::string::npos);
  CHECK_THROWS_AS(parse_bilevel("[1, 2]"), ProblemParseError);

  std::string t = kMinimal;
  CHECK(parse_message(std::string(t).replace(t.find("\"c0\": [1]"), 9, "\"c0\": [1, 2]"))
            .find("lower.c0: expected 1 entries") != std::string::npos);
  CHECK(parse_message(std::string(t).replace(t.find("[[[1], [1]]]"), 12, "[[[1], [1, 3]]]"))
            .find("lower.a_coeffs[0][1]: expected 1 entries") != std::string::npos);
  CHECK(parse_message(std::string(t).replace(t.find("\"box\""), 5, "\"cube\"")).find("unknown uncertainty kind") !=
        std::string::npos);
  CHECK(parse_message(std::string(t).replace(t.find("\"gamma\": [1]"), 12, "\"gamma\": [-1]"))
            .find("nonnegative") != std::string::npos);
  CHECK(parse_message(std::string(t).replace(t.find("x^2 + y^2"), 9, "x^2 + z")).find("objective") !=
        std::string::npos);
  CHECK(parse_message(std::string(t).replace(t.find("\"m\": 1,"), 7, "")).find("missing field \"m\"") !=
        std::string::npos);
  CHECK(parse_message(std::string(t).replace(t.find("\"m\": 1"), 6, "\"m\": 1.5")).find("m: expected an integer") !=
        std::string::npos);

  CHECK_THROWS_AS(parse_farkas(kMinimal), ProblemParseError);
  CHECK_THROWS_AS(parse_farkas(R"({"kind":"farkas","n":1,"p":[1],"r":0,"constraints":[]})"), ProblemParseError);
}

TEST_CASE("uncertainty fragments") {
  const auto box = parse_uncertainty(R"({"kind":"box","gamma":[1, 0.5]})");
  REQUIRE(std::holds_alternative<BoxSet>(box));
  CHECK(std::get<BoxSet>(box).lo == std::vector<double>{-1.0, -0.5});
  const auto ib = parse_uncertainty(R"({"kind":"interval_box","lo":[0],"hi":[2]})");
  CHECK(std::get<BoxSet>(ib).hi == std::vector<double>{2.0});
  const auto ball = parse_uncertainty(R"({"kind":"ball","dim":3})");
  CHECK(std::get<BallSet>(ball).dim == 3);
  CHECK(std::get<BallSet>(ball).radius == 1.0);
  const auto sp = parse_uncertainty(R"({"kind":"spectrahedron","matrices":[[[1,0],[0,1]],[[1,0],[0,-1]]]})");
  CHECK(std::get<Spectrahedron>(sp).dim() == 1);
  for (const auto& s : {box, ib, ball, sp}) {
    const auto back = parse_uncertainty(serialize_uncertainty(s));
    CHECK(back.index() == s.index());
    CHECK(serialize_uncertainty(back) == serialize_uncertainty(s));
  }
  CHECK_THROWS_AS(parse_uncertainty(R"({"kind":"interval_box","lo":[1],"hi":[0]})"), ProblemParseError);
  CHECK_THROWS_AS(parse_uncertainty(R"({"kind":"ball","dim":0})"), ProblemParseError);
  CHECK_THROWS_AS(parse_uncertainty(R"({"kind":"spectrahedron","matrices":[[[1,2],[0,1]]]})"), ProblemParseError);
}

TEST_CASE("property: random problems round-trip exactly") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> ud(-3.0, 3.0);
  std::uniform_int_distribution<int> small(1, 2);
  for (int trial = 0; trial < 100; ++trial) {
    BilevelProblem p;
    p.name = "r" + std::to_string(trial);
    p.m = small(rng);
    p.n = small(rng);
    const int q = small(rng), s = small(rng);
    auto rvec = [&](int k) {
      VectorXd v(k);
      for (int i = 0; i < k; ++i) v(i) = ud(rng);
      return v;
    };
    p.f = Polynomial(p.m + p.n);
    for (const Monomial& mono : monomial_basis(p.m + p.n, 3))
      if (rng() % 3 == 0) p.f.add_term(mono, ud(rng));
    for (int i = 0; i < small(rng); ++i) {
      UpperBoxConstraint u;
      u.a_lo = rvec(p.m);
      u.a_hi = u.a_lo.array() + 1.0;
      u.b_lo = rvec(p.n);
      u.b_hi = u.b_lo;
      u.c_lo = ud(rng);
      u.c_hi = u.c_lo + 0.25;
      p.upper.push_back(u);
    }
    p.lower.c0 = rvec(p.m);
    p.lower.d0 = rvec(p.n);
    std::vector<double> gamma;
    for (int i = 0; i < s; ++i) gamma.push_back(std::abs(ud(rng)));
    for (int j = 0; j < q; ++j) {
      p.lower.c.push_back(rvec(p.m));
      AffineUncertainConstraint con;
      for (int i = 0; i <= s; ++i) {
        con.a.push_back(rvec(p.n));
        con.b.push_back(ud(rng));
      }
      con.set = BoxSet::symmetric(gamma);
      p.lower.constraints.push_back(con);
    }
    p.assert_coercive = trial % 2 == 0;
    if (trial % 3 == 0) p.feasible_point = rvec(p.m + p.n);
    if (trial % 4 == 0) p.kappa = ud(rng);
    const BilevelProblem back = parse_bilevel(serialize_bilevel(p));
    CHECK(same_problem(p, back));
  }
}
