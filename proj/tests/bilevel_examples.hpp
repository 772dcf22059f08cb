#pragma once

#include "rbsos/bilevel.hpp"

namespace testdata {

using rbsos::AffineUncertainConstraint;
using rbsos::BilevelProblem;
using rbsos::BoxSet;
using rbsos::UpperBoxConstraint;
using Eigen::VectorXd;

inline VectorXd vec(std::initializer_list<double> v) {
  VectorXd r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) r(i++) = x;
  return r;
}

inline UpperBoxConstraint upper_row(double alo, double ahi, double blo, double bhi, double clo, double chi) {
  return {vec({alo}), vec({ahi}), vec({blo}), vec({bhi}), clo, chi};
}

// scalar lower level: min c0 x - z  s.t.  (a0 + a1 u) z <= 0, |u| <= g
inline BilevelProblem scalar_bilevel(const std::string& objective, double c0, double a0, double a1, double g) {
  BilevelProblem p;
  p.m = p.n = 1;
  p.f = rbsos::parse_polynomial(objective, {"x", "y"});
  p.lower.c0 = vec({c0});
  p.lower.d0 = vec({-1.0});
  p.lower.c = {vec({0.0})};
  AffineUncertainConstraint con;
  con.a = {vec({a0}), vec({a1})};
  con.b = {0.0, 0.0};
  con.set = BoxSet::symmetric({g});
  p.lower.constraints = {con};
  p.assert_coercive = true;
  return p;
}

inline BilevelProblem ep1() {
  BilevelProblem p = scalar_bilevel("x^2 + y^2 + 2*y - 2", 1.0, 1.0, 1.0, 1.0);
  p.name = "ep1";
  p.upper = {upper_row(0, 0, 0, 0, 0, 0)};
  p.feasible_point = vec({0.0, 0.0});
  return p;
}

inline BilevelProblem ep2() {
  BilevelProblem p = scalar_bilevel("x^4 + y^2 + y + 1", 2.0, 1.0, 0.5, 1.0);
  p.name = "ep2";
  p.upper = {upper_row(0, 1, 0, 1, 0, 1)};
  p.feasible_point = vec({-1.0, 0.0});
  p.kappa = 2.0;
  return p;
}

inline BilevelProblem ep3() {
  BilevelProblem p = scalar_bilevel("x^4 - 4*x*y + y^4 - 2", 1.0, 1.0, 1.0, 0.5);
  p.name = "ep3";
  p.upper = {upper_row(0, 0, 0, 0, 0, 0)};
  p.feasible_point = vec({1.0, 0.0});
  p.kappa = -1.0;
  return p;
}

}  // namespace testdata
