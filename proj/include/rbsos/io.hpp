#pragma once

#include "rbsos/bilevel.hpp"
#include "rbsos/farkas.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace rbsos {

// Malformed problem text; the message carries the line/column or the field path.
class ProblemParseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// p^T x >= r implied by the uncertain constraints?
struct FarkasProblem {
  std::string name;
  int n = 0;
  std::vector<AffineUncertainConstraint> constraints;
  Eigen::VectorXd p;
  double r = 0.0;
};

enum class ProblemKind { bilevel, farkas };

// "farkas" when the top-level "kind" field says so, bilevel otherwise.
ProblemKind detect_problem_kind(const std::string& text);

BilevelProblem parse_bilevel(const std::string& text);
std::string serialize_bilevel(const BilevelProblem& prob);

FarkasProblem parse_farkas(const std::string& text);
std::string serialize_farkas(const FarkasProblem& prob);

// {"kind":"box","gamma":[...]}, {"kind":"interval_box","lo":[...],"hi":[...]},
// {"kind":"ball","dim":s,"radius":r}, {"kind":"spectrahedron","matrices":[...]}
UncertaintySet parse_uncertainty(const std::string& text);
std::string serialize_uncertainty(const UncertaintySet& set);

// Structural equality, exact on every number.
bool same_problem(const BilevelProblem& a, const BilevelProblem& b);
bool same_problem(const FarkasProblem& a, const FarkasProblem& b);

std::string read_file(const std::string& path);

}  // namespace rbsos
