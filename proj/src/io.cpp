#include "rbsos/io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace rbsos {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

// A json node plus the dotted path used in diagnostics.
struct Node {
  const json& j;
  std::string path;

  [[noreturn]] void fail(const std::string& what) const {
    throw ProblemParseError((path.empty() ? std::string("<root>") : path) + ": " + what);
  }
  bool has(const char* key) const { return j.is_object() && j.contains(key) && !j.at(key).is_null(); }
  Node at(const char* key) const {
    if (!j.is_object()) fail("expected an object");
    if (!j.contains(key)) fail(std::string("missing field \"") + key + "\"");
    return {j.at(key), path.empty() ? key : path + "." + key};
  }
  Node at(std::size_t i) const { return {j.at(i), path + "[" + std::to_string(i) + "]"}; }
  std::size_t size() const { return j.size(); }

  const Node& array(std::optional<std::size_t> expect = std::nullopt) const {
    if (!j.is_array()) fail("expected an array");
    if (expect && j.size() != *expect)
      fail("expected " + std::to_string(*expect) + " entries, found " + std::to_string(j.size()));
    return *this;
  }
  double number() const {
    if (!j.is_number()) fail("expected a number");
    return j.get<double>();
  }
  int integer() const {
    if (!j.is_number_integer()) fail("expected an integer");
    return j.get<int>();
  }
  bool boolean() const {
    if (!j.is_boolean()) fail("expected true or false");
    return j.get<bool>();
  }
  std::string string() const {
    if (!j.is_string()) fail("expected a string");
    return j.get<std::string>();
  }
  VectorXd vector(std::optional<std::size_t> expect = std::nullopt) const {
    array(expect);
    VectorXd v(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i) v(static_cast<Eigen::Index>(i)) = at(i).number();
    return v;
  }
  std::vector<double> numbers(std::optional<std::size_t> expect = std::nullopt) const {
    const VectorXd v = vector(expect);
    return {v.data(), v.data() + v.size()};
  }
  MatrixXd matrix() const {
    array();
    if (size() == 0) fail("empty matrix");
    const std::size_t cols = at(std::size_t{0}).array().size();
    MatrixXd m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < size(); ++r) m.row(static_cast<Eigen::Index>(r)) = at(r).vector(cols).transpose();
    return m;
  }
};

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(e.byte == 0 ? 0 : e.byte - 1, text.size()); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ProblemParseError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": invalid JSON");
  }
}

json to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(VectorXd(m.row(r).transpose())));
  return a;
}

UncertaintySet read_set(const Node& n) {
  const std::string kind = n.at("kind").string();
  if (kind == "box") {
    const auto g = n.at("gamma").numbers();
    for (double v : g)
      if (!(v >= 0.0)) n.at("gamma").fail("half-widths must be nonnegative");
    return BoxSet::symmetric(g);
  }
  if (kind == "interval_box") {
    BoxSet b;
    b.lo = n.at("lo").numbers();
    b.hi = n.at("hi").numbers(b.lo.size());
    for (std::size_t i = 0; i < b.lo.size(); ++i)
      if (!(b.lo[i] <= b.hi[i])) n.at("hi").fail("hi must not be below lo");
    return b;
  }
  if (kind == "ball") {
    BallSet b;
    b.dim = n.at("dim").integer();
    if (b.dim < 1) n.at("dim").fail("dimension must be positive");
    if (n.has("radius")) b.radius = n.at("radius").number();
    if (!(b.radius > 0.0)) n.fail("radius must be positive");
    return b;
  }
  if (kind == "spectrahedron") {
    Spectrahedron sp;
    const Node mats = n.at("matrices");
    mats.array();
    for (std::size_t i = 0; i < mats.size(); ++i) sp.matrices.push_back(mats.at(i).matrix());
    try {
      sp.validate();
    } catch (const std::invalid_argument& e) {
      mats.fail(e.what());
    }
    return sp;
  }
  n.at("kind").fail("unknown uncertainty kind \"" + kind + "\"");
}

json write_set(const UncertaintySet& set) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BoxSet>) {
          if (s.is_symmetric()) return {{"kind", "box"}, {"gamma", s.gamma()}};
          return {{"kind", "interval_box"}, {"lo", s.lo}, {"hi", s.hi}};
        } else if constexpr (std::is_same_v<T, BallSet>) {
          return {{"kind", "ball"}, {"dim", s.dim}, {"radius", s.radius}};
        } else {
          json m = json::array();
          for (const auto& a : s.matrices) m.push_back(to_json(a));
          return {{"kind", "spectrahedron"}, {"matrices", m}};
        }
      },
      set);
}

// {"a_coeffs": [[...] x (s+1)], "b_coeffs": [...], "uncertainty": set}
AffineUncertainConstraint read_constraint(const Node& a_coeffs, const Node& b_coeffs, const UncertaintySet& set,
                                          std::size_t width) {
  AffineUncertainConstraint c;
  c.set = set;
  const auto s1 = static_cast<std::size_t>(set_dim(set)) + 1;
  a_coeffs.array(s1);
  for (std::size_t i = 0; i < s1; ++i) c.a.push_back(a_coeffs.at(i).vector(width));
  c.b = b_coeffs.numbers(s1);
  return c;
}

json write_constraint(const AffineUncertainConstraint& c) {
  json a = json::array();
  for (const auto& v : c.a) a.push_back(to_json(v));
  return {{"a_coeffs", a}, {"b_coeffs", c.b}, {"uncertainty", write_set(c.set)}};
}

Polynomial read_polynomial(const Node& n, int nvars, const std::vector<std::string>& names) {
  if (n.j.is_string()) {
    try {
      return parse_polynomial(n.string(), names, nvars);
    } catch (const PolynomialParseError& e) {
      n.fail(e.what());
    }
  }
  n.array();
  Polynomial p(nvars);
  for (std::size_t t = 0; t < n.size(); ++t) {
    const Node term = n.at(t);
    const Node ex = term.at("exponents");
    ex.array(static_cast<std::size_t>(nvars));
    std::vector<int> e;
    for (std::size_t i = 0; i < ex.size(); ++i) {
      e.push_back(ex.at(i).integer());
      if (e.back() < 0) ex.at(i).fail("exponent must be nonnegative");
    }
    p.add_term(Monomial::from_exponents(e), term.at("coeff").number());
  }
  return p;
}

json write_polynomial(const Polynomial& p) {
  json a = json::array();
  for (const auto& [mono, c] : p.terms()) a.push_back({{"exponents", mono.dense(p.nvars())}, {"coeff", c}});
  return a;
}

std::vector<std::string> xy_names(int m, int n) {
  std::vector<std::string> names;
  for (int i = 1; i <= m; ++i) names.push_back(m == 1 ? "x" : "x" + std::to_string(i));
  for (int i = 1; i <= n; ++i) names.push_back(n == 1 ? "y" : "y" + std::to_string(i));
  return names;
}

bool same_set(const UncertaintySet& a, const UncertaintySet& b) {
  if (a.index() != b.index()) return false;
  if (const auto* x = std::get_if<BoxSet>(&a)) {
    const auto& y = std::get<BoxSet>(b);
    return x->lo == y.lo && x->hi == y.hi;
  }
  if (const auto* x = std::get_if<BallSet>(&a)) {
    const auto& y = std::get<BallSet>(b);
    return x->dim == y.dim && x->radius == y.radius;
  }
  const auto& x = std::get<Spectrahedron>(a);
  const auto& y = std::get<Spectrahedron>(b);
  if (x.matrices.size() != y.matrices.size()) return false;
  for (std::size_t i = 0; i < x.matrices.size(); ++i)
    if (x.matrices[i].rows() != y.matrices[i].rows() || x.matrices[i].cols() != y.matrices[i].cols() ||
        x.matrices[i] != y.matrices[i])
      return false;
  return true;
}

bool same_vec(const VectorXd& a, const VectorXd& b) { return a.size() == b.size() && a == b; }

bool same_constraint(const AffineUncertainConstraint& a, const AffineUncertainConstraint& b) {
  if (a.a.size() != b.a.size() || a.b != b.b || !same_set(a.set, b.set)) return false;
  for (std::size_t i = 0; i < a.a.size(); ++i)
    if (!same_vec(a.a[i], b.a[i])) return false;
  return true;
}

template <class T, class F>
bool same_list(const std::vector<T>& a, const std::vector<T>& b, F eq) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!eq(a[i], b[i])) return false;
  return true;
}

}  // namespace

ProblemKind detect_problem_kind(const std::string& text) {
  const json j = parse_json(text);
  if (j.is_object() && j.contains("kind") && j.at("kind") == "farkas") return ProblemKind::farkas;
  return ProblemKind::bilevel;
}

UncertaintySet parse_uncertainty(const std::string& text) {
  const json j = parse_json(text);
  return read_set({j, ""});
}

std::string serialize_uncertainty(const UncertaintySet& set) { return write_set(set).dump(); }

BilevelProblem parse_bilevel(const std::string& text) {
  const json j = parse_json(text);
  const Node root{j, ""};
  if (!j.is_object()) root.fail("expected an object");
  BilevelProblem p;
  if (root.has("name")) p.name = root.at("name").string();
  p.m = root.at("m").integer();
  p.n = root.at("n").integer();
  if (p.m < 1) root.at("m").fail("must be at least 1");
  if (p.n < 1) root.at("n").fail("must be at least 1");
  const auto m = static_cast<std::size_t>(p.m), n = static_cast<std::size_t>(p.n);
  p.f = read_polynomial(root.at("objective"), p.m + p.n, xy_names(p.m, p.n));

  if (root.has("upper")) {
    const Node up = root.at("upper");
    up.array();
    for (std::size_t i = 0; i < up.size(); ++i) {
      const Node row = up.at(i);
      UpperBoxConstraint u;
      u.a_lo = row.at("a_lo").vector(m);
      u.a_hi = row.at("a_hi").vector(m);
      u.b_lo = row.at("b_lo").vector(n);
      u.b_hi = row.at("b_hi").vector(n);
      u.c_lo = row.at("c_lo").number();
      u.c_hi = row.at("c_hi").number();
      const auto b = u.bounds();
      for (const auto& [lo, hi] : b)
        if (!(lo <= hi)) row.fail("interval with lo above hi");
      p.upper.push_back(std::move(u));
    }
  }
  if (root.has("upper_ball")) {
    const Node up = root.at("upper_ball");
    up.array();
    for (std::size_t i = 0; i < up.size(); ++i) {
      const Node row = up.at(i);
      const UncertaintySet set = read_set(row.at("uncertainty"));
      p.upper_ball.push_back(read_constraint(row.at("a_coeffs"), row.at("b_coeffs"), set, m + n));
    }
  }

  const Node low = root.at("lower");
  p.lower.c0 = low.at("c0").vector(m);
  p.lower.d0 = low.at("d0").vector(n);
  const Node cs = low.at("c");
  cs.array();
  const std::size_t q = cs.size();
  if (q == 0) cs.fail("at least one lower-level constraint is required");
  for (std::size_t j2 = 0; j2 < q; ++j2) p.lower.c.push_back(cs.at(j2).vector(m));
  const Node ac = low.at("a_coeffs"), bc = low.at("b_coeffs"), un = low.at("uncertainty");
  ac.array(q);
  bc.array(q);
  std::vector<UncertaintySet> sets;
  if (un.j.is_array()) {
    un.array(q);
    for (std::size_t j2 = 0; j2 < q; ++j2) sets.push_back(read_set(un.at(j2)));
  } else {
    sets.assign(q, read_set(un));
  }
  for (std::size_t j2 = 0; j2 < q; ++j2)
    p.lower.constraints.push_back(read_constraint(ac.at(j2), bc.at(j2), sets[j2], n));

  if (root.has("assert_coercive")) p.assert_coercive = root.at("assert_coercive").boolean();
  if (root.has("feasible_point")) p.feasible_point = root.at("feasible_point").vector(m + n);
  if (root.has("kappa")) p.kappa = root.at("kappa").number();
  try {
    p.validate();
  } catch (const std::exception& e) {
    root.fail(e.what());
  }
  return p;
}

std::string serialize_bilevel(const BilevelProblem& p) {
  json j;
  if (!p.name.empty()) j["name"] = p.name;
  j["objective"] = write_polynomial(p.f);
  j["m"] = p.m;
  j["n"] = p.n;
  json up = json::array();
  for (const auto& u : p.upper)
    up.push_back({{"a_lo", to_json(u.a_lo)},
                  {"a_hi", to_json(u.a_hi)},
                  {"b_lo", to_json(u.b_lo)},
                  {"b_hi", to_json(u.b_hi)},
                  {"c_lo", u.c_lo},
                  {"c_hi", u.c_hi}});
  j["upper"] = up;
  if (!p.upper_ball.empty()) {
    json ub = json::array();
    for (const auto& c : p.upper_ball) ub.push_back(write_constraint(c));
    j["upper_ball"] = ub;
  }
  json low;
  low["c0"] = to_json(p.lower.c0);
  low["d0"] = to_json(p.lower.d0);
  json c = json::array(), ac = json::array(), bc = json::array(), un = json::array();
  for (const auto& v : p.lower.c) c.push_back(to_json(v));
  for (const auto& con : p.lower.constraints) {
    const json w = write_constraint(con);
    ac.push_back(w["a_coeffs"]);
    bc.push_back(w["b_coeffs"]);
    un.push_back(w["uncertainty"]);
  }
  low["c"] = c;
  low["a_coeffs"] = ac;
  low["b_coeffs"] = bc;
  low["uncertainty"] = un;
  j["lower"] = low;
  j["assert_coercive"] = p.assert_coercive;
  if (p.feasible_point) j["feasible_point"] = to_json(*p.feasible_point);
  if (p.kappa) j["kappa"] = *p.kappa;
  return j.dump(2) + "\n";
}

FarkasProblem parse_farkas(const std::string& text) {
  const json j = parse_json(text);
  const Node root{j, ""};
  if (!j.is_object()) root.fail("expected an object");
  if (!root.has("kind") || root.at("kind").string() != "farkas") root.fail("expected \"kind\": \"farkas\"");
  FarkasProblem p;
  if (root.has("name")) p.name = root.at("name").string();
  p.n = root.at("n").integer();
  if (p.n < 1) root.at("n").fail("must be at least 1");
  const auto n = static_cast<std::size_t>(p.n);
  p.p = root.at("p").vector(n);
  p.r = root.at("r").number();
  const Node cs = root.at("constraints");
  cs.array();
  if (cs.size() == 0) cs.fail("at least one constraint is required");
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const Node c = cs.at(i);
    const UncertaintySet set = read_set(c.at("uncertainty"));
    p.constraints.push_back(read_constraint(c.at("a_coeffs"), c.at("b_coeffs"), set, n));
    try {
      p.constraints.back().validate();
    } catch (const std::exception& e) {
      c.fail(e.what());
    }
  }
  return p;
}

std::string serialize_farkas(const FarkasProblem& p) {
  json j;
  j["kind"] = "farkas";
  if (!p.name.empty()) j["name"] = p.name;
  j["n"] = p.n;
  j["p"] = to_json(p.p);
  j["r"] = p.r;
  json cs = json::array();
  for (const auto& c : p.constraints) cs.push_back(write_constraint(c));
  j["constraints"] = cs;
  return j.dump(2) + "\n";
}

bool same_problem(const BilevelProblem& a, const BilevelProblem& b) {
  auto same_upper = [](const UpperBoxConstraint& x, const UpperBoxConstraint& y) {
    return same_vec(x.a_lo, y.a_lo) && same_vec(x.a_hi, y.a_hi) && same_vec(x.b_lo, y.b_lo) &&
           same_vec(x.b_hi, y.b_hi) && x.c_lo == y.c_lo && x.c_hi == y.c_hi;
  };
  const bool point = a.feasible_point.has_value() == b.feasible_point.has_value() &&
                     (!a.feasible_point || same_vec(*a.feasible_point, *b.feasible_point));
  return a.name == b.name && a.m == b.m && a.n == b.n && a.f == b.f && same_list(a.upper, b.upper, same_upper) &&
         same_list(a.upper_ball, b.upper_ball, same_constraint) && same_vec(a.lower.c0, b.lower.c0) &&
         same_vec(a.lower.d0, b.lower.d0) && same_list(a.lower.c, b.lower.c, same_vec) &&
         same_list(a.lower.constraints, b.lower.constraints, same_constraint) &&
         a.assert_coercive == b.assert_coercive && point && a.kappa == b.kappa;
}

bool same_problem(const FarkasProblem& a, const FarkasProblem& b) {
  return a.name == b.name && a.n == b.n && same_vec(a.p, b.p) && a.r == b.r &&
         same_list(a.constraints, b.constraints, same_constraint);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace rbsos
