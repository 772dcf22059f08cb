#include "rbsos/sos.hpp"

#include "rbsos/errors.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace rbsos {

using conic::ConicProgram;
using conic::LinExpr;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool positive_constant(const Polynomial& p) {
  return p.degree() == 0 && !p.is_zero() && p.coefficient(Monomial()) > 0.0;
}

Polynomial xi_polynomial(const FreeBlock& blk, const VectorXd& x, int nvars) {
  Polynomial p(nvars);
  for (std::size_t i = 0; i < blk.basis.size(); ++i) p.add_term(blk.basis[i], x(blk.start + static_cast<int>(i)));
  return p;
}

MatrixXd gram_of(const GramBlock& blk, const VectorXd& x) {
  const int order = static_cast<int>(blk.basis.size());
  return conic::smat(x.segment(blk.start, conic::svec_size(order)), order);
}

}  // namespace

RelaxationLevel build_relaxation(const SingleLevelProgram& slp, double kappa, int k, std::size_t basis_cap) {
  if (k < 0 || k % 2 != 0) throw DegreeError("build_relaxation: k must be even and nonnegative");
  const Polynomial& f = slp.objective;
  if (f.degree() > k) throw DegreeError("build_relaxation: deg f = " + std::to_string(f.degree()) + " exceeds k");
  for (const auto& g : slp.g)
    if (g.degree() > k) throw DegreeError("build_relaxation: a g has degree above k");
  for (const auto& h : slp.h)
    if (h.degree() > k) throw DegreeError("build_relaxation: an h has degree above k");

  RelaxationLevel lvl;
  lvl.k = k;
  lvl.kappa = kappa;
  lvl.nvars = slp.num_vars();
  const int N = lvl.nvars;
  lvl.rows = monomial_basis(N, k, basis_cap);
  std::unordered_map<Monomial, std::size_t, MonomialHash> row_of;
  for (std::size_t i = 0; i < lvl.rows.size(); ++i) row_of.emplace(lvl.rows[i], i);

  ConicProgram& prog = lvl.conic;
  lvl.t_index = prog.add_free(1);

  auto add_gram = [&](GramBlock::Role role, int g_index, int degree, Polynomial weight) {
    GramBlock blk;
    blk.role = role;
    blk.g_index = g_index;
    blk.degree = degree;
    blk.basis = monomial_basis(N, degree, basis_cap);
    blk.weight = std::move(weight);
    blk.start = prog.add_psd(static_cast<int>(blk.basis.size()));
    lvl.grams.push_back(std::move(blk));
  };

  add_gram(GramBlock::Role::sigma0, -1, k / 2, Polynomial::constant(N, 1.0));
  for (std::size_t i = 0; i < slp.g.size(); ++i) {
    if (positive_constant(slp.g[i])) {
      lvl.absorbed.push_back(static_cast<int>(i));
      continue;
    }
    add_gram(GramBlock::Role::sigma, static_cast<int>(i), (k - slp.g[i].degree()) / 2, slp.g[i]);
  }
  add_gram(GramBlock::Role::zeta, -1, (k - f.degree()) / 2, Polynomial::constant(N, kappa) - f);

  for (std::size_t j = 0; j < slp.h.size(); ++j) {
    FreeBlock blk;
    blk.h_index = static_cast<int>(j);
    blk.basis = monomial_basis(N, k - slp.h[j].degree(), basis_cap);
    blk.start = prog.add_free(static_cast<int>(blk.basis.size()));
    lvl.xis.push_back(std::move(blk));
  }

  // identity rows: coef_f - sum(weight * gram) - sum(xi * h) - t == 0
  std::vector<LinExpr> rows(lvl.rows.size());
  for (const auto& [mono, c] : f.terms()) rows[row_of.at(mono)] += c;
  rows[row_of.at(Monomial())].add(lvl.t_index, -1.0);
  for (const GramBlock& blk : lvl.grams) {
    const int order = static_cast<int>(blk.basis.size());
    for (int a = 0; a < order; ++a)
      for (int b = a; b < order; ++b) {
        const LinExpr entry = ConicProgram::psd_entry(blk.start, order, b, a);
        const Monomial ab = blk.basis[static_cast<std::size_t>(a)] * blk.basis[static_cast<std::size_t>(b)];
        const double mult = a == b ? 1.0 : 2.0;
        for (const auto& [gm, gc] : blk.weight.terms()) rows[row_of.at(ab * gm)].add(entry, -mult * gc);
      }
  }
  for (const FreeBlock& blk : lvl.xis) {
    const Polynomial& h = slp.h[static_cast<std::size_t>(blk.h_index)];
    for (std::size_t i = 0; i < blk.basis.size(); ++i)
      for (const auto& [hm, hc] : h.terms())
        rows[row_of.at(blk.basis[i] * hm)].add(blk.start + static_cast<int>(i), -hc);
  }
  for (const LinExpr& r : rows) prog.add_equality(r);
  prog.set_maximize(LinExpr::var(lvl.t_index));
  return lvl;
}

Polynomial identity_residual(const SingleLevelProgram& slp, double kappa, const SosMultipliers& mult) {
  const int N = slp.num_vars();
  const Polynomial& f = slp.objective;
  Polynomial r = f - Polynomial::constant(N, mult.t) - mult.sigma0;
  for (std::size_t i = 0; i < slp.g.size() && i < mult.sigma.size(); ++i)
    if (!mult.sigma[i].is_zero()) r -= mult.sigma[i] * slp.g[i];
  for (std::size_t j = 0; j < slp.h.size() && j < mult.xi.size(); ++j) r -= mult.xi[j] * slp.h[j];
  if (!mult.zeta.is_zero()) r -= mult.zeta * (Polynomial::constant(N, kappa) - f);
  return r;
}

std::vector<Polynomial> extract_sos_decomposition(const MatrixXd& gram, const std::vector<Monomial>& basis, int nvars,
                                                  double tol) {
  if (gram.rows() != gram.cols() || gram.rows() != static_cast<Eigen::Index>(basis.size()))
    throw std::invalid_argument("extract_sos_decomposition: Gram size differs from the basis");
  std::vector<Polynomial> out;
  if (gram.rows() == 0) return out;
  const MatrixXd sym = 0.5 * (gram + gram.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  const VectorXd& lam = eig.eigenvalues();
  if (lam(0) < -tol)
    throw std::invalid_argument("extract_sos_decomposition: Gram matrix is indefinite (lambda_min = " +
                                std::to_string(lam(0)) + ")");
  const double keep = 1e-12 * std::max(1.0, lam(lam.size() - 1));
  for (Eigen::Index j = lam.size() - 1; j >= 0; --j) {
    if (lam(j) <= keep) break;
    const VectorXd v = std::sqrt(lam(j)) * eig.eigenvectors().col(j);
    Polynomial p(nvars);
    for (std::size_t i = 0; i < basis.size(); ++i) p.add_term(basis[i], v(static_cast<Eigen::Index>(i)));
    out.push_back(std::move(p));
  }
  return out;
}

std::string to_string(LevelStatus s) {
  switch (s) {
    case LevelStatus::solved: return "solved";
    case LevelStatus::rejected: return "rejected";
    case LevelStatus::infeasible: return "infeasible";
    case LevelStatus::unbounded: return "unbounded";
    case LevelStatus::failed: return "failed";
  }
  return "?";
}

namespace {

double gram_reconstruction_error(const MatrixXd& gram, const std::vector<Monomial>& basis, int nvars, double tol) {
  const auto parts = extract_sos_decomposition(gram, basis, nvars, tol);
  Polynomial sum(nvars);
  for (const auto& p : parts) sum += p * p;
  return (gram_expand(basis, gram, nvars) - sum).max_abs_coefficient();
}

SosMultipliers read_multipliers(const RelaxationLevel& lvl, const SingleLevelProgram& slp, const VectorXd& x) {
  const int N = lvl.nvars;
  SosMultipliers m;
  m.t = x(lvl.t_index);
  m.sigma.assign(slp.g.size(), Polynomial(N));
  m.sigma_grams.assign(slp.g.size(), MatrixXd());
  m.sigma_bases.assign(slp.g.size(), {});
  m.zeta = Polynomial(N);
  for (const GramBlock& blk : lvl.grams) {
    const MatrixXd G = gram_of(blk, x);
    Polynomial p = gram_expand(blk.basis, G, N);
    switch (blk.role) {
      case GramBlock::Role::sigma0:
        m.sigma0_gram = G;
        m.sigma0_basis = blk.basis;
        m.sigma0 = std::move(p);
        break;
      case GramBlock::Role::sigma: {
        const auto i = static_cast<std::size_t>(blk.g_index);
        m.sigma_grams[i] = G;
        m.sigma_bases[i] = blk.basis;
        m.sigma[i] = std::move(p);
        break;
      }
      case GramBlock::Role::zeta:
        m.zeta_gram = G;
        m.zeta_basis = blk.basis;
        m.zeta = std::move(p);
        break;
    }
  }
  for (const FreeBlock& blk : lvl.xis) m.xi.push_back(xi_polynomial(blk, x, N));
  return m;
}

double min_eigenvalue(const MatrixXd& g) {
  if (g.rows() == 0) return kInf;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

// Moves the identity residual into the sigma0 Gram matrix, preferring diagonal
// entries, so the identity holds up to rounding.
void project_into_sigma0(const SingleLevelProgram& slp, double kappa, SosMultipliers& m) {
  const int N = slp.num_vars();
  const Polynomial r = identity_residual(slp, kappa, m);
  std::unordered_map<Monomial, std::pair<int, int>, MonomialHash> slot;
  const int order = static_cast<int>(m.sigma0_basis.size());
  for (int a = 0; a < order; ++a)
    for (int b = a; b < order; ++b) {
      const Monomial ab = m.sigma0_basis[static_cast<std::size_t>(a)] * m.sigma0_basis[static_cast<std::size_t>(b)];
      auto it = slot.find(ab);
      if (it == slot.end())
        slot.emplace(ab, std::make_pair(a, b));
      else if (a == b && it->second.first != it->second.second)
        it->second = {a, b};
    }
  for (const auto& [mono, c] : r.terms()) {
    const auto it = slot.find(mono);
    if (it == slot.end()) continue;
    const auto [a, b] = it->second;
    if (a == b) {
      m.sigma0_gram(a, a) += c;
    } else {
      m.sigma0_gram(a, b) += 0.5 * c;
      m.sigma0_gram(b, a) += 0.5 * c;
    }
  }
  m.sigma0 = gram_expand(m.sigma0_basis, m.sigma0_gram, N);
}

template <class F>
void for_each_gram(const SosMultipliers& m, F fn) {
  fn(m.sigma0_gram, m.sigma0_basis);
  for (std::size_t i = 0; i < m.sigma_grams.size(); ++i)
    if (m.sigma_grams[i].size() > 0) fn(m.sigma_grams[i], m.sigma_bases[i]);
  if (m.zeta_gram.size() > 0) fn(m.zeta_gram, m.zeta_basis);
}

}  // namespace

LevelResult solve_level(const SingleLevelProgram& slp, double kappa, int k, const SosOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  LevelResult out;
  out.k = k;
  out.value = -kInf;
  auto finish = [&] {
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  };

  RelaxationLevel lvl;
  try {
    lvl = build_relaxation(slp, kappa, k, options.basis_cap);
  } catch (const DegreeError& e) {
    out.status = LevelStatus::rejected;
    out.message = e.what();
    return finish();
  } catch (const CapExceededError& e) {
    out.status = LevelStatus::failed;
    out.message = e.what();
    return finish();
  }
  out.rows = lvl.conic.num_rows();
  out.variables = lvl.conic.num_variables();
  for (const auto& blk : lvl.grams) out.largest_block = std::max(out.largest_block, static_cast<int>(blk.basis.size()));

  if (!options.dump_dir.empty()) {
    std::filesystem::create_directories(options.dump_dir);
    std::ofstream os(std::filesystem::path(options.dump_dir) / ("level_k" + std::to_string(k) + ".txt"));
    lvl.conic.write_dump(os);
  }

  const auto sol = conic::solve(lvl.conic, options.solver);
  out.iterations = sol.iterations;
  switch (sol.status) {
    case conic::SolveStatus::infeasible:
      out.status = LevelStatus::infeasible;
      out.message = "relaxation infeasible";
      return finish();
    case conic::SolveStatus::unbounded:
      out.status = LevelStatus::unbounded;
      out.value = kInf;
      out.message = "relaxation unbounded";
      return finish();
    case conic::SolveStatus::numerical_failure:
      out.status = LevelStatus::failed;
      out.message = "solver stopped without a verdict";
      return finish();
    case conic::SolveStatus::optimal:
    case conic::SolveStatus::inaccurate:
      break;
  }
  out.status = LevelStatus::solved;
  out.value = sol.objective;
  SosMultipliers mult = read_multipliers(lvl, slp, sol.x);
  mult.t = sol.x(lvl.t_index);
  project_into_sigma0(slp, kappa, mult);
  out.identity_residual = identity_residual(slp, kappa, mult).max_abs_coefficient();
  out.min_gram_eigenvalue = kInf;
  out.decomposition_residual = 0.0;
  for_each_gram(mult, [&](const MatrixXd& G, const std::vector<Monomial>& basis) {
    out.min_gram_eigenvalue = std::min(out.min_gram_eigenvalue, min_eigenvalue(G));
    try {
      out.decomposition_residual =
          std::max(out.decomposition_residual, gram_reconstruction_error(G, basis, slp.num_vars(), options.tol));
    } catch (const std::invalid_argument&) {
      out.decomposition_residual = kInf;
    }
  });
  out.multipliers = std::move(mult);
  if (sol.status == conic::SolveStatus::inaccurate) {
    const double fnorm = slp.objective.max_abs_coefficient();
    if (out.min_gram_eigenvalue < -options.tol || out.identity_residual > options.tol * (1.0 + fnorm)) {
      out.status = LevelStatus::failed;
      out.value = -kInf;
      out.multipliers.reset();
      out.message = "solver stalled and the best iterate does not verify";
    } else {
      out.message = "solver stalled; best iterate verified after projecting the residual";
    }
  }
  return finish();
}

HypothesisReport check_hypotheses(const BilevelProblem& prob, const VectorXd& point, double tol) {
  prob.validate();
  if (point.size() != prob.m + prob.n) throw std::invalid_argument("check_hypotheses: point must have m + n entries");
  const VectorXd x = point.head(prob.m), y = point.tail(prob.n);
  HypothesisReport rep;
  if (prob.kind() == LevelKind::box)
    rep.point_feasible = robust_feasible(prob, x, y, tol).feasible;
  else
    rep.point_feasible = ball_robust_feasible(prob, x, y, tol).feasible;
  if (!rep.point_feasible) rep.warnings.push_back("point is not robust feasible");

  if (prob.assert_coercive) {
    rep.coercive = true;
    rep.coercivity_source = "asserted";
  } else if (hessian_check(prob.f, point).positive_definite) {
    rep.coercive = true;
    rep.coercivity_source = "hessian";
  } else {
    rep.coercivity_source = "none";
    rep.warnings.push_back("coercivity not established: not asserted and the Hessian at the point is not positive definite");
  }

  // x itself plus the grid {-3, 0, 3}^m (capped at 27 points)
  std::vector<VectorXd> xs = {x};
  const int grid_dims = std::min(prob.m, 3);
  int count = 1;
  for (int i = 0; i < grid_dims; ++i) count *= 3;
  for (int c = 0; c < count; ++c) {
    VectorXd p = x;
    int rest = c;
    for (int i = 0; i < grid_dims; ++i) {
      p(i) = -3.0 + 3.0 * (rest % 3);
      rest /= 3;
    }
    xs.push_back(p);
  }
  rep.lsc = true;
  for (const VectorXd& xi : xs) {
    ++rep.lsc_points;
    if (!lower_slater(prob, xi).holds) {
      rep.lsc = false;
      std::ostringstream os;
      os << "LSC violated: no strictly feasible lower-level point at x = (";
      for (Eigen::Index i = 0; i < xi.size(); ++i) os << (i ? ", " : "") << format_number(xi(i));
      os << ")";
      rep.warnings.push_back(os.str());
      break;
    }
  }
  return rep;
}

HierarchyReport run_hierarchy(const BilevelProblem& prob, const VectorXd& point, const HierarchyOptions& options) {
  const SingleLevelProgram slp = build_single_level(prob);
  HierarchyReport rep;
  rep.point = point;
  rep.hypotheses = check_hypotheses(prob, point, options.sos.tol);
  if (!rep.hypotheses.point_feasible) throw HypothesisError("run_hierarchy: the supplied point is not robust feasible");
  rep.point_value = prob.f.evaluate(point.head(prob.f.nvars()));
  rep.kappa = options.kappa.value_or(rep.point_value);
  if (rep.kappa < rep.point_value - 1e-12) throw HypothesisError("run_hierarchy: kappa is below f at the point");
  rep.g_count = static_cast<int>(slp.g.size());
  rep.h_count = static_cast<int>(slp.h.size());
  rep.nvars = slp.num_vars();

  const int k_min = round_up_even(options.k_min > 0 ? options.k_min : slp.max_degree());
  const int k_max = round_up_even(options.k_max > 0 ? options.k_max : k_min + 4);
  std::vector<int> ks;
  for (int k = k_min; k <= k_max; k += 2) ks.push_back(k);
  rep.levels.resize(ks.size());

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < ks.size(); ++i) {
    try {
      rep.levels[i] = solve_level(slp, rep.kappa, ks[i], options.sos);
    } catch (const std::exception& e) {
      rep.levels[i].k = ks[i];
      rep.levels[i].status = LevelStatus::failed;
      rep.levels[i].value = -kInf;
      rep.levels[i].message = e.what();
    }
  }

  rep.best_bound = -kInf;
  const LevelResult* prev = nullptr;
  for (const auto& lvl : rep.levels) {
    if (lvl.status == LevelStatus::solved) rep.best_bound = std::max(rep.best_bound, lvl.value);
    if (lvl.status != LevelStatus::solved && lvl.status != LevelStatus::rejected && lvl.status != LevelStatus::infeasible)
      continue;
    if (prev && prev->value > lvl.value + 1e-6) rep.monotone = false;
    prev = &lvl;
  }
  return rep;
}

CertifyResult certify_global(const BilevelProblem& prob, const VectorXd& point, double kappa, int k,
                             const SosOptions& options) {
  prob.validate();
  if (point.size() != prob.m + prob.n) throw std::invalid_argument("certify_global: point must have m + n entries");
  const SingleLevelProgram slp = build_single_level(prob);
  if (!robust_feasible(prob, point.head(prob.m), point.tail(prob.n), options.tol).feasible)
    throw HypothesisError("certify_global: the candidate is not robust feasible");
  const double target = prob.f.evaluate(point.head(prob.f.nvars()));
  if (kappa < target - 1e-12) throw HypothesisError("certify_global: kappa is below f at the candidate");
  return certify_from_level(slp, kappa, target, solve_level(slp, kappa, round_up_even(k), options), options.tol);
}

CertifyResult certify_from_level(const SingleLevelProgram& slp, double kappa, double target, LevelResult level,
                                 double tol) {
  CertifyResult out;
  out.target = target;
  out.level = std::move(level);
  out.t_star = out.level.value;
  if (out.level.status != LevelStatus::solved) {
    out.note = "degree-" + std::to_string(out.level.k) + " program " + to_string(out.level.status) +
               (out.level.message.empty() ? "" : ": " + out.level.message);
    return out;
  }
  if (out.t_star < out.target - tol) {
    std::ostringstream os;
    os << "best t = " << format_number(out.t_star) << " is below f(candidate) = " << format_number(out.target)
       << "; no representation at degree " << out.level.k << " (inconclusive unless proven otherwise)";
    out.note = os.str();
    return out;
  }
  SosMultipliers cert = *out.level.multipliers;
  const double shift = cert.t - out.target;
  cert.sigma0_gram(0, 0) += shift;
  cert.sigma0 += Polynomial::constant(slp.num_vars(), shift);
  cert.t = out.target;
  const double fnorm = slp.objective.max_abs_coefficient();
  out.identity_residual = identity_residual(slp, kappa, cert).max_abs_coefficient();
  double lam = kInf;
  for_each_gram(cert, [&](const MatrixXd& G, const std::vector<Monomial>&) { lam = std::min(lam, min_eigenvalue(G)); });
  if (out.identity_residual > tol * (1.0 + fnorm) || lam < -tol) {
    std::ostringstream os;
    os << "representation rejected on re-verification (residual " << format_number(out.identity_residual)
       << ", min Gram eigenvalue " << format_number(lam) << ")";
    out.note = os.str();
    return out;
  }
  out.found = true;
  out.certificate = std::move(cert);
  out.note = "representation found and re-verified";
  return out;
}

namespace {

std::string sos_literal(const MatrixXd& gram, const std::vector<Monomial>& basis, const VariableLayout& layout) {
  const auto names = layout.names();
  std::vector<Polynomial> parts;
  try {
    parts = extract_sos_decomposition(gram, basis, layout.total(), kInf);
  } catch (const std::invalid_argument&) {
    return gram_expand(basis, gram, layout.total()).to_string(names);
  }
  if (parts.empty()) return "0";
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) s += " + ";
    s += "(" + parts[i].to_string(names) + ")^2";
  }
  return s;
}

}  // namespace

void write_certificate(std::ostream& os, const SosMultipliers& mult, const VariableLayout& layout) {
  const auto names = layout.names();
  os << "# f - sum_i sigma_i g_i - sum_j xi_j h_j - zeta (kappa - f) - t = sigma0\n";
  os << "# variables:";
  for (const auto& n : names) os << ' ' << n;
  os << "\n";
  os << "t = " << format_number(mult.t) << "\n";
  os << "sigma0 = " << sos_literal(mult.sigma0_gram, mult.sigma0_basis, layout) << "\n";
  for (std::size_t i = 0; i < mult.sigma.size(); ++i) {
    if (mult.sigma_grams[i].size() == 0) continue;
    os << "sigma" << i + 1 << " = " << sos_literal(mult.sigma_grams[i], mult.sigma_bases[i], layout) << "\n";
  }
  if (mult.zeta_gram.size() > 0) os << "zeta = " << sos_literal(mult.zeta_gram, mult.zeta_basis, layout) << "\n";
  for (std::size_t j = 0; j < mult.xi.size(); ++j) os << "xi" << j + 1 << " = " << mult.xi[j].to_string(names) << "\n";
}

std::map<std::string, Polynomial> read_certificate(std::istream& is, const VariableLayout& layout) {
  const auto names = layout.names();
  std::map<std::string, Polynomial> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw PolynomialParseError("certificate line " + std::to_string(lineno) + ": expected name = expression");
    std::string name = line.substr(0, eq);
    name.erase(name.find_last_not_of(" \t") + 1);
    name.erase(0, name.find_first_not_of(" \t"));
    try {
      out[name] = parse_polynomial(line.substr(eq + 1), names, layout.total());
    } catch (const PolynomialParseError& e) {
      throw PolynomialParseError("certificate line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace rbsos
