#include "rbsos/conic.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace rbsos::conic {

int svec_size(int order) { return order * (order + 1) / 2; }

int svec_index(int order, int row, int col) {
  if (row < col) std::swap(row, col);
  // column `col` starts after columns 0..col-1, which hold order, order-1, ... entries
  return col * order - col * (col - 1) / 2 + (row - col);
}

Eigen::VectorXd svec(const Eigen::MatrixXd& m) {
  const int d = static_cast<int>(m.rows());
  Eigen::VectorXd v(svec_size(d));
  int k = 0;
  for (int c = 0; c < d; ++c)
    for (int r = c; r < d; ++r) v(k++) = r == c ? m(r, c) : svec_scale(r, c) * 0.5 * (m(r, c) + m(c, r));
  return v;
}

Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v, int order) {
  if (v.size() != svec_size(order)) throw std::invalid_argument("smat: length mismatch");
  Eigen::MatrixXd m(order, order);
  int k = 0;
  for (int c = 0; c < order; ++c)
    for (int r = c; r < order; ++r) {
      const double val = r == c ? v(k) : v(k) / svec_scale(r, c);
      m(r, c) = val;
      m(c, r) = val;
      ++k;
    }
  return m;
}

LinExpr& LinExpr::add(const LinExpr& other, double scale) {
  for (const auto& [i, c] : other.terms)
    if (c * scale != 0.0) terms.emplace_back(i, c * scale);
  constant += scale * other.constant;
  return *this;
}

LinExpr& LinExpr::operator*=(double s) {
  for (auto& t : terms) t.second *= s;
  constant *= s;
  return *this;
}

double LinExpr::evaluate(const Eigen::VectorXd& x) const {
  double r = constant;
  for (const auto& [i, c] : terms) r += c * x(i);
  return r;
}

int ConicProgram::add_cone(ConeKind kind, int size, int order) {
  if (size < 0) throw std::invalid_argument("conic: negative cone size");
  const int start = num_vars_;
  if (size == 0) return start;
  cones_.push_back(Cone{kind, start, size, order});
  cone_index_.insert(cone_index_.end(), static_cast<std::size_t>(size), static_cast<int>(cones_.size()) - 1);
  num_vars_ += size;
  return start;
}

int ConicProgram::add_free(int count) { return add_cone(ConeKind::free, count, 0); }
int ConicProgram::add_nonneg(int count) { return add_cone(ConeKind::nonneg, count, 0); }

int ConicProgram::add_soc(int dim) {
  if (dim < 1) throw std::invalid_argument("conic: soc dimension must be >= 1");
  return add_cone(ConeKind::soc, dim, 0);
}

int ConicProgram::add_psd(int order) {
  if (order < 1) throw std::invalid_argument("conic: psd order must be >= 1");
  return add_cone(ConeKind::psd, svec_size(order), order);
}

LinExpr ConicProgram::psd_entry(int start, int order, int r, int c) {
  return LinExpr::var(start + svec_index(order, r, c), 1.0 / svec_scale(r, c));
}

int ConicProgram::add_equality(const LinExpr& expr) {
  const int row = num_rows();
  for (const auto& [i, c] : expr.terms) {
    if (i < 0 || i >= num_vars_) throw std::invalid_argument("conic: variable index out of range");
    if (c != 0.0) entries_.push_back(Triplet{row, i, c});
  }
  b_.push_back(-expr.constant);
  return row;
}

int ConicProgram::add_less_equal(const LinExpr& expr) {
  const int slack = add_nonneg(1);
  LinExpr e = expr;
  e.add(slack, 1.0);
  return add_equality(e);
}

int ConicProgram::add_greater_equal(const LinExpr& expr) { return add_less_equal(expr * -1.0); }

void ConicProgram::set_objective(const LinExpr& expr) {
  c_ = expr.terms;
  c0_ = expr.constant;
  maximize_ = false;
}

void ConicProgram::set_maximize(const LinExpr& expr) {
  set_objective(expr * -1.0);
  maximize_ = true;
}

Eigen::VectorXd ConicProgram::objective() const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(num_vars_);
  for (const auto& [i, v] : c_) {
    if (i < 0 || i >= num_vars_) throw std::invalid_argument("conic: objective index out of range");
    c(i) += v;
  }
  return c;
}

const Cone& ConicProgram::cone_of(int var) const { return cones_.at(static_cast<std::size_t>(cone_index_.at(static_cast<std::size_t>(var)))); }

void ConicProgram::validate() const {
  int expect = 0;
  for (const Cone& k : cones_) {
    if (k.start != expect) throw std::invalid_argument("conic: cones do not tile the variables");
    if (k.kind == ConeKind::psd && k.size != svec_size(k.order))
      throw std::invalid_argument("conic: psd slice has wrong length");
    expect += k.size;
  }
  if (expect != num_vars_) throw std::invalid_argument("conic: cones do not cover all variables");
  for (const Triplet& t : entries_)
    if (t.col < 0 || t.col >= num_vars_ || t.row < 0 || t.row >= num_rows())
      throw std::invalid_argument("conic: entry out of range");
  for (const auto& [i, v] : c_)
    if (i < 0 || i >= num_vars_) throw std::invalid_argument("conic: objective index out of range");
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::inaccurate: return "inaccurate";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::numerical_failure: return "numerical-failure";
  }
  return "unknown";
}

void ConicProgram::write_dump(std::ostream& os) const {
  static const char* names[] = {"free", "nonneg", "soc", "psd"};
  os << "# conic program: minimize c^T x subject to A x = b, x in cones\n";
  os << "# lines: block row col value  (block and col 1-based within the cone slice; row 0 = objective)\n";
  os << "# block 0 lines carry the right-hand side: 0 row 1 b_row\n";
  os << "# psd slices use the scaled lower-triangular column-major vectorization\n";
  os << "# vars " << num_vars_ << " rows " << num_rows() << " cones " << cones_.size() << "\n";
  for (std::size_t k = 0; k < cones_.size(); ++k) {
    const Cone& c = cones_[k];
    os << "# cone " << k + 1 << ' ' << names[static_cast<int>(c.kind)] << ' '
       << (c.kind == ConeKind::psd ? c.order : c.size) << "\n";
  }
  os.precision(17);
  const Eigen::VectorXd c = objective();
  for (int i = 0; i < num_vars_; ++i) {
    if (c(i) == 0.0) continue;
    const Cone& k = cone_of(i);
    os << cone_index_[static_cast<std::size_t>(i)] + 1 << " 0 " << i - k.start + 1 << ' ' << c(i) << "\n";
  }
  for (const Triplet& t : entries_) {
    const Cone& k = cone_of(t.col);
    os << cone_index_[static_cast<std::size_t>(t.col)] + 1 << ' ' << t.row + 1 << ' ' << t.col - k.start + 1 << ' '
       << t.value << "\n";
  }
  for (int r = 0; r < num_rows(); ++r)
    if (b_[static_cast<std::size_t>(r)] != 0.0) os << "0 " << r + 1 << " 1 " << b_[static_cast<std::size_t>(r)] << "\n";
}

bool psd_check(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) throw std::invalid_argument("psd_check: matrix not square");
  if (m.size() == 0) return true;
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * (1.0 + m.cwiseAbs().maxCoeff())) throw std::invalid_argument("psd_check: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double norm = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  return ev(0) >= -tol * (1.0 + norm);
}

}  // namespace rbsos::conic
