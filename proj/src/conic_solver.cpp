// Homogeneous self-dual interior-point method with Nesterov-Todd scaling and
// Mehrotra predictor-corrector steps.
#include "rbsos/conic.hpp"
#include "rbsos/kernels.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/Sparse>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace rbsos::conic {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor>;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Block {
  ConeKind kind;
  int start = 0;
  int size = 0;
  int order = 0;
  std::vector<int> rows;                   // equality rows touching the block, ascending
  MatrixXd dense;                          // soc: A restricted to (rows, block)
  std::vector<kernels::PsdRow> psd_rows;   // psd: symmetric matrices of each row

  // scaling state, refreshed every iteration
  VectorXd lambda;
  VectorXd w;         // nonneg: sqrt(x/s)
  MatrixXd wm, wi;    // soc: W and W^{-1}
  MatrixXd r, rinv;   // psd: X = r L r^T factors
  MatrixXd wpsd;      // psd: r r^T
  MatrixXd lx, ls;    // psd: Cholesky factors of X and S
};

double soc_residual(const VectorXd& z) { return z(0) * z(0) - z.tail(z.size() - 1).squaredNorm(); }

// Largest alpha with z + alpha*dz still in the cone (kInf if unbounded).
double step_nonneg(const VectorXd& z, const VectorXd& dz) {
  double a = kInf;
  for (Index i = 0; i < z.size(); ++i)
    if (dz(i) < 0) a = std::min(a, -z(i) / dz(i));
  return a;
}

double step_soc(const VectorXd& z, const VectorXd& dz) {
  const Index n = z.size();
  if (n == 1) return dz(0) < 0 ? -z(0) / dz(0) : kInf;
  // g(a) = z0 + a dz0 - ||z1 + a dz1|| is concave, positive at 0
  const double qa = dz(0) * dz(0) - dz.tail(n - 1).squaredNorm();
  const double qb = 2.0 * (z(0) * dz(0) - z.tail(n - 1).dot(dz.tail(n - 1)));
  const double qc = soc_residual(z);
  double roots[2];
  int nr = 0;
  if (std::abs(qa) < 1e-14 * (std::abs(qb) + std::abs(qc) + 1e-300)) {
    if (qb != 0.0) roots[nr++] = -qc / qb;
  } else {
    const double disc = qb * qb - 4 * qa * qc;
    if (disc >= 0) {
      const double sq = std::sqrt(disc);
      const double q = -0.5 * (qb + (qb >= 0 ? sq : -sq));
      if (q != 0.0) {
        roots[nr++] = q / qa;
        roots[nr++] = qc / q;
      } else {
        roots[nr++] = 0.0;
      }
    }
  }
  double best = kInf;
  for (int i = 0; i < nr; ++i) {
    const double t = roots[i];
    if (t > 0 && z(0) + t * dz(0) >= -1e-12 * std::abs(z(0))) best = std::min(best, t);
  }
  // the head itself must stay nonnegative
  if (dz(0) < 0) best = std::min(best, -z(0) / dz(0));
  return best;
}

double step_psd(const MatrixXd& l, const VectorXd& dz, int order) {
  const MatrixXd d = smat(dz, order);
  // L^{-1} D L^{-T}
  MatrixXd t = l.triangularView<Eigen::Lower>().solve(d);
  t = l.triangularView<Eigen::Lower>().solve(t.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (t + t.transpose()), Eigen::EigenvaluesOnly);
  const double mn = es.eigenvalues()(0);
  return mn < 0 ? -1.0 / mn : kInf;
}

// Jordan product u o v inside a cone.
VectorXd jordan(const Block& b, const VectorXd& u, const VectorXd& v) {
  switch (b.kind) {
    case ConeKind::nonneg: return u.cwiseProduct(v);
    case ConeKind::soc: {
      VectorXd r(u.size());
      r(0) = u.dot(v);
      const Index t = u.size() - 1;
      r.tail(t) = u(0) * v.tail(t) + v(0) * u.tail(t);
      return r;
    }
    case ConeKind::psd: {
      const MatrixXd um = smat(u, b.order), vm = smat(v, b.order);
      const MatrixXd p = um * vm;
      return svec(0.5 * (p + p.transpose()));
    }
    case ConeKind::free: break;
  }
  return VectorXd();
}

// Solve lambda o d = r for d.
VectorXd jordan_divide(const Block& b, const VectorXd& r) {
  const VectorXd& l = b.lambda;
  switch (b.kind) {
    case ConeKind::nonneg: return r.cwiseQuotient(l);
    case ConeKind::soc: {
      const Index t = l.size() - 1;
      VectorXd d(l.size());
      const double rho = l(0) * l(0) - l.tail(t).squaredNorm();
      d(0) = (l(0) * r(0) - l.tail(t).dot(r.tail(t))) / rho;
      d.tail(t) = (r.tail(t) - d(0) * l.tail(t)) / l(0);
      return d;
    }
    case ConeKind::psd: {
      // lambda is diagonal in the scaled frame
      VectorXd d(r.size());
      int k = 0;
      for (int c = 0; c < b.order; ++c)
        for (int rr = c; rr < b.order; ++rr, ++k) {
          const double lr = l(svec_index(b.order, rr, rr));
          const double lc = l(svec_index(b.order, c, c));
          d(k) = 2.0 * r(k) / (lr + lc);
        }
      return d;
    }
    case ConeKind::free: break;
  }
  return VectorXd();
}

VectorXd identity(const Block& b) {
  VectorXd e = VectorXd::Zero(b.size);
  switch (b.kind) {
    case ConeKind::nonneg: e.setOnes(); break;
    case ConeKind::soc: e(0) = 1.0; break;
    case ConeKind::psd:
      for (int i = 0; i < b.order; ++i) e(svec_index(b.order, i, i)) = 1.0;
      break;
    case ConeKind::free: break;
  }
  return e;
}

MatrixXd congruent(const MatrixXd& p, const VectorXd& v, int order) {
  // svec(P smat(v) P^T)
  return svec(p * smat(v, order) * p.transpose());
}

// S v  (primal side scaling)
VectorXd scale_x(const Block& b, const VectorXd& v) {
  switch (b.kind) {
    case ConeKind::nonneg: return v.cwiseQuotient(b.w);
    case ConeKind::soc: return b.wi * v;
    case ConeKind::psd: return congruent(b.rinv, v, b.order);
    case ConeKind::free: break;
  }
  return v;
}

// S^{-T} v  (dual side scaling)
VectorXd scale_s(const Block& b, const VectorXd& v) {
  switch (b.kind) {
    case ConeKind::nonneg: return v.cwiseProduct(b.w);
    case ConeKind::soc: return b.wm * v;
    case ConeKind::psd: return congruent(b.r.transpose(), v, b.order);
    case ConeKind::free: break;
  }
  return v;
}

// S^{-1} v
VectorXd unscale_x(const Block& b, const VectorXd& v) {
  switch (b.kind) {
    case ConeKind::nonneg: return v.cwiseProduct(b.w);
    case ConeKind::soc: return b.wm * v;
    case ConeKind::psd: return congruent(b.r, v, b.order);
    case ConeKind::free: break;
  }
  return v;
}

// H^{-1} v = S^{-1} S^{-T} v
VectorXd hinv(const Block& b, const VectorXd& v) {
  switch (b.kind) {
    case ConeKind::nonneg: return v.cwiseProduct(b.w).cwiseProduct(b.w);
    case ConeKind::soc: return b.wm * (b.wm * v);
    case ConeKind::psd: return congruent(b.wpsd, v, b.order);
    case ConeKind::free: break;
  }
  return v;
}

bool update_scaling(Block& b, const VectorXd& x, const VectorXd& s) {
  switch (b.kind) {
    case ConeKind::nonneg:
      if ((x.array() <= 0).any() || (s.array() <= 0).any()) return false;
      b.w = (x.array() / s.array()).sqrt().matrix();
      b.lambda = (x.array() * s.array()).sqrt().matrix();
      return true;
    case ConeKind::soc: {
      const Index n = b.size;
      const double xr = soc_residual(x), sr = soc_residual(s);
      if (!(x(0) > 0 && s(0) > 0 && xr > 0 && sr > 0)) return false;
      const double xn = std::sqrt(xr), sn = std::sqrt(sr);
      const VectorXd xb = x / xn, sb = s / sn;
      const double gamma = std::sqrt(0.5 * (1.0 + xb.dot(sb)));
      VectorXd wb(n);
      wb(0) = (xb(0) + sb(0)) / (2.0 * gamma);
      wb.tail(n - 1) = (xb.tail(n - 1) - sb.tail(n - 1)) / (2.0 * gamma);
      const double beta = std::sqrt(xn / sn);
      VectorXd v = wb;
      v(0) += 1.0;
      v /= std::sqrt(2.0 * (wb(0) + 1.0));
      MatrixXd j = MatrixXd::Identity(n, n);
      j.bottomRightCorner(n - 1, n - 1) *= -1.0;
      b.wm = beta * (2.0 * v * v.transpose() - j);
      const VectorXd jv = j * v;
      b.wi = (2.0 * jv * jv.transpose() - j) / beta;
      b.lambda = b.wm * s;
      return true;
    }
    case ConeKind::psd: {
      const MatrixXd xm = smat(x, b.order), sm = smat(s, b.order);
      Eigen::LLT<MatrixXd> cx(xm), cs(sm);
      if (cx.info() != Eigen::Success || cs.info() != Eigen::Success) return false;
      b.lx = cx.matrixL();
      b.ls = cs.matrixL();
      Eigen::JacobiSVD<MatrixXd> svd(b.ls.transpose() * b.lx, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const VectorXd sv = svd.singularValues();
      if (sv.minCoeff() <= 0) return false;
      const MatrixXd& v = svd.matrixV();
      b.r = b.lx * v * sv.cwiseSqrt().cwiseInverse().asDiagonal();
      b.rinv = b.lx.transpose().triangularView<Eigen::Upper>().solve(v * sv.cwiseSqrt().asDiagonal()).transpose();
      b.wpsd = b.r * b.r.transpose();
      b.lambda = VectorXd::Zero(b.size);
      for (int i = 0; i < b.order; ++i) b.lambda(svec_index(b.order, i, i)) = sv(i);
      return true;
    }
    case ConeKind::free: return true;
  }
  return false;
}

double max_step(const Block& b, const VectorXd& z, const VectorXd& dz, const MatrixXd* chol) {
  switch (b.kind) {
    case ConeKind::nonneg: return step_nonneg(z, dz);
    case ConeKind::soc: return step_soc(z, dz);
    case ConeKind::psd: return step_psd(*chol, dz, b.order);
    case ConeKind::free: break;
  }
  return kInf;
}

class Solver {
 public:
  Solver(const ConicProgram& prog, const SolverSettings& st) : prog_(prog), st_(st) {}
  ConicSolution run();

 private:
  struct Direction {
    VectorXd dx, dy, ds;
    double dtau = 0, dkappa = 0;
  };

  void setup();
  bool presolve_rows(ConicSolution& out);
  void build_blocks();
  void assemble_schur();
  bool factor();
  void solve_reduced(const VectorXd& r1, const VectorXd& r2, VectorXd& dy, VectorXd& dxf) const;
  void solve_refined(const VectorXd& r1, const VectorXd& r2, VectorXd& dy, VectorXd& dxf) const;
  VectorXd hinv_full(const VectorXd& v) const;
  VectorXd free_part(const VectorXd& v) const;
  void scatter_free(const VectorXd& vf, VectorXd& v) const;
  Direction direction(double eta, const std::vector<VectorXd>& rc, double rtau) const;
  double step_length(const Direction& d) const;
  void finish(ConicSolution& out, SolveStatus status, double pres, double dres, double gap) const;

  const ConicProgram& prog_;
  SolverSettings st_;

  int n_ = 0, m_ = 0, m_orig_ = 0;
  SpMat a_;  // row scaled, dependent rows removed
  VectorXd b_, c_;
  VectorXd row_scale_;
  std::vector<int> kept_rows_;
  std::vector<Block> blocks_;
  std::vector<int> free_idx_;
  double nu_ = 0;

  // free-variable elimination: A_f P = [Q1 Q2] [R11 R12; 0 0]
  MatrixXd af_, q1_, q2_, r11_;
  Eigen::VectorXi perm_;
  int frank_ = 0;
  MatrixXd msch_;
  Eigen::LLT<MatrixXd> llt_;

  VectorXd x_, y_, s_;
  double tau_ = 1, kappa_ = 1;
  VectorXd rp_, rd_;
  double rg_ = 0;
  VectorXd dy2_, dx2_;
};

void Solver::setup() {
  prog_.validate();
  n_ = prog_.num_variables();
  m_orig_ = prog_.num_rows();
  c_ = prog_.objective();

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(prog_.entries().size());
  for (const Triplet& t : prog_.entries()) trip.emplace_back(t.row, t.col, t.value);
  SpMat a(m_orig_, n_);
  a.setFromTriplets(trip.begin(), trip.end());
  a.prune(0.0);

  VectorXd rmax = VectorXd::Zero(m_orig_);
  for (Index k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) rmax(it.row()) = std::max(rmax(it.row()), std::abs(it.value()));

  kept_rows_.clear();
  for (int i = 0; i < m_orig_; ++i)
    if (rmax(i) > 0) kept_rows_.push_back(i);
  m_ = static_cast<int>(kept_rows_.size());
  row_scale_.resize(m_);
  std::vector<int> newpos(static_cast<std::size_t>(m_orig_), -1);
  for (int k = 0; k < m_; ++k) {
    newpos[static_cast<std::size_t>(kept_rows_[static_cast<std::size_t>(k)])] = k;
    row_scale_(k) = 1.0 / rmax(kept_rows_[static_cast<std::size_t>(k)]);
  }
  trip.clear();
  for (Index k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) {
      const int r = newpos[static_cast<std::size_t>(it.row())];
      trip.emplace_back(r, static_cast<int>(it.col()), it.value() * row_scale_(r));
    }
  a_.resize(m_, n_);
  a_.setFromTriplets(trip.begin(), trip.end());
  b_.resize(m_);
  for (int k = 0; k < m_; ++k) b_(k) = prog_.rhs()[static_cast<std::size_t>(kept_rows_[static_cast<std::size_t>(k)])] * row_scale_(k);
}

bool Solver::presolve_rows(ConicSolution& out) {
  // an empty row with nonzero right-hand side is infeasible on its own
  std::vector<char> kept(static_cast<std::size_t>(m_orig_), 0);
  for (int r : kept_rows_) kept[static_cast<std::size_t>(r)] = 1;
  for (int i = 0; i < m_orig_; ++i) {
    const double bi = prog_.rhs()[static_cast<std::size_t>(i)];
    if (!kept[static_cast<std::size_t>(i)] && bi != 0.0) {
      out.ray = VectorXd::Zero(m_orig_);
      out.ray(i) = 1.0 / bi;
      out.certificate_residual = 0.0;
      return false;
    }
  }
  if (m_ <= 1) return true;
  const MatrixXd g = MatrixXd(a_ * a_.transpose());
  Eigen::ColPivHouseholderQR<MatrixXd> qr(g);
  qr.setThreshold(1e-13);
  const int rank = static_cast<int>(qr.rank());
  if (rank == m_) return true;
  const auto& p = qr.colsPermutation().indices();
  std::vector<int> keep, drop;
  for (int k = 0; k < m_; ++k) (k < rank ? keep : drop).push_back(p(k));
  std::sort(keep.begin(), keep.end());
  MatrixXd gkk(rank, rank);
  for (int i = 0; i < rank; ++i)
    for (int j = 0; j < rank; ++j) gkk(i, j) = g(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
  Eigen::LDLT<MatrixXd> ldlt(gkk);
  for (int d : drop) {
    VectorXd gk(rank), bk(rank);
    for (int i = 0; i < rank; ++i) {
      gk(i) = g(keep[static_cast<std::size_t>(i)], d);
      bk(i) = b_(keep[static_cast<std::size_t>(i)]);
    }
    const VectorXd wgt = ldlt.solve(gk);
    const double incons = b_(d) - wgt.dot(bk);
    if (std::abs(incons) > 1e-9 * (1.0 + b_.cwiseAbs().maxCoeff())) {
      // y = (e_d - w) / incons: A^T y ~ 0 while b^T y = 1
      VectorXd ys = VectorXd::Zero(m_);
      ys(d) = 1.0;
      for (int i = 0; i < rank; ++i) ys(keep[static_cast<std::size_t>(i)]) -= wgt(i);
      ys /= incons;
      out.ray = VectorXd::Zero(m_orig_);
      for (int k = 0; k < m_; ++k) out.ray(kept_rows_[static_cast<std::size_t>(k)]) = ys(k) * row_scale_(k);
      out.certificate_residual = (a_.transpose() * ys).cwiseAbs().maxCoeff();
      return false;
    }
  }
  std::vector<int> newpos(static_cast<std::size_t>(m_), -1);
  for (int i = 0; i < rank; ++i) newpos[static_cast<std::size_t>(keep[static_cast<std::size_t>(i)])] = i;
  std::vector<Eigen::Triplet<double>> trip;
  for (Index k = 0; k < a_.outerSize(); ++k)
    for (SpMat::InnerIterator it(a_, k); it; ++it) {
      const int r = newpos[static_cast<std::size_t>(it.row())];
      if (r >= 0) trip.emplace_back(r, static_cast<int>(it.col()), it.value());
    }
  SpMat a(rank, n_);
  a.setFromTriplets(trip.begin(), trip.end());
  VectorXd b(rank), sc(rank);
  std::vector<int> kr(static_cast<std::size_t>(rank));
  for (int i = 0; i < rank; ++i) {
    const int old = keep[static_cast<std::size_t>(i)];
    b(i) = b_(old);
    sc(i) = row_scale_(old);
    kr[static_cast<std::size_t>(i)] = kept_rows_[static_cast<std::size_t>(old)];
  }
  a_ = a;
  b_ = b;
  row_scale_ = sc;
  kept_rows_ = kr;
  m_ = rank;
  return true;
}

void Solver::build_blocks() {
  blocks_.clear();
  free_idx_.clear();
  nu_ = 0;
  const SpMat at = a_.transpose();
  for (const Cone& k : prog_.cones()) {
    if (k.kind == ConeKind::free) {
      for (int i = 0; i < k.size; ++i) free_idx_.push_back(k.start + i);
      continue;
    }
    Block b;
    b.kind = k.kind;
    b.start = k.start;
    b.size = k.size;
    b.order = k.order;
    std::vector<char> touched(static_cast<std::size_t>(m_), 0);
    for (int j = k.start; j < k.start + k.size; ++j)
      for (SpMat::InnerIterator it(a_, j); it; ++it) touched[static_cast<std::size_t>(it.row())] = 1;
    for (int r = 0; r < m_; ++r)
      if (touched[static_cast<std::size_t>(r)]) b.rows.push_back(r);
    if (k.kind == ConeKind::nonneg) {
      nu_ += k.size;
    } else if (k.kind == ConeKind::soc) {
      b.dense = MatrixXd::Zero(static_cast<Index>(b.rows.size()), k.size);
      std::vector<int> local(static_cast<std::size_t>(m_), -1);
      for (std::size_t ri = 0; ri < b.rows.size(); ++ri) local[static_cast<std::size_t>(b.rows[ri])] = static_cast<int>(ri);
      for (int j = k.start; j < k.start + k.size; ++j)
        for (SpMat::InnerIterator it(a_, j); it; ++it) b.dense(local[static_cast<std::size_t>(it.row())], j - k.start) = it.value();
      nu_ += 1;
    } else {
      std::vector<std::pair<int, int>> pos(static_cast<std::size_t>(k.size));
      for (int c = 0; c < k.order; ++c)
        for (int r = c; r < k.order; ++r) pos[static_cast<std::size_t>(svec_index(k.order, r, c))] = {r, c};
      for (int r : b.rows) {
        kernels::PsdRow pr;
        pr.row = r;
        for (SpMat::InnerIterator it(at, r); it; ++it) {
          const int j = static_cast<int>(it.row());
          if (j < k.start || j >= k.start + k.size) continue;
          const auto [rr, cc] = pos[static_cast<std::size_t>(j - k.start)];
          pr.entries.push_back({rr, cc, it.value() / svec_scale(rr, cc)});
        }
        b.psd_rows.push_back(std::move(pr));
      }
      nu_ += k.order;
    }
    blocks_.push_back(std::move(b));
  }

  const int nf = static_cast<int>(free_idx_.size());
  af_ = MatrixXd::Zero(m_, nf);
  for (int k = 0; k < nf; ++k)
    for (SpMat::InnerIterator it(a_, free_idx_[static_cast<std::size_t>(k)]); it; ++it) af_(it.row(), k) = it.value();
  if (nf > 0 && m_ > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(af_);
    qr.setThreshold(1e-10);
    frank_ = static_cast<int>(qr.rank());
    const MatrixXd q = qr.householderQ();
    q1_ = q.leftCols(frank_);
    q2_ = q.rightCols(m_ - frank_);
    r11_ = qr.matrixR().topLeftCorner(frank_, frank_).triangularView<Eigen::Upper>();
    perm_ = qr.colsPermutation().indices();
  } else {
    frank_ = 0;
    q1_.resize(m_, 0);
    q2_.resize(0, 0);  // identity, implicit
    r11_.resize(0, 0);
    perm_ = Eigen::VectorXi::LinSpaced(nf, 0, std::max(nf - 1, 0));
  }
}

void Solver::assemble_schur() {
  msch_.setZero(m_, m_);
  for (const Block& b : blocks_) {
    if (b.kind == ConeKind::nonneg) {
      for (int j = b.start; j < b.start + b.size; ++j) {
        const double h = b.w(j - b.start) * b.w(j - b.start);
        for (SpMat::InnerIterator it(a_, j); it; ++it) {
          SpMat::InnerIterator jt = it;
          for (; jt; ++jt) msch_(it.row(), jt.row()) += it.value() * jt.value() * h;
        }
      }
    } else if (b.kind == ConeKind::soc) {
      const MatrixXd t = b.dense * b.wm;
      const MatrixXd sub = t * t.transpose();
      for (std::size_t i = 0; i < b.rows.size(); ++i)
        for (std::size_t j = i; j < b.rows.size(); ++j)
          msch_(b.rows[i], b.rows[j]) += sub(static_cast<Index>(i), static_cast<Index>(j));
    } else if (b.kind == ConeKind::psd) {
      kernels::schur_psd(b.wpsd, b.psd_rows, msch_);
    }
  }
  msch_.triangularView<Eigen::StrictlyLower>() = msch_.transpose();
}

bool Solver::factor() {
  const bool has_free = q2_.size() > 0 || frank_ > 0;
  MatrixXd k = has_free ? MatrixXd(q2_.transpose() * msch_ * q2_) : msch_;
  if (k.rows() == 0) return true;
  llt_.compute(k);
  if (llt_.info() == Eigen::Success) return true;
  const double scale = std::max(1.0, k.diagonal().cwiseAbs().maxCoeff());
  for (double reg = 1e-14; reg < 1e-3; reg *= 10) {
    MatrixXd kr = k;
    kr.diagonal().array() += reg * scale;
    llt_.compute(kr);
    if (llt_.info() == Eigen::Success) return true;
  }
  return false;
}

// Solves [M A_f; A_f^T 0] [dy; dxf] = [r1; r2].
void Solver::solve_reduced(const VectorXd& r1, const VectorXd& r2, VectorXd& dy, VectorXd& dxf) const {
  const int nf = static_cast<int>(free_idx_.size());
  const bool has_free = q2_.size() > 0 || frank_ > 0;
  if (!has_free) {
    dy = m_ > 0 ? VectorXd(llt_.solve(r1)) : VectorXd();
    dxf = VectorXd::Zero(nf);
    return;
  }
  VectorXd pr2(frank_);
  for (int i = 0; i < frank_; ++i) pr2(i) = r2(perm_(i));
  const VectorXd a = r11_.transpose().triangularView<Eigen::Lower>().solve(pr2);
  dy = q1_ * a;
  if (q2_.cols() > 0) {
    const VectorXd z = llt_.solve(q2_.transpose() * (r1 - msch_ * dy));
    dy += q2_ * z;
  }
  const VectorXd w = r1 - msch_ * dy;
  const VectorXd v = r11_.triangularView<Eigen::Upper>().solve(q1_.transpose() * w);
  dxf = VectorXd::Zero(nf);
  for (int i = 0; i < frank_; ++i) dxf(perm_(i)) = v(i);
}

// Iterative refinement against the operator A H^{-1} A^T itself, not the
// assembled (and rounded) Schur matrix.
void Solver::solve_refined(const VectorXd& r1, const VectorXd& r2, VectorXd& dy, VectorXd& dxf) const {
  solve_reduced(r1, r2, dy, dxf);
  if (m_ == 0) return;
  auto amax = [](const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };
  const double target = 1e-14 * (1.0 + amax(r1) + amax(r2));
  double prev = kInf;
  for (int k = 0; k < 3; ++k) {
    const VectorXd e1 = r1 - a_ * hinv_full(a_.transpose() * dy) - af_ * dxf;
    const VectorXd e2 = r2 - af_.transpose() * dy;
    const double err = std::max(amax(e1), amax(e2));
    if (err <= target || err >= 0.5 * prev) break;
    prev = err;
    VectorXd cy, cf;
    solve_reduced(e1, e2, cy, cf);
    dy += cy;
    dxf += cf;
  }
}

VectorXd Solver::hinv_full(const VectorXd& v) const {
  VectorXd out = VectorXd::Zero(n_);
  for (const Block& b : blocks_) out.segment(b.start, b.size) = hinv(b, v.segment(b.start, b.size));
  return out;
}

VectorXd Solver::free_part(const VectorXd& v) const {
  VectorXd out(static_cast<Index>(free_idx_.size()));
  for (std::size_t k = 0; k < free_idx_.size(); ++k) out(static_cast<Index>(k)) = v(free_idx_[k]);
  return out;
}

void Solver::scatter_free(const VectorXd& vf, VectorXd& v) const {
  for (std::size_t k = 0; k < free_idx_.size(); ++k) v(free_idx_[k]) = vf(static_cast<Index>(k));
}

Solver::Direction Solver::direction(double eta, const std::vector<VectorXd>& rc, double rtau) const {
  VectorXd sinvd = VectorXd::Zero(n_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& b = blocks_[i];
    sinvd.segment(b.start, b.size) = unscale_x(b, jordan_divide(b, rc[i]));
  }
  const VectorXd t = hinv_full(eta * rd_) + sinvd;
  const VectorXd r1 = -eta * rp_ - a_ * t;
  const VectorXd r2 = -eta * free_part(rd_);
  Direction d;
  VectorXd dy1, dxf1;
  solve_refined(r1, r2, dy1, dxf1);
  VectorXd dx1 = hinv_full(a_.transpose() * dy1 + eta * rd_) + sinvd;
  scatter_free(dxf1, dx1);

  const double num = -eta * rg_ - c_.dot(dx1) + b_.dot(dy1) - rtau / tau_;
  const double den = c_.dot(dx2_) - b_.dot(dy2_) - kappa_ / tau_;
  d.dtau = num / den;
  d.dx = dx1 + d.dtau * dx2_;
  d.dy = dy1 + d.dtau * dy2_;
  d.ds = -eta * rd_ - a_.transpose() * d.dy + d.dtau * c_;
  for (int j : free_idx_) d.ds(j) = 0.0;
  d.dkappa = (rtau - kappa_ * d.dtau) / tau_;
  return d;
}

double Solver::step_length(const Direction& d) const {
  double a = kInf;
  for (const Block& b : blocks_) {
    a = std::min(a, max_step(b, x_.segment(b.start, b.size), d.dx.segment(b.start, b.size), &b.lx));
    a = std::min(a, max_step(b, s_.segment(b.start, b.size), d.ds.segment(b.start, b.size), &b.ls));
  }
  if (d.dtau < 0) a = std::min(a, -tau_ / d.dtau);
  if (d.dkappa < 0) a = std::min(a, -kappa_ / d.dkappa);
  return a;
}

void Solver::finish(ConicSolution& out, SolveStatus status, double pres, double dres, double gap) const {
  out.status = status;
  out.primal_residual = pres;
  out.dual_residual = dres;
  out.gap = gap;
  const double sign = prog_.maximize() ? -1.0 : 1.0;
  const double c0 = prog_.objective_constant();
  out.x = x_ / tau_;
  out.s = s_ / tau_;
  out.y = VectorXd::Zero(m_orig_);
  for (int k = 0; k < m_; ++k) out.y(kept_rows_[static_cast<std::size_t>(k)]) = y_(k) * row_scale_(k) / tau_;
  out.objective = sign * (c_.dot(out.x) + c0);
  out.dual_objective = sign * (b_.dot(y_) / tau_ + c0);
  if (status == SolveStatus::infeasible) {
    const double by = b_.dot(y_);
    out.ray = VectorXd::Zero(m_orig_);
    for (int k = 0; k < m_; ++k) out.ray(kept_rows_[static_cast<std::size_t>(k)]) = y_(k) * row_scale_(k) / by;
    out.certificate_residual = (a_.transpose() * y_ + s_).cwiseAbs().maxCoeff() / by;
  } else if (status == SolveStatus::unbounded) {
    const double cx = -c_.dot(x_);
    out.ray = x_ / cx;
    out.certificate_residual = (a_ * x_).cwiseAbs().maxCoeff() / cx;
  }
}

ConicSolution Solver::run() {
  ConicSolution out;
  setup();
  if (!presolve_rows(out)) {
    out.status = SolveStatus::infeasible;
    out.x = VectorXd::Zero(n_);
    out.s = VectorXd::Zero(n_);
    out.y = VectorXd::Zero(m_orig_);
    return out;
  }
  build_blocks();

  x_ = VectorXd::Zero(n_);
  s_ = VectorXd::Zero(n_);
  for (const Block& b : blocks_) {
    x_.segment(b.start, b.size) = identity(b);
    s_.segment(b.start, b.size) = identity(b);
  }
  y_ = VectorXd::Zero(m_);
  tau_ = kappa_ = 1.0;

  const double bnorm = 1.0 + (m_ > 0 ? b_.cwiseAbs().maxCoeff() : 0.0);
  const double cnorm = 1.0 + (n_ > 0 ? c_.cwiseAbs().maxCoeff() : 0.0);
  double pres = kInf, dres = kInf, gap = kInf;
  int small_steps = 0;
  struct Snapshot {
    VectorXd x, y, s;
    double tau = 1, kappa = 1, pres = kInf, dres = kInf, gap = kInf;
    double score() const { return std::max({pres, dres, gap}); }
  } best;

  for (int it = 0; it <= st_.max_iter; ++it) {
    out.iterations = it;
    rp_ = a_ * x_ - b_ * tau_;
    rd_ = a_.transpose() * y_ + s_ - c_ * tau_;
    rg_ = c_.dot(x_) - b_.dot(y_) + kappa_;
    double xs = 0;
    for (const Block& b : blocks_) xs += x_.segment(b.start, b.size).dot(s_.segment(b.start, b.size));
    const double mu = (xs + tau_ * kappa_) / (nu_ + 1.0);

    pres = (m_ > 0 ? rp_.cwiseAbs().maxCoeff() : 0.0) / tau_ / bnorm;
    dres = (n_ > 0 ? rd_.cwiseAbs().maxCoeff() : 0.0) / tau_ / cnorm;
    const double pobj = c_.dot(x_) / tau_, dobj = b_.dot(y_) / tau_;
    gap = std::max(std::abs(pobj - dobj), xs / (tau_ * tau_)) / (1.0 + std::abs(pobj) + std::abs(dobj));
    if (st_.verbose)
      std::fprintf(stderr, "%3d pobj %+.8e dobj %+.8e pres %.2e dres %.2e gap %.2e tau %.2e kap %.2e mu %.2e\n", it,
                   pobj, dobj, pres, dres, gap, tau_, kappa_, mu);

    if (pres <= st_.tol_feas && dres <= st_.tol_feas && gap <= st_.tol_gap) {
      finish(out, SolveStatus::optimal, pres, dres, gap);
      return out;
    }
    if (std::max({pres, dres, gap}) < best.score()) best = {x_, y_, s_, tau_, kappa_, pres, dres, gap};
    const double by = b_.dot(y_);
    if (by > 0) {
      const double res = (a_.transpose() * y_ + s_).cwiseAbs().maxCoeff() / by;
      if (res <= st_.tol_infeas) {
        finish(out, SolveStatus::infeasible, pres, dres, gap);
        return out;
      }
    }
    const double cx = -c_.dot(x_);
    if (cx > 0 && m_ >= 0) {
      const double res = (m_ > 0 ? (a_ * x_).cwiseAbs().maxCoeff() : 0.0) / cx;
      if (res <= st_.tol_infeas) {
        finish(out, SolveStatus::unbounded, pres, dres, gap);
        return out;
      }
    }
    if (it == st_.max_iter) break;

    bool ok = true;
    for (Block& b : blocks_) ok = ok && update_scaling(b, x_.segment(b.start, b.size), s_.segment(b.start, b.size));
    if (!ok) break;
    assemble_schur();
    if (!factor()) break;

    // direction associated with dtau
    {
      const VectorXd hc = hinv_full(c_);
      const VectorXd r1 = b_ + a_ * hc;
      const VectorXd r2 = free_part(c_);
      VectorXd dxf2;
      solve_refined(r1, r2, dy2_, dxf2);
      dx2_ = hinv_full(a_.transpose() * dy2_ - c_);
      scatter_free(dxf2, dx2_);
    }

    // predictor
    std::vector<VectorXd> rc(blocks_.size());
    std::vector<VectorXd> ll(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      ll[i] = jordan(blocks_[i], blocks_[i].lambda, blocks_[i].lambda);
      rc[i] = -ll[i];
    }
    const Direction pred = direction(1.0, rc, -tau_ * kappa_);
    const double alpha_aff = std::min(1.0, step_length(pred));
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

    // corrector
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const Block& b = blocks_[i];
      const VectorXd dxs = scale_x(b, pred.dx.segment(b.start, b.size));
      const VectorXd dss = scale_s(b, pred.ds.segment(b.start, b.size));
      rc[i] = sigma * mu * identity(b) - ll[i] - jordan(b, dxs, dss);
    }
    const double rtau = sigma * mu - tau_ * kappa_ - pred.dtau * pred.dkappa;
    const Direction d = direction(1.0 - sigma, rc, rtau);
    const double amax = step_length(d);
    const double alpha = std::min(1.0, 0.99 * amax);
    if (!(alpha > 1e-12)) break;
    small_steps = alpha < 1e-8 ? small_steps + 1 : 0;
    if (small_steps > 3) break;

    x_ += alpha * d.dx;
    y_ += alpha * d.dy;
    s_ += alpha * d.ds;
    tau_ += alpha * d.dtau;
    kappa_ += alpha * d.dkappa;
  }
  if (best.score() <= st_.tol_inaccurate) {
    x_ = best.x;
    y_ = best.y;
    s_ = best.s;
    tau_ = best.tau;
    kappa_ = best.kappa;
    finish(out, SolveStatus::inaccurate, best.pres, best.dres, best.gap);
    return out;
  }
  finish(out, SolveStatus::numerical_failure, pres, dres, gap);
  return out;
}

}  // namespace

ConicSolution solve(const ConicProgram& prog, const SolverSettings& settings) {
  Solver s(prog, settings);
  return s.run();
}

}  // namespace rbsos::conic
