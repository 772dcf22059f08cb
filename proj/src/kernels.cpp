#include "rbsos/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace rbsos::kernels {

namespace {

Eigen::MatrixXd dense_of(const PsdRow& row, Eigen::Index d) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  for (const SymEntry& e : row.entries) {
    a(e.r, e.c) += e.v;
    if (e.r != e.c) a(e.c, e.r) += e.v;
  }
  return a;
}

// W A W for one row.
void congruence(const Eigen::MatrixXd& w, const PsdRow& row, Eigen::MatrixXd& g) {
  const Eigen::Index d = w.rows();
  if (static_cast<Eigen::Index>(row.entries.size()) < d) {
    // H = sum v * w_r w_c^T with diagonal entries halved, then G = H + H^T
    g.setZero();
    for (const SymEntry& e : row.entries) {
      const double v = e.r == e.c ? 0.5 * e.v : e.v;
      g.noalias() += v * w.col(e.r) * w.col(e.c).transpose();
    }
    g = (g + g.transpose()).eval();
  } else {
    g.noalias() = w * dense_of(row, d) * w;
  }
}

double pair_inner(const PsdRow& row, const Eigen::MatrixXd& g) {
  double acc = 0.0;
  for (const SymEntry& e : row.entries) acc += e.r == e.c ? e.v * g(e.r, e.r) : 2.0 * e.v * g(e.r, e.c);
  return acc;
}

}  // namespace

void schur_psd(const Eigen::MatrixXd& w, std::span<const PsdRow> rows, Eigen::MatrixXd& m) {
  const auto count = static_cast<long long>(rows.size());
  const Eigen::Index d = w.rows();
#pragma omp parallel
  {
    Eigen::MatrixXd g(d, d);
#pragma omp for schedule(dynamic, 4)
    for (long long i = 0; i < count; ++i) {
      const PsdRow& ri = rows[static_cast<std::size_t>(i)];
      congruence(w, ri, g);
      for (long long j = i; j < count; ++j) {
        const PsdRow& rj = rows[static_cast<std::size_t>(j)];
        m(ri.row, rj.row) += pair_inner(rj, g);
      }
    }
  }
}

namespace reference {

void schur_psd(const Eigen::MatrixXd& w, std::span<const PsdRow> rows, Eigen::MatrixXd& m) {
  const Eigen::Index d = w.rows();
  std::vector<Eigen::MatrixXd> dense;
  dense.reserve(rows.size());
  for (const PsdRow& r : rows) dense.push_back(dense_of(r, d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Eigen::MatrixXd left = dense[i] * w;
    for (std::size_t j = i; j < rows.size(); ++j) {
      const Eigen::MatrixXd right = dense[j] * w;
      m(rows[i].row, rows[j].row) += (left * right).trace();
    }
  }
}

}  // namespace reference

Grid Grid::box(std::vector<double> lo, std::vector<double> hi, double step) {
  if (lo.size() != hi.size()) throw std::invalid_argument("grid: bound length mismatch");
  if (!(step > 0)) throw std::invalid_argument("grid: step must be positive");
  Grid g;
  g.step = step;
  g.lo = std::move(lo);
  for (std::size_t i = 0; i < hi.size(); ++i) {
    if (hi[i] < g.lo[i]) throw std::invalid_argument("grid: lo > hi");
    g.count.push_back(static_cast<int>(std::floor((hi[i] - g.lo[i]) / step + 1e-9)) + 1);
  }
  return g;
}

std::size_t Grid::size() const {
  std::size_t n = 1;
  for (int c : count) n *= static_cast<std::size_t>(c);
  return count.empty() ? 0 : n;
}

std::vector<double> Grid::point(std::size_t index) const {
  std::vector<double> p(lo.size());
  // last coordinate varies fastest
  for (std::size_t i = lo.size(); i-- > 0;) {
    const auto c = static_cast<std::size_t>(count[i]);
    p[i] = lo[i] + static_cast<double>(index % c) * step;
    index /= c;
  }
  return p;
}

}  // namespace rbsos::kernels
