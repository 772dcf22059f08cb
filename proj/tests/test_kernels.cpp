#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rbsos/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <random>

using namespace rbsos::kernels;
using Eigen::MatrixXd;

namespace {

std::vector<PsdRow> random_rows(std::mt19937& rng, int order, int count) {
  std::uniform_int_distribution<int> idx(0, order - 1), nnz(1, 2 * order);
  std::normal_distribution<double> nd;
  std::vector<PsdRow> rows;
  for (int i = 0; i < count; ++i) {
    PsdRow r{2 * i + 1, {}};
    const int k = i % 5 == 0 ? order * order : nnz(rng);
    for (int e = 0; e < k; ++e) {
      int a = idx(rng), b = idx(rng);
      if (a < b) std::swap(a, b);
      r.entries.push_back({a, b, nd(rng)});
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

TEST_CASE("schur_psd matches the dense reference") {
  std::mt19937 rng(31);
  std::normal_distribution<double> nd;
  for (int order : {1, 3, 6, 10}) {
    MatrixXd f(order, order);
    for (int i = 0; i < f.size(); ++i) f.data()[i] = nd(rng);
    const MatrixXd w = f * f.transpose() + MatrixXd::Identity(order, order);
    const auto rows = random_rows(rng, order, 3 * order);
    const int dim = 2 * static_cast<int>(rows.size()) + 2;
    MatrixXd par = MatrixXd::Zero(dim, dim), ref = MatrixXd::Zero(dim, dim);
    schur_psd(w, rows, par);
    reference::schur_psd(w, rows, ref);
    CHECK((par - ref).cwiseAbs().maxCoeff() <= 1e-10 * (1 + ref.cwiseAbs().maxCoeff()));
    // independent oracle for one pair: <A_i, W A_j W> from explicit matrices
    auto dense = [&](const PsdRow& r) {
      MatrixXd a = MatrixXd::Zero(order, order);
      for (const auto& e : r.entries) {
        a(e.r, e.c) += e.v;
        if (e.r != e.c) a(e.c, e.r) += e.v;
      }
      return a;
    };
    const MatrixXd a0 = dense(rows.front()), a1 = dense(rows.back());
    const double expect = (a0 * w * a1 * w).trace();
    CHECK(par(rows.front().row, rows.back().row) == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("grid_minimum matches the serial scan, ties included") {
  const Grid g = Grid::box({-2.0, -2.0}, {2.0, 2.0}, 0.05);
  CHECK(g.size() == 81u * 81u);
  auto f = [](const std::vector<double>& p) { return std::round(10 * (p[0] * p[0] + std::abs(p[1] - 0.5))) / 10; };
  auto feas = [](const std::vector<double>& p) { return p[0] + p[1] <= 1.0; };
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    const auto par = grid_minimum(g, f, feas);
    const auto ref = reference::grid_minimum(g, f, feas);
    CHECK(par.feasible == ref.feasible);
    CHECK(par.value == ref.value);
    CHECK(par.index == ref.index);
  }
  const auto none = grid_minimum(g, f, [](const std::vector<double>&) { return false; });
  CHECK_FALSE(none.found());
  const auto p = g.point(g.size() - 1);
  CHECK(p[0] == doctest::Approx(2.0));
  CHECK(p[1] == doctest::Approx(2.0));
  CHECK(g.point(1)[1] == doctest::Approx(-1.95));
}
