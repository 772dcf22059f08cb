// Parallel kernels against their serial references.
#include "rbsos/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace rbsos::kernels;

struct SchurCase {
  Eigen::MatrixXd w;
  std::vector<PsdRow> rows;
};

// Rows shaped like coefficient matching on a Gram block: each row couples the
// basis pairs whose product lands on one monomial.
SchurCase make_case(int order, int nrows, int per_row) {
  std::mt19937 rng(1);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> pick(0, order - 1);
  SchurCase c;
  Eigen::MatrixXd f(order, order);
  for (int i = 0; i < f.size(); ++i) f.data()[i] = nd(rng);
  c.w = f * f.transpose() + Eigen::MatrixXd::Identity(order, order);
  for (int r = 0; r < nrows; ++r) {
    PsdRow row;
    row.row = r;
    for (int e = 0; e < per_row; ++e) {
      int a = pick(rng), b = pick(rng);
      if (a < b) std::swap(a, b);
      row.entries.push_back({a, b, nd(rng)});
    }
    c.rows.push_back(std::move(row));
  }
  return c;
}

void BM_SchurParallel(benchmark::State& state) {
  const auto c = make_case(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 8);
  Eigen::MatrixXd m(state.range(1), state.range(1));
  for (auto _ : state) {
    m.setZero();
    schur_psd(c.w, c.rows, m);
    benchmark::DoNotOptimize(m.data());
  }
}

void BM_SchurReference(benchmark::State& state) {
  const auto c = make_case(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 8);
  Eigen::MatrixXd m(state.range(1), state.range(1));
  for (auto _ : state) {
    m.setZero();
    reference::schur_psd(c.w, c.rows, m);
    benchmark::DoNotOptimize(m.data());
  }
}

double bowl(const std::vector<double>& p) {
  double s = 0;
  for (double v : p) s += v * v * v * v - v;
  return s;
}

bool disk(const std::vector<double>& p) { return p[0] * p[0] + p[1] * p[1] <= 4.0; }

void BM_GridParallel(benchmark::State& state) {
  const Grid g = Grid::box({-3, -3}, {3, 3}, 6.0 / static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(grid_minimum(g, bowl, disk).value);
}

void BM_GridReference(benchmark::State& state) {
  const Grid g = Grid::box({-3, -3}, {3, 3}, 6.0 / static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::grid_minimum(g, bowl, disk).value);
}

}  // namespace

BENCHMARK(BM_SchurParallel)->Args({21, 120})->Args({56, 462});
BENCHMARK(BM_SchurReference)->Args({21, 120})->Args({56, 462});
BENCHMARK(BM_GridParallel)->Arg(200)->Arg(600);
BENCHMARK(BM_GridReference)->Arg(200)->Arg(600);

BENCHMARK_MAIN();
