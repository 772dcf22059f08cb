#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace rbsos::kernels {

// Entry of a symmetric constraint matrix: value at (r, c) and, when r != c, at (c, r).
struct SymEntry {
  int r;
  int c;
  double v;
};

// One equality row restricted to a psd block.
struct PsdRow {
  int row;
  std::vector<SymEntry> entries;
};

// Adds <A_i, W A_j W> to M(row_i, row_j) for every pair of rows in `rows`
// (upper triangle only; rows sorted by increasing row index). OpenMP over i.
void schur_psd(const Eigen::MatrixXd& w, std::span<const PsdRow> rows, Eigen::MatrixXd& m);

namespace reference {
// Serial dense version: forms every A_i explicitly.
void schur_psd(const Eigen::MatrixXd& w, std::span<const PsdRow> rows, Eigen::MatrixXd& m);
}  // namespace reference

// Regular grid lo + k*step per coordinate, k = 0..count-1.
struct Grid {
  std::vector<double> lo;
  std::vector<int> count;
  double step = 0.01;

  static Grid box(std::vector<double> lo, std::vector<double> hi, double step);
  std::size_t size() const;
  std::vector<double> point(std::size_t index) const;
};

struct GridMinimum {
  double value = std::numeric_limits<double>::infinity();
  std::size_t index = 0;
  std::size_t feasible = 0;
  bool found() const { return feasible > 0; }
};

namespace detail {
inline void merge(GridMinimum& into, const GridMinimum& from) {
  into.feasible += from.feasible;
  if (from.value < into.value || (from.value == into.value && from.index < into.index)) {
    into.value = from.value;
    into.index = from.index;
  }
}
}  // namespace detail

// Minimum of f over grid points where feasible(point) holds. Ties resolve to the
// lowest index so the result matches the serial scan.
template <class F, class Feasible>
GridMinimum grid_minimum(const Grid& grid, F f, Feasible feasible) {
  const auto total = static_cast<long long>(grid.size());
  GridMinimum best;
#pragma omp parallel
  {
    GridMinimum local;
#pragma omp for schedule(dynamic, 256) nowait
    for (long long k = 0; k < total; ++k) {
      const auto idx = static_cast<std::size_t>(k);
      const std::vector<double> p = grid.point(idx);
      if (!feasible(p)) continue;
      ++local.feasible;
      const double v = f(p);
      if (v < local.value || (v == local.value && idx < local.index)) {
        local.value = v;
        local.index = idx;
      }
    }
#pragma omp critical(rbsos_grid_minimum)
    detail::merge(best, local);
  }
  return best;
}

namespace reference {
template <class F, class Feasible>
GridMinimum grid_minimum(const Grid& grid, F f, Feasible feasible) {
  GridMinimum best;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const std::vector<double> p = grid.point(k);
    if (!feasible(p)) continue;
    ++best.feasible;
    const double v = f(p);
    if (v < best.value) {
      best.value = v;
      best.index = k;
    }
  }
  return best;
}
}  // namespace reference

}  // namespace rbsos::kernels
