// Periodic 1-D cell grid and cell-averaged fields.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sbl/math.hpp"

namespace sbl {

struct Grid1D {
  int n_cells = 0;
  double length = 0.0;   // domain [0, length), periodic
  double dx = 0.0;

  Grid1D() = default;
  Grid1D(int n, double l) : n_cells(n), length(l), dx(l / n) {
    if (n < 1 || !(l > 0.0)) throw std::invalid_argument("Grid1D: bad size");
  }

  double center(int i) const { return (i + 0.5) * dx; }
  int wrap(int i) const {
    int r = i % n_cells;
    return r < 0 ? r + n_cells : r;
  }
  bool operator==(const Grid1D& o) const {
    return n_cells == o.n_cells && length == o.length;
  }
  bool operator!=(const Grid1D& o) const { return !(*this == o); }
};

struct CellField {
  Grid1D grid;
  double time = 0.0;
  std::vector<double> data;

  CellField() = default;
  CellField(const Grid1D& g, double t, std::vector<double> d)
      : grid(g), time(t), data(std::move(d)) {
    if (static_cast<int>(data.size()) != g.n_cells)
      throw ShapeError("CellField: data size != n_cells");
  }
  static CellField constant(const Grid1D& g, double value, double t = 0.0) {
    return CellField(g, t, std::vector<double>(g.n_cells, value));
  }

  double linf() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
  }
  double min_value() const {
    double m = data.empty() ? 0.0 : data[0];
    for (double v : data) m = std::min(m, v);
    return m;
  }
  double max_value() const {
    double m = data.empty() ? 0.0 : data[0];
    for (double v : data) m = std::max(m, v);
    return m;
  }
  // integral of the piecewise-constant field
  double mass() const {
    double s = 0.0;
    for (double v : data) s += v;
    return s * grid.dx;
  }
  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// sum |f1 - f2| dx; grids must match.
inline double l1_distance(const CellField& f1, const CellField& f2) {
  if (f1.grid != f2.grid) throw ShapeError("l1_distance: grid mismatch");
  double s = 0.0;
  for (int i = 0; i < f1.grid.n_cells; ++i)
    s += std::abs(f1.data[i] - f2.data[i]);
  return s * f1.grid.dx;
}

}  // namespace sbl
