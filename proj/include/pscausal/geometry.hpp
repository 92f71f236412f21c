#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace pscausal {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 2>;

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

struct Domain {
  Interval x{0.0, 1.0};
  Interval y{0.0, 1.0};
  double area() const { return x.length() * y.length(); }
};

/// Rectangular partition into nx*ny equal cells, indexed row-major with x fastest.
struct GridGeometry {
  Domain domain;
  int nx = 0;
  int ny = 0;
  Points centroids;
  double cell_area = 0.0;

  int size() const { return nx * ny; }
  double cell_width() const { return domain.x.length() / nx; }
  double cell_height() const { return domain.y.length() / ny; }
  int index(int ix, int iy) const { return iy * nx + ix; }
};

GridGeometry build_grid(const Domain& domain, int nx, int ny);

/// Cell containing s. Cells are half-open on the upper edge except the last row/column.
int locate(const GridGeometry& grid, const Eigen::Vector2d& s);

Eigen::MatrixXd pairwise_distances(const Points& points);
Eigen::MatrixXd pairwise_centroid_distances(const GridGeometry& grid);

/// Active-cell mask; an empty vector means every cell is active.
using CellMask = std::vector<bool>;

CellMask read_mask_file(const std::string& path, int expected_cells);
std::vector<int> active_cells(const CellMask& mask, int n_cells);

}  // namespace pscausal
