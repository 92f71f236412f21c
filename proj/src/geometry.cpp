#include "pscausal/geometry.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "pscausal/errors.hpp"

namespace pscausal {

namespace {

void check_interval(const Interval& iv, const char* name) {
  if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.hi > iv.lo))
    throw InvalidArgument(std::string("domain ") + name + " range must be finite and nonempty");
}

int axis_cell(double v, const Interval& iv, int n) {
  const int k = static_cast<int>(std::floor((v - iv.lo) / iv.length() * n));
  return k >= n ? n - 1 : k;
}

}  // namespace

GridGeometry build_grid(const Domain& domain, int nx, int ny) {
  if (nx < 1 || ny < 1) throw InvalidArgument("grid dimensions must be positive");
  check_interval(domain.x, "x");
  check_interval(domain.y, "y");

  GridGeometry grid;
  grid.domain = domain;
  grid.nx = nx;
  grid.ny = ny;
  grid.cell_area = domain.area() / (static_cast<double>(nx) * ny);
  grid.centroids.resize(nx * ny, 2);
  const double w = grid.cell_width(), h = grid.cell_height();
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      grid.centroids(grid.index(ix, iy), 0) = domain.x.lo + (ix + 0.5) * w;
      grid.centroids(grid.index(ix, iy), 1) = domain.y.lo + (iy + 0.5) * h;
    }
  return grid;
}

int locate(const GridGeometry& grid, const Eigen::Vector2d& s) {
  const Domain& d = grid.domain;
  if (!(s.x() >= d.x.lo && s.x() <= d.x.hi && s.y() >= d.y.lo && s.y() <= d.y.hi))
    throw OutOfDomain("point (" + std::to_string(s.x()) + ", " + std::to_string(s.y()) +
                      ") lies outside the domain");
  return grid.index(axis_cell(s.x(), d.x, grid.nx), axis_cell(s.y(), d.y, grid.ny));
}

Eigen::MatrixXd pairwise_distances(const Points& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    d(j, j) = 0.0;
    for (Eigen::Index i = j + 1; i < n; ++i) d(i, j) = d(j, i) = (points.row(i) - points.row(j)).norm();
  }
  return d;
}

Eigen::MatrixXd pairwise_centroid_distances(const GridGeometry& grid) {
  return pairwise_distances(grid.centroids);
}

CellMask read_mask_file(const std::string& path, int expected_cells) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open mask file " + path);
  CellMask mask;
  std::string line;
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line != "0" && line != "1") throw IngestionError(path, row, "mask", "expected 0 or 1");
    mask.push_back(line == "1");
  }
  if (static_cast<int>(mask.size()) != expected_cells)
    throw IngestionError(path + ": expected " + std::to_string(expected_cells) + " mask lines, found " +
                         std::to_string(mask.size()));
  return mask;
}

std::vector<int> active_cells(const CellMask& mask, int n_cells) {
  std::vector<int> out;
  for (int g = 0; g < n_cells; ++g)
    if (mask.empty() || mask[g]) out.push_back(g);
  return out;
}

}  // namespace pscausal
