#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "bhom/linalg.hpp"

namespace bhom {

enum class NodeType : std::uint8_t { Exterior = 0, Boundary = 1, Interior = 2 };

/// Masked uniform grid. Node (i, j, k) sits at origin + h (i, j, k) and has
/// linear index i + e0 (j + e1 k), so the first axis varies fastest.
///
/// An axisymmetric grid is two-dimensional over (rho, z) with rho >= 0 on
/// the first axis; it represents a rotation-invariant field in R^n_phys.
struct GridField {
  int dim = 2;
  std::array<int, 3> extents{1, 1, 1};
  double h = 1.0;
  Point origin;
  bool axisymmetric = false;
  std::vector<NodeType> mask;
  std::vector<double> values;

  static GridField make(int dim, Point origin, std::array<int, 3> extents, double h);

  std::size_t size() const { return mask.size(); }
  std::int64_t index(const std::array<int, 3>& ijk) const {
    return ijk[0] + static_cast<std::int64_t>(extents[0]) * (ijk[1] + static_cast<std::int64_t>(extents[1]) * ijk[2]);
  }
  std::array<int, 3> multi_index(std::int64_t idx) const;
  bool valid(const std::array<int, 3>& ijk) const;
  Point coord(std::int64_t idx) const;
  /// Multilinear interpolation; NaN when a needed node is exterior or the
  /// point is outside the grid.
  double interpolate(std::span<const double> x) const;
  std::int64_t count(NodeType t) const;
};

/// Plain-text dump: header lines `dim`, `extents`, `h`, `origin`,
/// `axisymmetric`, then one line of values per grid row (first axis varies
/// along the line, exterior nodes written as nan), then the mask rows.
void write_grid(std::ostream& os, const GridField& g);
GridField read_grid(std::istream& is);

/// CSV `coord,value` along the line where axis `fixed_axis` is nearest to
/// `at` (2D grids).
void write_cross_section_csv(std::ostream& os, const GridField& g, int fixed_axis, double at);

}  // namespace bhom
