#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bhom/expr.hpp"
#include "bhom/linalg.hpp"

namespace bhom {

using IntVec = std::vector<std::int64_t>;

/// A unit direction with its rationality class at finite precision.
///
/// A direction is Rational relative to (tol, max_denominator) when some
/// primitive integer vector m with max|m_i| <= max_denominator satisfies
/// |m/|m| - nu| <= tol. `m` is then the unique primitive representative
/// pointing the same way as `nu`.
struct Direction {
  Point nu;
  bool rational = false;
  IntVec m;
  double tol = 1e-9;
  std::int64_t max_denominator = 10000;

  int dim() const { return static_cast<int>(nu.size()); }
  /// Coordinate with the largest |nu_i|; the hyperplane nu.y = 0 is written
  /// as a graph over the remaining coordinates.
  int pivot() const;
};

Direction classify_direction(std::span<const double> v, double tol = 1e-9,
                             std::int64_t max_denominator = 10000);

struct DeltaMembership {
  bool member = false;
  /// Irrational directions are members vacuously.
  bool vacuous = false;
};

/// Membership in D_delta: max_i |m_i| > 1/delta for the primitive m.
DeltaMembership in_D_delta(const Direction& d, double delta);

/// Integer points m' of the cube [0,R)^(n-1) and the count of those whose
/// hyperplane height h(m') has fractional part in [t0, t0+delta) mod 1.
struct EquidistRecord {
  std::int64_t A = 0;
  std::int64_t N = 0;
  double ratio = 0.0;
};

EquidistRecord equidist_ratio(const Direction& d, double delta, double t0, std::int64_t R);

/// Height of the hyperplane nu.y = 0 over the integer point m' (graph
/// coordinates exclude the pivot). Exact fractional parts are used for
/// rational directions.
double hyperplane_height(const Direction& d, std::span<const std::int64_t> m_prime);
double hyperplane_frac(const Direction& d, std::span<const std::int64_t> m_prime);

struct HyperplaneLattice {
  Direction direction;
  std::int64_t cube_side = 0;
  IntVec cube_index;
  Point hat_point;      // on the hyperplane nu.y = 0
  IntVec integer_anchor;  // hat_point - integer_anchor = t e_pivot
  double frac_part = 0.0;
};

struct NearIntegerResult {
  HyperplaneLattice lattice;
  std::int64_t R_used = 0;
};

/// Finds an integer point m' in the cube k'R + [0,R)^(n-1) whose hyperplane
/// height has fractional part <= delta, doubling R until one exists.
/// Throws NoNearIntegerPoint for rational directions outside D_delta.
NearIntegerResult near_integer_point(const Direction& d, std::span<const std::int64_t> cube_index,
                                     double delta);

/// All primitive integer vectors in Z^n (both signs) with max|m_i| <= bound.
std::vector<IntVec> primitive_vectors(int n, std::int64_t bound);

enum class DomainKind { Disk, HalfDiskFlatBottom, Rectangle, Implicit };

std::string to_string(DomainKind k);

/// Bounded domain given by a level set phi < 0 with an arclength boundary
/// parameterization in 2D. Disks and rectangles also work in 3D (ball, box)
/// for masking, projection and normals.
class Domain {
 public:
  static Domain disk(Point center, double radius);
  /// {|x - c| < r, x_2 > c_2}; defaults give the unit upper half-disk resting
  /// on the line x_2 = 1.
  static Domain half_disk_flat_bottom(Point center = {0.0, 1.0}, double radius = 1.0);
  static Domain rectangle(Point lo, Point hi);
  /// Star-shaped (about the box center) domain {phi < 0} inside [lo, hi].
  static Domain implicit(Expr phi, Point lo, Point hi, int resolution = 2048);

  DomainKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(lo_.size()); }
  const Point& lo() const { return lo_; }
  const Point& hi() const { return hi_; }
  const Point& center() const { return center_; }
  double radius() const { return radius_; }

  double phi(std::span<const double> x) const;
  bool contains(std::span<const double> x, double slack = 0.0) const { return phi(x) <= slack; }
  /// Closest boundary point.
  Point project(std::span<const double> x) const;
  /// Outward unit normal at a boundary point; empty when the level-set
  /// gradient degenerates.
  Point outward_normal(std::span<const double> xb) const;
  /// Distance from an interior point to the boundary.
  double distance_to_boundary(std::span<const double> x) const;

  double perimeter() const;
  Point boundary_point(double s) const;
  double arclength_of(std::span<const double> xb) const;
  double diameter() const;
  /// Reference point for the concentric scaled copies used as compact sets.
  Point centroid() const;
  /// Arclength positions where the outward normal equals `normal`; flat
  /// facets are returned as intervals (first < second).
  std::vector<std::pair<double, double>> arcs_with_normal(std::span<const double> normal,
                                                          int resolution = 8192) const;

  std::string describe() const;

 private:
  DomainKind kind_ = DomainKind::Disk;
  Point center_, lo_, hi_;
  double radius_ = 0.0;
  Expr phi_expr_;
  // Implicit boundary polyline with cumulative arclength.
  std::vector<Point> poly_;
  std::vector<double> cum_;
};

struct RationalRun {
  double s_begin = 0.0;
  double s_end = 0.0;
  int count = 0;
  IntVec m;
};

struct IddcAudit {
  int samples = 0;
  double rational_fraction = 0.0;
  std::vector<std::pair<double, IntVec>> rational_points;  // (arclength, m)
  std::vector<RationalRun> rational_intervals;             // runs longer than 2 samples
  std::vector<double> degenerate_points;                   // arclength of zero-gradient samples
  bool plausible = false;
  std::string verdict;
};

/// Sampling heuristic: can refute the IDDC (flat rational facets) or report
/// plausibility; it cannot prove it.
IddcAudit iddc_audit(const Domain& dom, int samples, std::int64_t max_denominator, double tol = 1e-9);

}  // namespace bhom
