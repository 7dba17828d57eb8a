#pragma once

#include <span>
#include <string>
#include <vector>

#include "bhom/linalg.hpp"
#include "bhom/operators.hpp"

namespace bhom {

/// alpha = (n-1) lambda / Lambda - 1 for the interior power barrier |x|^-alpha.
/// Throws StabilityError unless (n-1) lambda > Lambda.
double exponent_interior(int n, double lambda, double Lambda);

/// alpha = (Lambda / lambda)(n-1) - 1 for the exterior-ball barrier.
/// Throws DegenerateBarrier when alpha <= 0 (the logarithmic case).
double exponent_exterior(int n, double lambda, double Lambda);

enum class BarrierKind { QuadStrip, RadialInterior, RadialExterior };

std::string to_string(BarrierKind k);

/// Explicit supersolutions of M+.
///
/// QuadStrip: amplitude * (|x'/s|^2 + c (1 - (x_n/s - 1)^2)) on the box
/// |x'_i| <= s/2, 0 <= x_n <= s, with c = (n-1) Lambda / lambda.
/// RadialInterior: |x - center|^-alpha.
/// RadialExterior: r0^-alpha - |x - center|^-alpha.
struct BarrierSpec {
  BarrierKind kind = BarrierKind::QuadStrip;
  int n = 2;
  double lambda = 1.0;
  double Lambda = 1.0;
  double scale = 1.0;
  double coefficient = 0.0;
  double amplitude = 1.0;
  double alpha = 0.0;
  Point center;
  double r0 = 0.0;

  static BarrierSpec quad_strip(int n, double lambda, double Lambda, double scale, double amplitude = 1.0);
  static BarrierSpec radial_interior(int n, double lambda, double Lambda, Point center);
  static BarrierSpec radial_exterior(int n, double lambda, double Lambda, Point center, double r0);

  std::string describe() const;
};

double barrier_value(const BarrierSpec& b, std::span<const double> x);
SymMatrix barrier_hessian(const BarrierSpec& b, std::span<const double> x);

struct SupersolutionReport {
  int samples = 0;
  double max_operator_value = 0.0;  // max F(D^2 b) over the samples
  Point worst_point;
  bool holds = false;
  /// QuadStrip only: min of the barrier over the top and lateral faces.
  bool checks_boundary = false;
  double min_boundary_value = 0.0;
  bool boundary_dominates = false;
};

/// F(D^2 b) <= tol at every sample; QuadStrip also checks b >= 1 on the top
/// and lateral faces of its box.
SupersolutionReport verify_supersolution(const BarrierSpec& b, const EllipticOperator& op,
                                         std::span<const Point> samples, double tol = 1e-9);

/// Evenly spaced samples of the barrier's natural region: the strip box, or
/// the shell between radii `inner` and `outer` for the radial kinds.
std::vector<Point> barrier_region_samples(const BarrierSpec& b, int count, double inner = 0.0, double outer = 0.0,
                                          unsigned seed = 1);

/// sum_i r_m^alpha / dist(z_i, K)^alpha with the interior exponent; K is
/// given by sample points.
double finite_boundary_stability_bound(std::span<const Point> points, double r_m, std::span<const Point> K, int n,
                                       double lambda, double Lambda);

}  // namespace bhom
