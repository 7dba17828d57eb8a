#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bhom/expr.hpp"
#include "bhom/fdsolver.hpp"
#include "bhom/geometry.hpp"
#include "bhom/operators.hpp"

namespace bhom {

/// Truncation and readout constants of the half-space corrector. Lengths are
/// in period cells of g (the corrector is epsilon-free after recentering).
struct StripParams {
  double T = 4.0;         // strip height
  double L = 0.0;         // strip width; 0 selects 8 T
  double h = 1.0 / 32.0;  // grid spacing
  int order = 2;          // stencil order
  double tol = 1e-8;      // solver residual tolerance
  bool refine_top = true; // move the top to the fixed point of top -> ray limit (secant)
  int rays = 3;           // independence cross-check rays
  std::uint64_t seed = 1;
  double equality_factor = 3.0;  // gbar* = gbar_* when spread <= factor * max err + 1e-6
  int threads = 0;               // 0: hardware concurrency
  Point g_period;                // period cell of g(x0, .); empty means unit

  double width() const { return L > 0.0 ? L : 8.0 * T; }
};

/// w solves F(D^2 w, y) = 0 on the strip {y0 + Q xi : xi' in (-L/2, L/2)^(n-1),
/// 0 < xi_n < T} with w = g(x0, .) on the bottom face.
struct HalfspaceCorrectorProblem {
  Point x0;
  Direction nu;  // inward normal; last column of the frame
  double epsilon = 1.0;
  Point y0;      // x0 / epsilon
  std::vector<Point> frame;  // columns of Q
  StripParams params;
  Expr g;
  EllipticOperator op = EllipticOperator::laplacian(2);
  double top_value = 0.0;
  DiscreteProblem discrete;  // strip grid in xi coordinates

  int dim() const { return static_cast<int>(y0.size()); }
  /// y(xi) = y0 + Q xi.
  Point y_of(std::span<const double> xi) const;
  /// g(x0, y(xi', 0)).
  double bottom_value(std::span<const double> xi_prime) const;
};

/// Builds the strip. Lateral faces take the bottom trace of their foot
/// (constant in height); the top takes the mean of the bottom trace.
/// Throws DomainError when L < 2T.
HalfspaceCorrectorProblem build_strip(std::span<const double> x0, const Direction& nu, double epsilon, const Expr& g,
                                      const EllipticOperator& op, const StripParams& params);

/// Resets the top face to `value`.
void set_top_value(HalfspaceCorrectorProblem& p, double value);

struct OscillationProfile {
  std::vector<double> heights;  // T k / 8, k = 1..8
  std::vector<double> W;        // osc over the central window |xi'| <= L/4
  double fitted_exponent = 0.0; // W ~ t^-beta over positive entries
  double gamma_est = 0.0;       // 2^-beta, per doubling of t
  bool non_increasing = true;   // within 10 * tol
};

struct CorrectorSolution {
  GridField field;
  OscillationProfile profile;
  ConvergenceRecord record;
  /// Influence of the lateral faces on the window at the readout height:
  /// osc of the bottom trace times the solved M+ lateral barrier.
  double lateral_bound = 0.0;
  /// Influence of the top face: (|top - window mean| + W near the top) times
  /// the solved M+ top barrier.
  double top_bound = 0.0;
  /// Explicit quadratic-barrier bound on the lateral influence (loose; for reporting).
  double quadratic_lateral_bound = 0.0;
};

/// `warm` is an optional initial guess on the strip grid.
CorrectorSolution solve_corrector(const HalfspaceCorrectorProblem& p, std::span<const double> warm = {});

struct RayLimit {
  double alpha = 0.0;
  double err = 0.0;
  double W_readout = 0.0;
  double lateral = 0.0;
  double top = 0.0;
  std::vector<double> ray_values;
  double spread = 0.0;  // max |ray value - alpha|
  bool flagged = false; // spread > err: strip too short
};

/// Window mean at t* = 3T/4 with its error bar, cross-checked along random rays.
RayLimit ray_limit(const HalfspaceCorrectorProblem& p, const CorrectorSolution& s);

struct RefinedCorrector {
  CorrectorSolution solution;
  RayLimit limit;
  int solves = 0;
};

/// solve_corrector followed by the top refinement selected in p.params;
/// leaves p.top_value at the final top.
RefinedCorrector solve_corrector_refined(HalfspaceCorrectorProblem& p);

struct GbarRecord {
  double epsilon = 0.0;
  double alpha = 0.0;
  double err = 0.0;
  double spread = 0.0;
  bool flagged = false;
  int solves = 0;
};

struct GbarEstimate {
  Point x0;
  Direction nu;
  std::vector<GbarRecord> records;  // sorted by epsilon
  double gbar_star = 0.0;           // max alpha
  double gbar_lower = 0.0;          // min alpha
  double max_err = 0.0;
  bool equal = false;
  double gbar = 0.0;                // mean alpha when equal
  std::vector<double> flagged_eps;
};

/// One corrector solve (plus the optional top refinement, up to two more) at a single epsilon.
GbarRecord corrector_ray_limit(std::span<const double> x0, const Direction& nu, double epsilon, const Expr& g,
                               const EllipticOperator& op, const StripParams& params);

GbarEstimate estimate_gbar(std::span<const double> x0, const Direction& nu, std::span<const double> eps_list,
                           const Expr& g, const EllipticOperator& op, const StripParams& params);

struct ContinuityRow {
  Point nu;
  bool skipped = false;
  std::string note;
  double gbar = 0.0;
  double err = 0.0;
};

struct ContinuityTable {
  std::vector<ContinuityRow> rows;
  double max_deviation = 0.0;   // over pairs of estimated directions
  double max_angle = 0.0;       // largest pairwise angle among them
};

ContinuityTable gbar_continuity_probe(std::span<const double> x0, const std::vector<Point>& directions,
                                      std::span<const double> eps_list, const Expr& g, const EllipticOperator& op,
                                      const StripParams& params);

struct CellAverage {
  double value = 0.0;
  double coarse = 0.0;          // at half the resolution
  double error_estimate = 0.0;  // |value - coarse| / 3 (Richardson, second order)
};

/// Midpoint rule over one period cell of g(x0, .).
CellAverage cell_average(const Expr& g, std::span<const double> x0, std::span<const double> period, int dim,
                         int quadrature_n);

struct TranslationRow {
  double epsilon = 0.0;
  double d = 0.0;
  double deviation = 0.0;  // sup over the shared window of |w_2 - w_1|
  double constant = 0.0;   // deviation / (|g|_C2 d)
};

/// Shifts y0 by d along nu and compares the two strip solutions on their
/// common region.
std::vector<TranslationRow> translation_stability(std::span<const double> x0, const Direction& nu,
                                                  std::span<const double> eps_list, std::span<const double> shifts,
                                                  const Expr& g, const EllipticOperator& op,
                                                  const StripParams& params);

}  // namespace bhom
