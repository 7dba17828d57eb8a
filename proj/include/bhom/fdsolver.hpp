#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bhom/geometry.hpp"
#include "bhom/grid.hpp"
#include "bhom/operators.hpp"

namespace bhom {

/// Integer stencil directions (one of each +/- pair) and the orthogonal
/// frames built from them.
///
/// 2D: order 1 uses the axes, order 2 adds (1,1),(1,-1), order 3 adds the
/// knight moves (1,2),(2,-1),(2,1),(1,-2). 3D: order 1 uses the axes,
/// order >= 2 adds the six planar diagonals.
struct Stencil {
  int dim = 2;
  int order = 2;
  std::vector<std::array<int, 3>> dirs;
  std::vector<double> len2;              // |e|^2
  std::vector<std::vector<int>> frames;  // orthogonal direction sets
  int near_dirs = 0;                     // leading directions of reach 1
};

Stencil make_stencil(int dim, int order);

/// Nonnegative direction weights w_d with sum_d w_d e_d e_d^T / |e_d|^2 = A,
/// using only directions flagged in `available`.
struct WeightResult {
  bool ok = false;
  std::vector<double> w;
  std::string coefficient;  // entry blamed on failure, e.g. "a12"
  double value = 0.0;
};

WeightResult monotone_weights(const SymMatrix& A, const Stencil& st, std::span<const char> available);

/// Fast variable y = shift + matrix x; linear coefficients are seen in grid
/// coordinates as R^T a(y) R.
struct FastVariable {
  int dim = 2;
  std::array<double, 9> matrix{};
  Point shift;
  std::array<double, 9> rotation{};

  static FastVariable scaled(int dim, double epsilon);
  Point apply(std::span<const double> x) const;
};

struct DiscreteProblem {
  GridField grid;  // Dirichlet values on boundary nodes, initial guess elsewhere
  EllipticOperator op = EllipticOperator::laplacian(2);
  Stencil stencil;
  FastVariable fast;
  std::vector<double> source;  // per node
  int n_phys = 2;              // physical dimension (> 2 only for axisymmetric grids)

  std::vector<std::int32_t> interior;        // interior node indices
  std::vector<std::int32_t> unknown;         // node -> position in `interior`, or -1
  std::vector<std::int32_t> nbr;             // per interior node: (+e, -e) per direction, -1 if unusable
  std::vector<std::int32_t> tangential;      // axisymmetric: node at rho + h
  std::vector<std::uint32_t> frames_available;
  std::vector<double> weights;  // linear/Bellman: per interior node, member, direction
  std::string certificate;

  std::size_t ndirs() const { return stencil.dirs.size(); }
  Point y_of(std::int64_t node) const { return fast.apply(grid.coord(node)); }
};

using PointFunction = std::function<double(const Point&)>;

/// Masked grid over the bounding box of `dom` (two ghost layers). Boundary
/// nodes take `g` at their projection onto the boundary; `f` is sampled on
/// interior nodes.
DiscreteProblem discretize(const EllipticOperator& op, const Domain& dom, double h, int order,
                           const FastVariable& fast, const PointFunction& g, const PointFunction& f);

/// Axis-aligned box with nodes on the faces; `g` is evaluated at face nodes.
DiscreteProblem discretize_box(const EllipticOperator& op, Point lo, Point hi, double h, int order,
                               const FastVariable& fast, const PointFunction& g, const PointFunction& f);

/// Rotation-invariant problem in R^n_phys on the (rho, z) half-plane.
/// `phi(rho, z) <= 0` is the domain; boundary nodes take `g` at
/// `project(rho, z)`. Pucci operators only.
struct AxisymmetricGeometry {
  double rho_max = 1.0;
  double z_lo = -1.0;
  double z_hi = 1.0;
  std::function<double(const Point&)> phi;
  std::function<Point(const Point&)> project;
};

DiscreteProblem discretize_axisymmetric(const EllipticOperator& op, int n_phys, const AxisymmetricGeometry& geo,
                                        double h, int order, const PointFunction& g, const PointFunction& f);

/// Re-derives the node classification and stencil tables after the caller
/// edited `grid.mask` (Interior = inside, Exterior = outside).
void assemble(DiscreteProblem& p);

enum class SolveMethod { Howard, GaussSeidel, RedBlack };

struct SolveOptions {
  double tol = 1e-8;
  int max_policies = 50;
  int max_sweeps = 200000;
  SolveMethod method = SolveMethod::Howard;
  /// Gauss-Seidel relaxation; 0 selects 1.0 for linear and 0.8 otherwise.
  double damping = 0.0;
  bool use_cache = true;
  bool throw_on_failure = true;
  /// Warm start for interior nodes (Howard and Gauss-Seidel); empty means the grid values.
  std::span<const double> initial;
};

struct ConvergenceRecord {
  bool converged = false;
  std::string method;
  int iterations = 0;
  std::vector<double> residual_history;
  double final_residual = 0.0;
  bool red_black = false;
  bool factorization_reused = false;
};

struct SolveResult {
  GridField field;
  ConvergenceRecord record;
};

SolveResult solve_dirichlet(const DiscreteProblem& p, const SolveOptions& opt = {});

/// F_h[u] - f at interior nodes, NaN elsewhere.
std::vector<double> residual(const DiscreteProblem& p, std::span<const double> u);
double max_abs_residual(const DiscreteProblem& p, std::span<const double> u);

struct ComparisonReport {
  bool premises_hold = false;     // u super, v sub, u >= v on the boundary
  bool conclusion_holds = false;  // u >= v - tol at interior nodes
  double worst_margin = 0.0;      // min over interior of u - v
  std::int64_t worst_node = -1;
  double max_super_residual = 0.0;
  double min_sub_residual = 0.0;
  double min_boundary_gap = 0.0;
  /// The principle is violated only if the premises hold and the conclusion fails.
  bool consistent() const { return !premises_hold || conclusion_holds; }
};

ComparisonReport comparison_check(const DiscreteProblem& p, const GridField& u, const GridField& v, double tol = 1e-8);

struct OscillationDecay {
  std::vector<double> radii;
  std::vector<double> osc;
  /// Per-halving contraction from a log-log fit; 0 when u is constant.
  double gamma = 0.0;
};

OscillationDecay oscillation_decay_probe(const GridField& u, std::span<const double> center,
                                         std::span<const double> radii);

/// Drops every cached factorization.
void clear_factorization_cache();

}  // namespace bhom
