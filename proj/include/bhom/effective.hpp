#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bhom/corrector.hpp"
#include "bhom/fdsolver.hpp"
#include "bhom/geometry.hpp"
#include "bhom/operators.hpp"

namespace bhom {

/// F(D^2 u, x/eps) = f(x, x/eps) in D, u = g(x, x/eps) on the boundary.
struct OscillatingProblem {
  Domain domain = Domain::disk({0.0, 0.0}, 1.0);
  double epsilon = 0.1;
  EllipticOperator op = EllipticOperator::laplacian(2);
  SourceAndBoundaryData data;
};

struct OscillatingSolution {
  GridField field;
  ConvergenceRecord record;
  double epsilon = 0.0;
  double h = 0.0;
  double sup_u = 0.0;
  /// C |f| + |g| with C = diam^2 / (8 lambda), from the paraboloid supersolution.
  double uniform_bound = 0.0;
  bool bound_holds = true;
  std::vector<std::string> warnings;
};

/// Refuses h > eps/8. eps > diam/10 is allowed with a warning.
OscillatingSolution solve_oscillating(const OscillatingProblem& p, double h, int order = 2, double tol = 1e-8);

/// Concentric copy c + scale (D - c) about the domain centroid.
struct CompactSet {
  double scale = 2.0 / 3.0;
  bool contains(const Domain& dom, std::span<const double> x) const;
};

struct BoundaryLayerParams {
  double p = 0.6;
  double q = 0.85;
  StripParams strip;
};

struct BoundaryLayerReport {
  Point x0;
  double epsilon = 0.0;
  double p = 0.0, q = 0.0;
  double deviation = 0.0;  // max |u_eps(x) - w(xi)| over the matching ball
  double scale = 0.0;      // eps^(2p-1)
  double constant = 0.0;   // deviation / scale
  double alpha = 0.0;      // corrector ray limit
  int points = 0;
  bool flagged = false;
};

/// Compares u_eps near the boundary point x0 with the matching half-space
/// corrector on the ball of radius eps^q about x0.
BoundaryLayerReport boundary_layer_compare(const OscillatingProblem& p, const GridField& u_eps,
                                           std::span<const double> x0, const BoundaryLayerParams& params);

/// max C / min C over the reports.
double constant_spread(std::span<const BoundaryLayerReport> reports);

/// Equally spaced arclength positions s_k = P (k + offset) / count.
std::vector<double> boundary_arclengths(const Domain& dom, int count, double offset = 0.37);

/// One boundary point of the envelope sampling.
struct GbarSample {
  double s = 0.0;
  Point x;
  Point nu;  // inward normal
  bool rational = false;
  IntVec m;
  std::string status;  // "irrational", "rational in D_delta", "failed: ..."
  bool usable = false;
  double gbar = 0.0;  // mean over epsilon when equal, else midpoint
  double gbar_star = 0.0;
  double gbar_lower = 0.0;
  double err = 0.0;
  bool equal = false;
  bool flagged = false;
};

/// A boundary point whose normal is rational outside D_delta (an E_delta
/// point), or a flat facet of such points.
struct ExcludedPoint {
  double s_begin = 0.0;
  double s_end = 0.0;
  Point z;
  IntVec m;
  int max_m = 0;        // max |m_i|
  bool corner = false;  // several E_delta normals meet: no half-space corrector
  bool estimated = false;
  double gbar_star = 0.0;
  double gbar_lower = 0.0;
  double err = 0.0;
};

struct EnvelopeBump {
  double s_begin = 0.0, s_end = 0.0;
  double lift_plus = 0.0;
  double lift_minus = 0.0;
};

/// h+ and h- for one delta. Samples (widened by their own error bars) are
/// mollified along arclength and shifted by delta; bumps of radius r lift
/// them on the excluded points whose observed range leaves that band.
struct EnvelopeLayer {
  double delta = 0.0;
  double mollifier_radius = 0.0;
  double slack = 0.0;  // max sample error bar (diagnostic)
  double cap = 0.0;    // 3 sup|g|
  double perimeter = 0.0;
  bool closed = true;
  std::vector<double> s, plus, minus;  // gbar* + err and gbar_* - err per sample
  std::vector<EnvelopeBump> bumps;
  double bump_radius = 0.0;

  double base_plus(double at) const;
  double base_minus(double at) const;
  double bump_profile(const EnvelopeBump& b, double at) const;  // 1 within r, 0 beyond 2r
  double h_plus(double at) const;
  double h_minus(double at) const;
};

struct BoundaryEnvelope {
  double delta = 0.0;  // sampling delta: E_delta points with max|m| <= 1/delta were estimated
  double perimeter = 0.0;
  double g_sup = 0.0;
  std::vector<GbarSample> samples;  // sorted by arclength
  std::vector<ExcludedPoint> excluded;
  std::vector<EnvelopeLayer> layers;  // empty until built; h+ = min, h- = max over layers

  bool completed() const { return !layers.empty(); }
  double h_plus(double s) const;
  double h_minus(double s) const;

  // Diagnostics of the last build.
  double sup_K_bump = 0.0;
  bool bump_within_delta = true;
  double max_gap_outside = 0.0;      // max of h+ - h- away from bumps
  double ordering_violation = 0.0;   // how far usable samples leave [h-, h+] beyond their error bars
};

struct GbarSamplingParams {
  std::vector<double> eps_list = {0.1, 0.05};
  StripParams strip;
  double delta = 0.1;
  double direction_tol = 1e-9;
  std::int64_t max_denominator = 10000;
};

/// Estimates gbar at the given arclength positions and at every E_delta
/// point. Per-point failures are recorded, not thrown. 2D only.
BoundaryEnvelope sample_gbar_on_boundary(const OscillatingProblem& p, std::span<const double> arclengths,
                                         const GbarSamplingParams& params);

struct EnvelopeParams {
  double delta = 0.1;
  double mollifier_radius = 0.1;
  double continuity_radius = 0.0;  // 0: mollifier radius
  double exclusion_radius = 0.05;  // samples this close to a lifted E_delta point are skipped
  double bump_radius = 0.05;       // initial r, halved until sup_K bump <= delta
  double bump_h = 1.0 / 64.0;      // grid for the bump solves
  bool worst_case_bump = false;    // lift every E_delta point by 2 sup|g|
  CompactSet K;
};

/// Completes the envelope for params.delta >= env.delta. Throws
/// DeltaContinuityError naming the offending pair, DomainError when the
/// samples are too sparse for the mollifier.
BoundaryEnvelope build_envelopes(const OscillatingProblem& p, BoundaryEnvelope env, const EnvelopeParams& params);

/// Monotone family: h+ = min, h- = max of both envelopes.
BoundaryEnvelope refine_envelope(const BoundaryEnvelope& coarse, const BoundaryEnvelope& fine);

/// Fbar: F itself for y-independent F; the homogenized constant matrix for
/// y-dependent linear F (cell problems on the basis matrices). Other
/// y-dependent operators raise DomainError.
struct EffectiveOperator {
  EllipticOperator op = EllipticOperator::laplacian(2);
  std::string source;
};

EffectiveOperator effective_operator(const EllipticOperator& op, int cell_grid = 48, double delta_ergodic = 1e-3);

struct SandwichParams {
  std::vector<double> eps_list;
  double h_factor = 8.0;  // oscillating grid h = eps / h_factor
  double envelope_h = 1.0 / 64.0;
  double tol = 1e-3;      // sandwich slack (grid interpolation)
  double reference = 0.0; // rows report sup_K |u_eps - reference|
  CompactSet K;
  std::vector<Point> probes;
  int threads = 1;
};

struct SandwichRow {
  double epsilon = 0.0;
  double h = 0.0;
  double gap_plus = 0.0;   // sup_K |u_eps - u+|
  double gap_minus = 0.0;  // sup_K |u_eps - u-|
  double above = 0.0;      // max_K (u_eps - u+)
  double below = 0.0;      // max_K (u- - u_eps)
  bool sandwiched = false;
  Point worst;
  double sup_K_u = 0.0;  // sup_K |u_eps - reference|
  std::vector<double> probe_values;
  double sup_u = 0.0;
  double uniform_bound = 0.0;
};

struct SandwichVerdict {
  double delta = 0.0;
  double envelope_gap = 0.0;  // sup_K (u+ - u-)
  double budget = 0.0;        // max (h+ - h-) away from bumps + 2 delta
  std::vector<SandwichRow> rows;
  bool converged = false;
  std::string reason;
  std::string stability;
  std::string fbar_source;
  GridField u_plus, u_minus;
};

/// Solves Fbar(D^2 u) = fbar with boundary data h+ and h-, then checks
/// u- <= u_eps <= u+ on K for each epsilon. A failed check is a verdict,
/// not an exception.
SandwichVerdict effective_sandwich(const OscillatingProblem& p, const BoundaryEnvelope& env,
                                   const SandwichParams& params);

/// sup_K (u+ - u-) without oscillating solves.
double envelope_gap_on_K(const OscillatingProblem& p, const BoundaryEnvelope& env, double h, const CompactSet& K);

struct InverseRateFit {
  double C = 0.0;       // least squares gap ~ C delta through the origin
  double spread = 0.0;  // max / min of gap / delta
  bool stable = false;  // spread <= 2
};

InverseRateFit fit_inverse_rate(std::span<const double> deltas, std::span<const double> gaps);

struct ShrunkenDomainReport {
  double epsilon = 0.0;
  double q = 0.0;
  double offset = 0.0;     // eps^q
  double deviation = 0.0;  // sup over D_eps of |u~ - u_eps|
  int nodes = 0;
  bool bound_available = false;
  double alpha = 0.0;
  double predicted = 0.0;  // r0^-alpha - (r0 + eps^q)^-alpha
  std::string note;
};

/// Re-solves on D with boundary data u_eps(x + eps^q nu(x)) and compares with
/// u_eps on D_eps = {dist > eps^q}.
ShrunkenDomainReport shrunken_domain_compare(const OscillatingProblem& p, const OscillatingSolution& u_eps, double q,
                                             double r0 = 1.0, int order = 2);

}  // namespace bhom
