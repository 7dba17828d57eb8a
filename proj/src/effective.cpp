#include "bhom/effective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bhom/barriers.hpp"
#include "bhom/error.hpp"
#include "bhom/parallel.hpp"

namespace bhom {

namespace {

Point scaled_y(const Point& x, double eps) {
  Point y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / eps;
  return y;
}

Point unit_period(const SourceAndBoundaryData& d, int n) {
  if (static_cast<int>(d.period.size()) >= n) return d.period;
  return Point(n, 1.0);
}

double periodic_distance(double a, double b, double P) {
  const double d = std::abs(a - b);
  return std::min(d, P - d);
}

double distance_to_arc(double at, double s0, double s1, double P) {
  if (at >= s0 && at <= s1) return 0.0;
  return std::min(periodic_distance(at, s0, P), periodic_distance(at, s1, P));
}

double mollifier(double t) { return std::abs(t) < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0; }

double sup_over_K(const Domain& dom, const CompactSet& K, const GridField& u) {
  double m = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (u.mask[i] == NodeType::Interior && K.contains(dom, u.coord(static_cast<std::int64_t>(i))))
      m = std::max(m, std::abs(u.values[i]));
  return m;
}

/// Fbar source term: f itself when it has no fast variable, its cell
/// average when Fbar is constant linear.
PointFunction effective_source(const OscillatingProblem& p, const EllipticOperator& fbar) {
  const Expr f = p.data.f;
  if (!f.depends_on_y()) return [f](const Point& x) { return f(x, {}); };
  if (!fbar.is_constant_linear())
    throw DomainError("effective source: an oscillating f is only averaged for linear operators");
  const int n = p.domain.dim();
  const Point period = unit_period(p.data, n);
  return [f, n, period](const Point& x) { return cell_average(f, x, period, n, 32).value; };
}

GridField solve_with_boundary(const EllipticOperator& op, const Domain& dom, double h,
                              const std::function<double(double)>& data_of_s, const PointFunction& f, double tol) {
  const FastVariable fast = FastVariable::scaled(dom.dim(), 1.0);
  const PointFunction g = [&](const Point& x) { return data_of_s(dom.arclength_of(x)); };
  SolveOptions opt;
  opt.tol = tol;
  return solve_dirichlet(discretize(op, dom, h, 2, fast, g, f), opt).field;
}

}  // namespace

OscillatingSolution solve_oscillating(const OscillatingProblem& p, double h, int order, double tol) {
  const double eps = p.epsilon;
  const int n = p.domain.dim();
  if (!(eps > 0.0)) throw DomainError("solve_oscillating: epsilon must be positive");
  if (p.op.dim() != n) throw DomainError("solve_oscillating: operator and domain dimensions differ");
  if (!(h > 0.0) || h > eps / 8.0 * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "solve_oscillating: h = " << h << " does not resolve the oscillation (need h <= eps/8 = " << eps / 8.0 << ")";
    throw DomainError(os.str());
  }
  OscillatingSolution out;
  out.epsilon = eps;
  out.h = h;
  if (eps > p.domain.diameter() / 10.0) {
    std::ostringstream os;
    os << "epsilon = " << eps << " exceeds diam/10 = " << p.domain.diameter() / 10.0 << ": fewer than 10 cells fit";
    out.warnings.push_back(os.str());
  }
  const Expr g = p.data.g, f = p.data.f;
  const PointFunction gb = [&](const Point& x) { return g(x, scaled_y(x, eps)); };
  const PointFunction fs = [&](const Point& x) { return f(x, scaled_y(x, eps)); };
  const DiscreteProblem dp = discretize(p.op, p.domain, h, order, FastVariable::scaled(n, eps), gb, fs);
  SolveOptions opt;
  opt.tol = tol;
  SolveResult r = solve_dirichlet(dp, opt);
  out.field = std::move(r.field);
  out.record = std::move(r.record);

  double sup_g = 0.0, sup_f = 0.0;
  for (std::size_t i = 0; i < out.field.size(); ++i) {
    if (out.field.mask[i] == NodeType::Boundary) sup_g = std::max(sup_g, std::abs(out.field.values[i]));
    if (out.field.mask[i] == NodeType::Interior) {
      sup_f = std::max(sup_f, std::abs(dp.source[i]));
      out.sup_u = std::max(out.sup_u, std::abs(out.field.values[i]));
    }
  }
  const double diam = p.domain.diameter();
  out.uniform_bound = diam * diam / (8.0 * p.op.lambda()) * sup_f + sup_g;
  out.bound_holds = out.sup_u <= out.uniform_bound + 10.0 * tol;
  return out;
}

bool CompactSet::contains(const Domain& dom, std::span<const double> x) const {
  const Point c = dom.centroid();
  Point z(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) z[i] = c[i] + (x[i] - c[i]) / scale;
  return dom.contains(z);
}

BoundaryLayerReport boundary_layer_compare(const OscillatingProblem& p, const GridField& u_eps,
                                           std::span<const double> x0, const BoundaryLayerParams& params) {
  const double pp = params.p, q = params.q;
  if (!(0.5 < pp && pp < q && q < 1.0) || 2.0 * pp - 1.0 > q - pp + 1e-12)
    throw DomainError("boundary_layer_compare: need 1/2 < p < q < 1 and 2p - 1 <= q - p");
  const int n = p.domain.dim();
  const double eps = p.epsilon;
  const Point xb = p.domain.project(x0);
  const Point out_n = p.domain.outward_normal(xb);
  if (out_n.empty()) throw DomainError("boundary_layer_compare: degenerate normal at x0");
  Point nu(n);
  for (int i = 0; i < n; ++i) nu[i] = -out_n[i];

  HalfspaceCorrectorProblem cp = build_strip(xb, classify_direction(nu), eps, p.data.g, p.op, params.strip);
  const RefinedCorrector rc = solve_corrector_refined(cp);
  const double T = cp.params.T, L = cp.params.width();

  BoundaryLayerReport rep;
  rep.x0 = xb;
  rep.epsilon = eps;
  rep.p = pp;
  rep.q = q;
  rep.alpha = rc.limit.alpha;
  rep.flagged = rc.limit.flagged;
  const double R = std::pow(eps, q);
  for (std::size_t i = 0; i < u_eps.size(); ++i) {
    if (u_eps.mask[i] != NodeType::Interior) continue;
    const Point x = u_eps.coord(static_cast<std::int64_t>(i));
    Point d(n);
    for (int k = 0; k < n; ++k) d[k] = x[k] - xb[k];
    if (norm(d) > R) continue;
    Point xi(n);
    bool inside = true;
    for (int j = 0; j < n; ++j) {
      xi[j] = dot(cp.frame[j], d) / eps;
      if (j + 1 < n && std::abs(xi[j]) > 0.5 * L) inside = false;
    }
    if (!inside || xi[n - 1] < 0.0 || xi[n - 1] > T) continue;
    const double w = rc.solution.field.interpolate(xi);
    if (std::isnan(w)) continue;
    rep.deviation = std::max(rep.deviation, std::abs(u_eps.values[i] - w));
    ++rep.points;
  }
  if (rep.points == 0) throw DomainError("boundary_layer_compare: no grid nodes in the matching ball");
  rep.scale = std::pow(eps, 2.0 * pp - 1.0);
  rep.constant = rep.deviation / rep.scale;
  return rep;
}

double constant_spread(std::span<const BoundaryLayerReport> reports) {
  if (reports.empty()) return 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& r : reports) {
    lo = std::min(lo, r.constant);
    hi = std::max(hi, r.constant);
  }
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

std::vector<double> boundary_arclengths(const Domain& dom, int count, double offset) {
  if (count < 1) throw DomainError("boundary_arclengths: count must be positive");
  const double P = dom.perimeter();
  std::vector<double> s(count);
  for (int k = 0; k < count; ++k) s[k] = P * (k + offset) / count;
  return s;
}

BoundaryEnvelope sample_gbar_on_boundary(const OscillatingProblem& p, std::span<const double> arclengths,
                                         const GbarSamplingParams& params) {
  const Domain& dom = p.domain;
  if (dom.dim() != 2) throw DomainError("sample_gbar_on_boundary: boundary envelopes are 2D");
  if (!(params.delta > 0.0)) throw DomainError("sample_gbar_on_boundary: delta must be positive");
  BoundaryEnvelope env;
  env.delta = params.delta;
  env.perimeter = dom.perimeter();
  const double P = env.perimeter;
  const Point period = unit_period(p.data, 2);

  env.samples.resize(arclengths.size());
  for (std::size_t k = 0; k < arclengths.size(); ++k) {
    GbarSample& smp = env.samples[k];
    smp.s = std::fmod(std::fmod(arclengths[k], P) + P, P);
    smp.x = dom.boundary_point(smp.s);
  }
  std::sort(env.samples.begin(), env.samples.end(), [](const GbarSample& a, const GbarSample& b) { return a.s < b.s; });

  // E_delta: rational normals with max|m| <= 1/delta, located on the boundary.
  const auto bound = static_cast<std::int64_t>(std::floor(1.0 / params.delta + 1e-12));
  for (const IntVec& m : primitive_vectors(2, bound)) {
    const Point dir = normalized(Point{static_cast<double>(m[0]), static_cast<double>(m[1])});
    for (const auto& [s0, s1] : dom.arcs_with_normal(dir)) {
      ExcludedPoint e;
      e.s_begin = s0;
      e.s_end = s1;
      e.z = dom.boundary_point(0.5 * (s0 + s1));
      e.m = m;
      e.max_m = static_cast<int>(std::max(std::abs(m[0]), std::abs(m[1])));
      env.excluded.push_back(std::move(e));
    }
  }
  std::sort(env.excluded.begin(), env.excluded.end(),
            [](const ExcludedPoint& a, const ExcludedPoint& b) { return a.s_begin < b.s_begin; });
  // Several normals at one isolated point: a corner.
  const double same = 2.0 * P / 8192.0;
  for (std::size_t i = 0; i < env.excluded.size(); ++i)
    for (std::size_t j = i + 1; j < env.excluded.size(); ++j) {
      auto& a = env.excluded[i];
      auto& b = env.excluded[j];
      if (a.s_begin == a.s_end && b.s_begin == b.s_end && periodic_distance(a.s_begin, b.s_begin, P) <= same)
        a.corner = b.corner = true;
    }

  StripParams strip = params.strip;
  strip.threads = 1;
  const std::size_t ns = env.samples.size(), ne = env.excluded.size();
  std::vector<double> gsup(ns, 0.0);
  parallel_for(ns + ne, params.strip.threads, [&](std::size_t t) {
    if (t < ns) {
      GbarSample& smp = env.samples[t];
      gsup[t] = estimate_data_norms(p.data.g, smp.x, period, 2, 32).sup_g;
      const Point on = dom.outward_normal(smp.x);
      if (on.empty()) {
        smp.status = "failed: degenerate normal";
        return;
      }
      smp.nu = {-on[0], -on[1]};
      const Direction d = classify_direction(smp.nu, params.direction_tol, params.max_denominator);
      smp.rational = d.rational;
      smp.m = d.m;
      if (d.rational && !in_D_delta(d, params.delta).member) {
        smp.status = "excluded: rational outside D_delta";
        return;
      }
      try {
        const GbarEstimate est = estimate_gbar(smp.x, d, params.eps_list, p.data.g, p.op, strip);
        smp.gbar_star = est.gbar_star;
        smp.gbar_lower = est.gbar_lower;
        smp.err = est.max_err;
        smp.equal = est.equal;
        smp.gbar = est.equal ? est.gbar : 0.5 * (est.gbar_star + est.gbar_lower);
        smp.flagged = !est.flagged_eps.empty();
        smp.usable = true;
        smp.status = d.rational ? "rational in D_delta" : "irrational";
      } catch (const Error& e) {
        smp.status = std::string("failed: ") + e.what();
      }
      return;
    }
    ExcludedPoint& e = env.excluded[t - ns];
    if (e.corner) return;
    try {
      const Direction d = classify_direction(Point{-static_cast<double>(e.m[0]), -static_cast<double>(e.m[1])},
                                             params.direction_tol, params.max_denominator);
      const GbarEstimate est = estimate_gbar(e.z, d, params.eps_list, p.data.g, p.op, strip);
      e.gbar_star = est.gbar_star;
      e.gbar_lower = est.gbar_lower;
      e.err = est.max_err;
      e.estimated = true;
    } catch (const Error&) {
      e.estimated = false;
    }
  });
  env.g_sup = gsup.empty() ? 0.0 : *std::max_element(gsup.begin(), gsup.end());
  for (const auto& e : env.excluded)
    env.g_sup = std::max(env.g_sup, estimate_data_norms(p.data.g, e.z, period, 2, 32).sup_g);
  return env;
}

double EnvelopeLayer::base_plus(double at) const {
  double num = 0.0, den = 0.0, best = std::numeric_limits<double>::infinity(), nearest = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double d = closed ? periodic_distance(at, s[j], perimeter) : std::abs(at - s[j]);
    const double w = mollifier(d / mollifier_radius);
    num += w * plus[j];
    den += w;
    if (d < best) best = d, nearest = plus[j];
  }
  return (den > 0.0 ? num / den : nearest) + delta;
}

double EnvelopeLayer::base_minus(double at) const {
  double num = 0.0, den = 0.0, best = std::numeric_limits<double>::infinity(), nearest = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double d = closed ? periodic_distance(at, s[j], perimeter) : std::abs(at - s[j]);
    const double w = mollifier(d / mollifier_radius);
    num += w * minus[j];
    den += w;
    if (d < best) best = d, nearest = minus[j];
  }
  return (den > 0.0 ? num / den : nearest) - delta;
}

double EnvelopeLayer::bump_profile(const EnvelopeBump& b, double at) const {
  const double d = distance_to_arc(at, b.s_begin, b.s_end, perimeter);
  if (d <= bump_radius) return 1.0;
  if (d < 2.0 * bump_radius) return (2.0 * bump_radius - d) / bump_radius;
  return 0.0;
}

double EnvelopeLayer::h_plus(double at) const {
  double lift = 0.0;
  for (const auto& b : bumps)
    if (b.lift_plus > 0.0) lift = std::max(lift, b.lift_plus * bump_profile(b, at));
  return std::clamp(base_plus(at) + lift, -cap, cap);
}

double EnvelopeLayer::h_minus(double at) const {
  double lift = 0.0;
  for (const auto& b : bumps)
    if (b.lift_minus > 0.0) lift = std::max(lift, b.lift_minus * bump_profile(b, at));
  return std::clamp(base_minus(at) - lift, -cap, cap);
}

double BoundaryEnvelope::h_plus(double s) const {
  if (layers.empty()) throw DomainError("envelope not built");
  double v = std::numeric_limits<double>::infinity();
  for (const auto& l : layers) v = std::min(v, l.h_plus(s));
  return v;
}

double BoundaryEnvelope::h_minus(double s) const {
  if (layers.empty()) throw DomainError("envelope not built");
  double v = -std::numeric_limits<double>::infinity();
  for (const auto& l : layers) v = std::max(v, l.h_minus(s));
  return v;
}

BoundaryEnvelope build_envelopes(const OscillatingProblem& p, BoundaryEnvelope env, const EnvelopeParams& params) {
  const double delta = params.delta;
  if (!(delta > 0.0)) throw DomainError("build_envelopes: delta must be positive");
  if (delta < env.delta * (1.0 - 1e-12))
    throw DomainError("build_envelopes: delta is below the sampling delta; resample the boundary");
  if (!(params.mollifier_radius > 0.0)) throw DomainError("build_envelopes: mollifier radius must be positive");
  const double P = env.perimeter;
  const double rc = params.continuity_radius > 0.0 ? params.continuity_radius : params.mollifier_radius;
  const auto bound = static_cast<int>(std::floor(1.0 / delta + 1e-12));

  EnvelopeLayer layer;
  layer.delta = delta;
  layer.mollifier_radius = params.mollifier_radius;
  layer.perimeter = P;
  layer.cap = 3.0 * env.g_sup;

  // E_delta points at this delta; a point is stable when its observed range
  // fits in delta plus its error bars.
  std::vector<const ExcludedPoint*> points;
  for (const auto& e : env.excluded)
    if (e.max_m <= bound) points.push_back(&e);
  auto stable = [&](const ExcludedPoint& e) {
    return !params.worst_case_bump && e.estimated && e.gbar_star - e.gbar_lower <= delta + 2.0 * e.err;
  };

  struct Entry {
    double s, plus, minus, err;
  };
  // E_delta points never act as samples: a limit may exist there and still
  // jump against its neighbours. A point is lifted when its range leaves the
  // band; samples near lifted points are dropped and the band is rebuilt.
  std::vector<char> lifted(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) lifted[k] = !stable(*points[k]);
  std::vector<Entry> used;
  for (int pass = 0;; ++pass) {
    used.clear();
    for (const auto& smp : env.samples) {
      if (!smp.usable) continue;
      bool near = false;
      for (std::size_t k = 0; k < points.size(); ++k)
        if (lifted[k] && distance_to_arc(smp.s, points[k]->s_begin, points[k]->s_end, P) <= params.exclusion_radius)
          near = true;
      if (!near) used.push_back({smp.s, smp.gbar_star, smp.gbar_lower, smp.err});
    }
    if (used.empty()) throw DomainError("build_envelopes: no usable boundary samples");
    layer.s.clear();
    layer.plus.clear();
    layer.minus.clear();
    layer.bumps.clear();
    layer.slack = 0.0;
    // Each sample enters with its own error bar.
    for (const auto& u : used) {
      layer.s.push_back(u.s);
      layer.plus.push_back(u.plus + u.err);
      layer.minus.push_back(u.minus - u.err);
      layer.slack = std::max(layer.slack, u.err);
    }
    bool changed = false;
    for (std::size_t k = 0; k < points.size(); ++k) {
      const ExcludedPoint* e = points[k];
      EnvelopeBump b;
      b.s_begin = e->s_begin;
      b.s_end = e->s_end;
      if (params.worst_case_bump || e->corner || !e->estimated) {
        b.lift_plus = b.lift_minus = 2.0 * env.g_sup;
      } else {
        double bp = std::numeric_limits<double>::infinity(), bm = -bp;
        // Facets: the band must cover the range along the whole facet.
        const int steps = e->s_end > e->s_begin ? 16 : 0;
        for (int j = 0; j <= steps; ++j) {
          const double at = steps ? e->s_begin + (e->s_end - e->s_begin) * j / steps : e->s_begin;
          bp = std::min(bp, layer.base_plus(at));
          bm = std::max(bm, layer.base_minus(at));
        }
        b.lift_plus = std::max(0.0, e->gbar_star + e->err - bp);
        b.lift_minus = std::max(0.0, bm - (e->gbar_lower - e->err));
      }
      if (b.lift_plus > 0.0 || b.lift_minus > 0.0) {
        layer.bumps.push_back(b);
        if (!lifted[k]) lifted[k] = 1, changed = true;
      }
    }
    if (!changed || pass >= 8) break;
  }
  auto is_lifted = [&](const ExcludedPoint* e) {
    for (std::size_t k = 0; k < points.size(); ++k)
      if (points[k] == e) return lifted[k] != 0;
    return false;
  };

  // Delta-continuity on the declared radius.
  for (std::size_t i = 0; i < used.size(); ++i)
    for (std::size_t j = i + 1; j < used.size(); ++j) {
      const Entry &a = used[i], &b = used[j];
      if (periodic_distance(a.s, b.s, P) > rc) continue;
      const double jump = std::max(a.plus - b.minus, b.plus - a.minus);
      if (jump > delta + a.err + b.err) {
        std::ostringstream os;
        os << "gbar is not " << delta << "-continuous: samples at s = " << a.s << " and s = " << b.s
           << " differ by " << jump << " (error bars " << a.err << ", " << b.err << ")";
        throw DeltaContinuityError(os.str(), a.s, b.s);
      }
    }
  // Consecutive samples must fall within the mollifier radius unless a
  // lifted point's exclusion zone sits between them.
  for (std::size_t i = 0; i < used.size(); ++i) {
    const double a = used[i].s;
    const double b = i + 1 < used.size() ? used[i + 1].s : used[0].s + P;
    if (b - a <= params.mollifier_radius) continue;
    bool excused = false;
    for (const auto* e : points) {
      if (!is_lifted(e)) continue;
      for (double shift : {0.0, P})
        if (e->s_end + shift >= a && e->s_begin + shift <= b) excused = true;
    }
    if (!excused) {
      std::ostringstream os;
      os << "build_envelopes: samples at s = " << a << " and " << std::fmod(b, P) << " are farther apart than the "
         << "mollifier radius " << params.mollifier_radius;
      throw DomainError(os.str());
    }
  }

  // Shrink r until the lifted bumps stay below delta on K.
  layer.bump_radius = params.bump_radius;
  env.sup_K_bump = 0.0;
  if (!layer.bumps.empty()) {
    const EllipticOperator mplus = EllipticOperator::pucci(+1, 2, p.op.lambda(), p.op.Lambda());
    const PointFunction zero = [](const Point&) { return 0.0; };
    for (;;) {
      double sup = 0.0;
      for (int side : {+1, -1}) {
        const auto data = [&](double at) {
          double lift = 0.0;
          for (const auto& b : layer.bumps)
            lift = std::max(lift, (side > 0 ? b.lift_plus : b.lift_minus) * layer.bump_profile(b, at));
          return lift;
        };
        sup = std::max(sup, sup_over_K(p.domain, params.K, solve_with_boundary(mplus, p.domain, params.bump_h, data, zero, 1e-10)));
      }
      env.sup_K_bump = sup;
      if (sup <= delta || layer.bump_radius < params.bump_h) break;
      layer.bump_radius *= 0.5;
    }
  }
  env.bump_within_delta = env.sup_K_bump <= delta;
  env.layers = {layer};

  // Diagnostics.
  env.ordering_violation = 0.0;
  for (const auto& u : used)
    env.ordering_violation = std::max(
        {env.ordering_violation, u.plus - u.err - env.h_plus(u.s), env.h_minus(u.s) - u.minus - u.err});
  env.max_gap_outside = 0.0;
  const int grid = 4096;
  for (int k = 0; k < grid; ++k) {
    const double at = P * k / grid;
    bool near_bump = false;
    for (const auto& b : layer.bumps)
      if (distance_to_arc(at, b.s_begin, b.s_end, P) < 2.0 * layer.bump_radius) near_bump = true;
    if (!near_bump) env.max_gap_outside = std::max(env.max_gap_outside, env.h_plus(at) - env.h_minus(at));
  }
  return env;
}

BoundaryEnvelope refine_envelope(const BoundaryEnvelope& coarse, const BoundaryEnvelope& fine) {
  if (!coarse.completed() || !fine.completed()) throw DomainError("refine_envelope: both envelopes must be built");
  BoundaryEnvelope out = fine;
  out.layers.insert(out.layers.end(), coarse.layers.begin(), coarse.layers.end());
  return out;
}

EffectiveOperator effective_operator(const EllipticOperator& op, int cell_grid, double delta_ergodic) {
  if (!op.y_dependent()) return {op, "identity (F has no fast variable)"};
  if (op.kind() != OperatorKind::Linear)
    throw DomainError("effective_operator: y-dependent nonlinear operators are not supported");
  const int n = op.dim();
  SymMatrix a(n);
  auto fbar = [&](const SymMatrix& M) {
    return effective_operator_estimate(op, M, delta_ergodic, cell_grid).value;
  };
  for (int i = 0; i < n; ++i) {
    SymMatrix E(n);
    E(i, i) = 1.0;
    a(i, i) = fbar(E);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      SymMatrix E(n);
      E(i, i) = E(j, j) = E(i, j) = E(j, i) = 1.0;
      a(i, j) = a(j, i) = 0.5 * (fbar(E) - a(i, i) - a(j, j));
    }
  const auto ev = symmetric_eigenvalues(a);
  const double lo = std::min(op.lambda(), ev.back()), hi = std::max(op.Lambda(), ev.front());
  if (!(lo > 0.0)) throw DomainError("effective_operator: homogenized matrix is not positive definite");
  return {EllipticOperator::constant_linear(a, lo, hi), "homogenized linear (cell problems)"};
}

double envelope_gap_on_K(const OscillatingProblem& p, const BoundaryEnvelope& env, double h, const CompactSet& K) {
  const EffectiveOperator fb = effective_operator(p.op);
  const PointFunction f = effective_source(p, fb.op);
  const GridField up = solve_with_boundary(fb.op, p.domain, h, [&](double s) { return env.h_plus(s); }, f, 1e-10);
  const GridField um = solve_with_boundary(fb.op, p.domain, h, [&](double s) { return env.h_minus(s); }, f, 1e-10);
  double gap = 0.0;
  for (std::size_t i = 0; i < up.size(); ++i)
    if (up.mask[i] == NodeType::Interior && K.contains(p.domain, up.coord(static_cast<std::int64_t>(i))))
      gap = std::max(gap, up.values[i] - um.values[i]);
  return gap;
}

SandwichVerdict effective_sandwich(const OscillatingProblem& p, const BoundaryEnvelope& env,
                                   const SandwichParams& params) {
  if (!env.completed()) throw DomainError("effective_sandwich: envelope not built");
  SandwichVerdict v;
  v.delta = env.layers.front().delta;
  const EffectiveOperator fb = effective_operator(p.op);
  v.fbar_source = fb.source;
  const int n = p.domain.dim();
  v.stability = (n - 1) * fb.op.lambda() > fb.op.Lambda()
                    ? "stable class: (n-1) lambda > Lambda holds"
                    : "unverified stability hypothesis: (n-1) lambda <= Lambda";
  const PointFunction f = effective_source(p, fb.op);
  v.u_plus = solve_with_boundary(fb.op, p.domain, params.envelope_h, [&](double s) { return env.h_plus(s); }, f, 1e-10);
  v.u_minus = solve_with_boundary(fb.op, p.domain, params.envelope_h, [&](double s) { return env.h_minus(s); }, f, 1e-10);
  for (std::size_t i = 0; i < v.u_plus.size(); ++i)
    if (v.u_plus.mask[i] == NodeType::Interior && params.K.contains(p.domain, v.u_plus.coord(static_cast<std::int64_t>(i))))
      v.envelope_gap = std::max(v.envelope_gap, v.u_plus.values[i] - v.u_minus.values[i]);
  // Band width away from the bumps plus 2 delta for the bump on K.
  v.budget = env.max_gap_outside + 2.0 * v.delta;

  v.rows.resize(params.eps_list.size());
  parallel_for(params.eps_list.size(), params.threads, [&](std::size_t k) {
    OscillatingProblem q = p;
    q.epsilon = params.eps_list[k];
    const OscillatingSolution sol = solve_oscillating(q, q.epsilon / params.h_factor);
    SandwichRow& row = v.rows[k];
    row.epsilon = q.epsilon;
    row.h = sol.h;
    row.sup_u = sol.sup_u;
    row.uniform_bound = sol.uniform_bound;
    row.above = row.below = -std::numeric_limits<double>::infinity();
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sol.field.size(); ++i) {
      if (sol.field.mask[i] != NodeType::Interior) continue;
      const Point x = sol.field.coord(static_cast<std::int64_t>(i));
      if (!params.K.contains(p.domain, x)) continue;
      const double up = v.u_plus.interpolate(x), um = v.u_minus.interpolate(x);
      if (std::isnan(up) || std::isnan(um)) continue;
      const double u = sol.field.values[i];
      row.gap_plus = std::max(row.gap_plus, std::abs(u - up));
      row.gap_minus = std::max(row.gap_minus, std::abs(u - um));
      row.above = std::max(row.above, u - up);
      row.below = std::max(row.below, um - u);
      row.sup_K_u = std::max(row.sup_K_u, std::abs(u - params.reference));
      const double viol = std::max(u - up, um - u);
      if (viol > worst) worst = viol, row.worst = x;
    }
    row.sandwiched = row.above <= params.tol && row.below <= params.tol;
    for (const auto& pr : params.probes) row.probe_values.push_back(sol.field.interpolate(pr));
  });

  const bool all = std::all_of(v.rows.begin(), v.rows.end(), [](const SandwichRow& r) { return r.sandwiched; });
  std::ostringstream why;
  if (!all) {
    for (const auto& r : v.rows)
      if (!r.sandwiched)
        why << "u_eps leaves [u-, u+] on K at eps = " << r.epsilon << " by " << std::max(r.above, r.below) << "; ";
  }
  if (v.envelope_gap > v.budget) why << "envelope gap " << v.envelope_gap << " exceeds the budget " << v.budget << "; ";
  if (!env.bump_within_delta) why << "bump correction " << env.sup_K_bump << " exceeds delta on K; ";
  v.converged = all && v.envelope_gap <= v.budget && env.bump_within_delta;
  v.reason = v.converged ? "sandwiched within the delta budget" : why.str();
  return v;
}

InverseRateFit fit_inverse_rate(std::span<const double> deltas, std::span<const double> gaps) {
  if (deltas.size() != gaps.size() || deltas.empty()) throw DomainError("fit_inverse_rate: mismatched inputs");
  InverseRateFit fit;
  double num = 0.0, den = 0.0, lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    num += gaps[i] * deltas[i];
    den += deltas[i] * deltas[i];
    const double r = gaps[i] / deltas[i];
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  fit.C = num / den;
  fit.spread = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  fit.stable = fit.spread <= 2.0;
  return fit;
}

ShrunkenDomainReport shrunken_domain_compare(const OscillatingProblem& p, const OscillatingSolution& u_eps, double q,
                                             double r0, int order) {
  if (!(q > 0.5 && q < 1.0)) throw DomainError("shrunken_domain_compare: q must lie in (1/2, 1)");
  const int n = p.domain.dim();
  const double eps = u_eps.epsilon;
  ShrunkenDomainReport rep;
  rep.epsilon = eps;
  rep.q = q;
  rep.offset = std::pow(eps, q);
  try {
    rep.alpha = exponent_exterior(n, p.op.lambda(), p.op.Lambda());
    rep.bound_available = true;
    rep.predicted = std::pow(r0, -rep.alpha) - std::pow(r0 + rep.offset, -rep.alpha);
  } catch (const DegenerateBarrier& e) {
    rep.note = std::string("bound unavailable: ") + e.what();
  }
  const Domain& dom = p.domain;
  const GridField& u = u_eps.field;
  const PointFunction g = [&](const Point& x) {
    const Point on = dom.outward_normal(x);
    Point z = x;
    if (!on.empty())
      for (int i = 0; i < n; ++i) z[i] -= rep.offset * on[i];
    const double v = u.interpolate(z);
    return std::isnan(v) ? u.interpolate(dom.project(z)) : v;
  };
  const PointFunction f = [&](const Point& x) { return p.data.f(x, scaled_y(x, eps)); };
  SolveOptions opt;
  opt.tol = 1e-10;
  const GridField ut = solve_dirichlet(discretize(p.op, dom, u_eps.h, order, FastVariable::scaled(n, eps), g, f), opt).field;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u.mask[i] != NodeType::Interior || ut.mask[i] != NodeType::Interior) continue;
    const Point x = u.coord(static_cast<std::int64_t>(i));
    if (dom.distance_to_boundary(x) <= rep.offset) continue;
    rep.deviation = std::max(rep.deviation, std::abs(ut.values[i] - u.values[i]));
    ++rep.nodes;
  }
  if (rep.nodes == 0) throw DomainError("shrunken_domain_compare: D_eps contains no grid nodes");
  return rep;
}

}  // namespace bhom
