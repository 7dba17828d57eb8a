// Half-space corrector problems on truncated strips.

#include "bhom/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <tuple>

#include "bhom/barriers.hpp"
#include "bhom/error.hpp"
#include "bhom/parallel.hpp"

namespace bhom {

namespace {

constexpr int kReadouts = 8;

double wrap_eval(const Expr& g, std::span<const double> x0, std::span<const double> y) { return g(x0, y); }

HalfspaceCorrectorProblem build_at(std::span<const double> x0, const Direction& nu, double epsilon, Point y0,
                                   const Expr& g, const EllipticOperator& op, const StripParams& params) {
  const int n = nu.dim();
  if (n < 2 || n > 3) throw DomainError("corrector strips are 2D or 3D");
  if (op.dim() != n) throw DomainError("corrector: operator and direction dimensions differ");
  const double T = params.T, L = params.width(), h = params.h;
  if (!(T > 0.0) || !(h > 0.0)) throw DomainError("corrector: T and h must be positive");
  if (L < 2.0 * T) {
    std::ostringstream os;
    os << "corrector: strip width L = " << L << " < 2T = " << 2 * T << " makes the truncation bound meaningless";
    throw DomainError(os.str());
  }

  HalfspaceCorrectorProblem p;
  p.x0.assign(x0.begin(), x0.end());
  p.nu = nu;
  p.epsilon = epsilon;
  p.y0 = std::move(y0);
  p.params = params;
  p.g = g;
  p.op = op;
  const Frame Q(nu.nu);
  for (int j = 0; j < n; ++j) p.frame.push_back(Q.column(j));

  // Bottom face must lie in the boundary plane of H(nu, y0).
  {
    Point xi(n, 0.0);
    for (int i = 0; i + 1 < n; ++i) xi[i] = 0.5 * L;
    Point y = p.y_of(xi);
    double off = 0.0;
    for (int i = 0; i < n; ++i) off += (y[i] - p.y0[i]) * nu.nu[i];
    if (std::abs(off) > 1e-10 * std::max(1.0, L)) throw DomainError("corrector: frame does not map the bottom face into the boundary plane");
  }

  FastVariable fast;
  fast.dim = n;
  fast.shift = p.y0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) fast.matrix[3 * i + j] = fast.rotation[3 * i + j] = Q(i, j);

  Point lo(n), hi(n);
  for (int i = 0; i + 1 < n; ++i) {
    lo[i] = -0.5 * L;
    hi[i] = 0.5 * L;
  }
  lo[n - 1] = 0.0;
  hi[n - 1] = T;
  const PointFunction bc = [&](const Point& xi) {
    return p.bottom_value(std::span<const double>(xi.data(), n - 1));
  };
  const PointFunction f = [](const Point&) { return 0.0; };
  p.discrete = discretize_box(op, lo, hi, h, params.order, fast, bc, f);

  // Top face starts at the trapezoid mean of the bottom trace.
  double sum = 0.0, weight = 0.0;
  const GridField& G = p.discrete.grid;
  for (std::size_t idx = 0; idx < G.size(); ++idx) {
    if (G.mask[idx] != NodeType::Boundary) continue;
    const auto ijk = G.multi_index(static_cast<std::int64_t>(idx));
    if (ijk[n - 1] != 0) continue;
    double w = 1.0;
    for (int i = 0; i + 1 < n; ++i)
      if (ijk[i] == 0 || ijk[i] == G.extents[i] - 1) w *= 0.5;
    sum += w * G.values[idx];
    weight += w;
  }
  set_top_value(p, weight > 0.0 ? sum / weight : 0.0);
  return p;
}

// Max of the solved M+ barrier over the central window at the readout row.
struct BarrierHeights {
  double lateral = 0.0;
  double top = 0.0;
};

using BarrierKey = std::tuple<int, double, double, double, double, double, int>;

BarrierHeights strip_barriers(int n, double lambda, double Lambda, const StripParams& params) {
  static std::mutex mu;
  static std::map<BarrierKey, BarrierHeights> memo;
  const BarrierKey key{n, lambda, Lambda, params.T, params.width(), params.h, params.order};
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
  }
  const double T = params.T, L = params.width(), h = params.h;
  Point lo(n), hi(n);
  for (int i = 0; i + 1 < n; ++i) {
    lo[i] = -0.5 * L;
    hi[i] = 0.5 * L;
  }
  lo[n - 1] = 0.0;
  hi[n - 1] = T;
  const EllipticOperator pucci = EllipticOperator::pucci(+1, n, lambda, Lambda);
  const FastVariable fast = FastVariable::scaled(n, 1.0);
  const PointFunction zero = [](const Point&) { return 0.0; };
  auto lateral_face = [&](const Point& xi) {
    for (int i = 0; i + 1 < n; ++i)
      if (std::abs(std::abs(xi[i]) - 0.5 * L) < 1e-9 * L) return true;
    return false;
  };
  const PointFunction lat = [&](const Point& xi) { return lateral_face(xi) ? 1.0 : 0.0; };
  const PointFunction top = [&](const Point& xi) { return xi[n - 1] > T - 1e-9 * T && !lateral_face(xi) ? 1.0 : 0.0; };
  SolveOptions opt;
  opt.tol = params.tol;
  const GridField bl = solve_dirichlet(discretize_box(pucci, lo, hi, h, params.order, fast, lat, zero), opt).field;
  const GridField bt = solve_dirichlet(discretize_box(pucci, lo, hi, h, params.order, fast, top, zero), opt).field;
  const int row = static_cast<int>(std::lround(0.75 * T / h));
  BarrierHeights out;
  for (std::size_t idx = 0; idx < bl.size(); ++idx) {
    const auto ijk = bl.multi_index(static_cast<std::int64_t>(idx));
    if (ijk[n - 1] != row) continue;
    const Point xi = bl.coord(static_cast<std::int64_t>(idx));
    bool in = true;
    for (int i = 0; i + 1 < n; ++i) in = in && std::abs(xi[i]) <= 0.25 * L + 1e-12;
    if (!in) continue;
    out.lateral = std::max(out.lateral, bl.values[idx]);
    out.top = std::max(out.top, bt.values[idx]);
  }
  std::lock_guard<std::mutex> lock(mu);
  memo.emplace(key, out);
  return out;
}

// Values of the field on the central window at the row nearest height t.
std::vector<double> window_row(const GridField& F, int n, double L, double t) {
  const int row = static_cast<int>(std::lround(t / F.h));
  std::vector<double> out;
  for (std::size_t idx = 0; idx < F.size(); ++idx) {
    if (F.mask[idx] == NodeType::Exterior) continue;
    const auto ijk = F.multi_index(static_cast<std::int64_t>(idx));
    if (ijk[n - 1] != row) continue;
    const Point xi = F.coord(static_cast<std::int64_t>(idx));
    bool in = true;
    for (int i = 0; i + 1 < n; ++i) in = in && std::abs(xi[i]) <= 0.25 * L + 1e-12;
    if (in) out.push_back(F.values[idx]);
  }
  return out;
}

double osc(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  return *mx - *mn;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

Point HalfspaceCorrectorProblem::y_of(std::span<const double> xi) const {
  Point y = y0;
  for (int j = 0; j < dim(); ++j)
    for (int i = 0; i < dim(); ++i) y[i] += frame[j][i] * xi[j];
  return y;
}

double HalfspaceCorrectorProblem::bottom_value(std::span<const double> xi_prime) const {
  Point xi(dim(), 0.0);
  for (int i = 0; i + 1 < dim(); ++i) xi[i] = xi_prime[i];
  const Point y = y_of(xi);
  return wrap_eval(g, x0, y);
}

HalfspaceCorrectorProblem build_strip(std::span<const double> x0, const Direction& nu, double epsilon, const Expr& g,
                                      const EllipticOperator& op, const StripParams& params) {
  if (!(epsilon > 0.0)) throw DomainError("corrector: epsilon must be positive");
  if (static_cast<int>(x0.size()) != nu.dim()) throw DomainError("corrector: x0 and direction dimensions differ");
  Point y0(x0.begin(), x0.end());
  for (auto& c : y0) c /= epsilon;
  return build_at(x0, nu, epsilon, std::move(y0), g, op, params);
}

void set_top_value(HalfspaceCorrectorProblem& p, double value) {
  GridField& G = p.discrete.grid;
  const int n = p.dim();
  const int top = G.extents[n - 1] - 1;
  for (std::size_t idx = 0; idx < G.size(); ++idx) {
    if (G.mask[idx] != NodeType::Boundary) continue;
    const auto ijk = G.multi_index(static_cast<std::int64_t>(idx));
    if (ijk[n - 1] != top) continue;
    bool lateral = false;
    for (int i = 0; i + 1 < n; ++i) lateral = lateral || ijk[i] == 0 || ijk[i] == G.extents[i] - 1;
    if (!lateral) G.values[idx] = value;
  }
  p.top_value = value;
}

CorrectorSolution solve_corrector(const HalfspaceCorrectorProblem& p, std::span<const double> warm) {
  const int n = p.dim();
  const double T = p.params.T, L = p.params.width();
  SolveOptions opt;
  opt.tol = p.params.tol;
  opt.initial = warm;
  CorrectorSolution s;
  SolveResult r = solve_dirichlet(p.discrete, opt);
  s.field = std::move(r.field);
  s.record = std::move(r.record);

  OscillationProfile& prof = s.profile;
  for (int k = 1; k <= kReadouts; ++k) {
    const double t = T * k / kReadouts;
    prof.heights.push_back(t);
    prof.W.push_back(osc(window_row(s.field, n, L, t)));
  }
  for (std::size_t k = 1; k < prof.W.size(); ++k)
    if (prof.W[k] > prof.W[k - 1] + 10 * p.params.tol) prof.non_increasing = false;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t k = 0; k < prof.W.size(); ++k) {
    if (prof.W[k] <= 1e-14) continue;
    const double lx = std::log(prof.heights[k]), ly = std::log(prof.W[k]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    ++m;
  }
  if (m >= 2 && std::abs(m * sxx - sx * sx) > 1e-300) {
    prof.fitted_exponent = -(m * sxy - sx * sy) / (m * sxx - sx * sx);
    prof.gamma_est = std::pow(2.0, -prof.fitted_exponent);
  }

  // Truncation error bars from solved M+ barriers.
  std::vector<double> bottom;
  const GridField& G = p.discrete.grid;
  for (std::size_t idx = 0; idx < G.size(); ++idx)
    if (G.mask[idx] == NodeType::Boundary && G.multi_index(static_cast<std::int64_t>(idx))[n - 1] == 0)
      bottom.push_back(G.values[idx]);
  const BarrierHeights b = strip_barriers(n, p.op.lambda(), p.op.Lambda(), p.params);
  s.lateral_bound = osc(bottom) * b.lateral;
  const double near_top = osc(window_row(s.field, n, L, 7.0 * T / 8.0));
  const double readout_mean = mean(window_row(s.field, n, L, 0.75 * T));
  // The readout mean is itself pulled toward the top by b.top, so the
  // distance from the top to the true limit is inflated by 1 / (1 - b.top).
  const double pull = std::min(b.top, 0.999);
  s.top_bound = (std::abs(p.top_value - readout_mean) / (1.0 - pull) + near_top) * b.top;

  // Quadratic barrier of the box |xi'_i| <= L/2, 0 <= xi_n <= L, amplitude 4.
  const BarrierSpec q = BarrierSpec::quad_strip(n, p.op.lambda(), p.op.Lambda(), L, 4.0);
  Point corner(n, 0.25 * L);
  corner[n - 1] = 0.75 * T;
  s.quadratic_lateral_bound = osc(bottom) * barrier_value(q, corner);
  return s;
}

RayLimit ray_limit(const HalfspaceCorrectorProblem& p, const CorrectorSolution& s) {
  const int n = p.dim();
  const double T = p.params.T, L = p.params.width();
  const double tstar = 0.75 * T;
  RayLimit out;
  out.alpha = mean(window_row(s.field, n, L, tstar));
  out.W_readout = osc(window_row(s.field, n, L, tstar));
  out.lateral = s.lateral_bound;
  out.top = s.top_bound;
  out.err = out.W_readout + out.lateral + out.top + p.params.tol;

  // Rays y' + t p with p . nu > 0 starting in the inner half of the window.
  std::mt19937_64 rng(p.params.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double reach = std::min(1.0, L / (8.0 * tstar));
  for (int r = 0; r < p.params.rays; ++r) {
    Point xi(n);
    for (int i = 0; i + 1 < n; ++i) xi[i] = 0.125 * L * u(rng) + reach * tstar * u(rng);
    xi[n - 1] = tstar;
    const double v = s.field.interpolate(xi);
    out.ray_values.push_back(v);
    out.spread = std::max(out.spread, std::abs(v - out.alpha));
  }
  out.flagged = out.spread > out.err;
  return out;
}

RefinedCorrector solve_corrector_refined(HalfspaceCorrectorProblem& p) {
  RefinedCorrector out;
  out.solution = solve_corrector(p);
  out.limit = ray_limit(p, out.solution);
  out.solves = 1;
  if (!p.params.refine_top) return out;
  // The readout mean is monotone in the top value; a secant step finds the
  // top that reproduces itself.
  const double c0 = p.top_value, a0 = out.limit.alpha;
  set_top_value(p, a0);
  out.solution = solve_corrector(p, out.solution.field.values);
  out.limit = ray_limit(p, out.solution);
  out.solves = 2;
  if (std::abs(a0 - c0) > 1e-12) {
    const double slope = std::clamp((out.limit.alpha - a0) / (a0 - c0), 0.0, 0.999);
    set_top_value(p, a0 + (out.limit.alpha - a0) / (1.0 - slope));
    out.solution = solve_corrector(p, out.solution.field.values);
    out.limit = ray_limit(p, out.solution);
    out.solves = 3;
  }
  return out;
}

GbarRecord corrector_ray_limit(std::span<const double> x0, const Direction& nu, double epsilon, const Expr& g,
                               const EllipticOperator& op, const StripParams& params) {
  HalfspaceCorrectorProblem p = build_strip(x0, nu, epsilon, g, op, params);
  const RefinedCorrector r = solve_corrector_refined(p);
  GbarRecord rec;
  rec.solves = r.solves;
  rec.epsilon = epsilon;
  rec.alpha = r.limit.alpha;
  rec.err = r.limit.err;
  rec.spread = r.limit.spread;
  rec.flagged = r.limit.flagged;
  return rec;
}

GbarEstimate estimate_gbar(std::span<const double> x0, const Direction& nu, std::span<const double> eps_list,
                           const Expr& g, const EllipticOperator& op, const StripParams& params) {
  if (eps_list.size() < 2) throw DomainError("estimate_gbar: needs at least two epsilon values");
  GbarEstimate est;
  est.x0.assign(x0.begin(), x0.end());
  est.nu = nu;
  std::vector<double> eps(eps_list.begin(), eps_list.end());
  std::sort(eps.begin(), eps.end());
  est.records.resize(eps.size());
  parallel_for(eps.size(), params.threads, [&](std::size_t i) {
    est.records[i] = corrector_ray_limit(x0, nu, eps[i], g, op, params);
  });
  est.gbar_star = -std::numeric_limits<double>::infinity();
  est.gbar_lower = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& r : est.records) {
    est.gbar_star = std::max(est.gbar_star, r.alpha);
    est.gbar_lower = std::min(est.gbar_lower, r.alpha);
    est.max_err = std::max(est.max_err, r.err);
    sum += r.alpha;
    if (r.flagged) est.flagged_eps.push_back(r.epsilon);
  }
  est.equal = est.gbar_star - est.gbar_lower <= params.equality_factor * est.max_err + 1e-6;
  if (est.equal) est.gbar = sum / static_cast<double>(est.records.size());
  return est;
}

ContinuityTable gbar_continuity_probe(std::span<const double> x0, const std::vector<Point>& directions,
                                      std::span<const double> eps_list, const Expr& g, const EllipticOperator& op,
                                      const StripParams& params) {
  ContinuityTable table;
  table.rows.resize(directions.size());
  std::vector<Direction> dirs(directions.size());
  for (std::size_t i = 0; i < directions.size(); ++i) {
    dirs[i] = classify_direction(directions[i]);
    table.rows[i].nu = dirs[i].nu;
    if (dirs[i].rational) {
      table.rows[i].skipped = true;
      std::ostringstream os;
      os << "rational direction m = (";
      for (std::size_t k = 0; k < dirs[i].m.size(); ++k) os << (k ? ", " : "") << dirs[i].m[k];
      os << ") skipped";
      table.rows[i].note = os.str();
    }
  }
  StripParams inner = params;
  inner.threads = 1;
  parallel_for(directions.size(), params.threads, [&](std::size_t i) {
    if (table.rows[i].skipped) return;
    double sum = 0.0, err = 0.0;
    for (double e : eps_list) {
      const GbarRecord r = corrector_ray_limit(x0, dirs[i], e, g, op, inner);
      sum += r.alpha;
      err = std::max(err, r.err);
    }
    table.rows[i].gbar = eps_list.empty() ? 0.0 : sum / static_cast<double>(eps_list.size());
    table.rows[i].err = err;
  });
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    for (std::size_t j = i + 1; j < table.rows.size(); ++j) {
      if (table.rows[i].skipped || table.rows[j].skipped) continue;
      table.max_deviation = std::max(table.max_deviation, std::abs(table.rows[i].gbar - table.rows[j].gbar));
      const double c = std::clamp(dot(table.rows[i].nu, table.rows[j].nu), -1.0, 1.0);
      table.max_angle = std::max(table.max_angle, std::acos(c));
    }
  return table;
}

CellAverage cell_average(const Expr& g, std::span<const double> x0, std::span<const double> period, int dim,
                         int quadrature_n) {
  if (quadrature_n < 2) throw DomainError("cell_average: quadrature_n must be >= 2");
  if (dim < 1 || dim > 3) throw DomainError("cell_average: dimension must be 1, 2 or 3");
  auto rule = [&](int m) {
    Point per(dim, 1.0);
    for (int i = 0; i < dim && i < static_cast<int>(period.size()); ++i) per[i] = period[i];
    std::array<int, 3> idx{0, 0, 0};
    std::size_t total = 1;
    for (int i = 0; i < dim; ++i) total *= static_cast<std::size_t>(m);
    double sum = 0.0;
    Point y(dim);
    for (std::size_t c = 0; c < total; ++c) {
      std::size_t rem = c;
      for (int i = 0; i < dim; ++i) {
        idx[i] = static_cast<int>(rem % m);
        rem /= m;
        y[i] = per[i] * (idx[i] + 0.5) / m;
      }
      sum += g(x0, y);
    }
    return sum / static_cast<double>(total);
  };
  CellAverage out;
  out.value = rule(quadrature_n);
  out.coarse = rule(std::max(1, quadrature_n / 2));
  out.error_estimate = std::abs(out.value - out.coarse) / 3.0;
  return out;
}

std::vector<TranslationRow> translation_stability(std::span<const double> x0, const Direction& nu,
                                                  std::span<const double> eps_list, std::span<const double> shifts,
                                                  const Expr& g, const EllipticOperator& op,
                                                  const StripParams& params) {
  const int n = nu.dim();
  Point per = params.g_period.empty() ? Point(n, 1.0) : params.g_period;
  const DataNorms norms = estimate_data_norms(g, x0, per, n);
  const double c2 = std::max(norms.c2(), 1e-300);
  std::vector<TranslationRow> rows;
  for (double e : eps_list) {
    Point y0(x0.begin(), x0.end());
    for (auto& c : y0) c /= e;
    const HalfspaceCorrectorProblem p1 = build_at(x0, nu, e, y0, g, op, params);
    const CorrectorSolution s1 = solve_corrector(p1);
    for (double d : shifts) {
      Point y1 = y0;
      for (int i = 0; i < n; ++i) y1[i] += d * nu.nu[i];
      const HalfspaceCorrectorProblem p2 = build_at(x0, nu, e, y1, g, op, params);
      const CorrectorSolution s2 = solve_corrector(p2);
      // Node xi of strip 2 sits at xi + d e_n in strip 1.
      double dev = 0.0;
      const double L = params.width(), T = params.T;
      for (std::size_t idx = 0; idx < s2.field.size(); ++idx) {
        if (s2.field.mask[idx] != NodeType::Interior) continue;
        Point xi = s2.field.coord(static_cast<std::int64_t>(idx));
        bool in = xi[n - 1] + d <= 0.75 * T;
        for (int i = 0; i + 1 < n; ++i) in = in && std::abs(xi[i]) <= 0.25 * L;
        if (!in) continue;
        xi[n - 1] += d;
        const double v1 = s1.field.interpolate(xi);
        if (!std::isnan(v1)) dev = std::max(dev, std::abs(s2.field.values[idx] - v1));
      }
      rows.push_back({e, d, dev, dev / (c2 * d)});
    }
  }
  return rows;
}

}  // namespace bhom
