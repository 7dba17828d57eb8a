#include "bhom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "bhom/error.hpp"

namespace bhom {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

double wrap_unit(double t) {
  t -= std::floor(t);
  return t >= 1.0 ? 0.0 : t;
}

// First continued-fraction convergent p/q of x (|x| <= 1) with
// |x - p/q| <= tol and q <= max_q. Returns false if none exists.
bool small_convergent(double x, double tol, std::int64_t max_q, std::int64_t& p_out, std::int64_t& q_out) {
  const double sign = x < 0 ? -1.0 : 1.0;
  const double ax = std::abs(x);
  std::int64_t h2 = 0, h1 = 1, k2 = 1, k1 = 0;
  double rem = ax;
  for (int iter = 0; iter < 64; ++iter) {
    const double a_d = std::floor(rem);
    if (a_d > 9.0e15) return false;
    const auto a = static_cast<std::int64_t>(a_d);
    const std::int64_t h = a * h1 + h2;
    const std::int64_t k = a * k1 + k2;
    if (k > max_q) return false;
    if (std::abs(ax - static_cast<double>(h) / static_cast<double>(k)) <= tol) {
      p_out = static_cast<std::int64_t>(sign) * h;
      q_out = k;
      return true;
    }
    const double frac = rem - a_d;
    if (frac < 1e-300) return false;
    rem = 1.0 / frac;
    h2 = h1;
    h1 = h;
    k2 = k1;
    k1 = k;
  }
  return false;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

int Direction::pivot() const {
  int k = 0;
  for (int i = 1; i < dim(); ++i)
    if (std::abs(nu[i]) > std::abs(nu[k])) k = i;
  return k;
}

Direction classify_direction(std::span<const double> v, double tol, std::int64_t max_denominator) {
  if (max_denominator < 1) throw DomainError("classify_direction: max_denominator must be >= 1");
  if (v.empty() || !(norm(v) > 0.0)) throw DomainError("classify_direction: zero vector");
  Direction d;
  d.nu = normalized(v);
  d.tol = tol;
  d.max_denominator = max_denominator;
  const int n = d.dim();
  const int k = d.pivot();

  std::vector<std::int64_t> p(n, 0), q(n, 1);
  std::int64_t common = 1;
  for (int i = 0; i < n; ++i) {
    if (i == k) continue;
    const double r = d.nu[i] / d.nu[k];
    if (!small_convergent(r, tol, max_denominator, p[i], q[i])) return d;
    common = std::lcm(common, q[i]);
    if (common > max_denominator) return d;
  }
  const std::int64_t sk = d.nu[k] < 0 ? -1 : 1;
  IntVec m(n);
  for (int i = 0; i < n; ++i) m[i] = (i == k) ? sk * common : sk * p[i] * (common / q[i]);
  std::int64_t g = 0;
  for (auto mi : m) g = std::gcd(g, std::abs(mi));
  for (auto& mi : m) mi /= g;

  Point mv(m.begin(), m.end());
  const Point mhat = normalized(mv);
  double err = 0.0;
  for (int i = 0; i < n; ++i) err = std::max(err, std::abs(mhat[i] - d.nu[i]));
  std::int64_t mmax = 0;
  for (auto mi : m) mmax = std::max(mmax, std::abs(mi));
  if (err <= tol && mmax <= max_denominator) {
    d.rational = true;
    d.m = std::move(m);
  }
  return d;
}

DeltaMembership in_D_delta(const Direction& d, double delta) {
  if (!(delta > 0.0)) throw DomainError("in_D_delta: delta must be positive");
  if (!d.rational) return {true, true};
  std::int64_t mmax = 0;
  for (auto mi : d.m) mmax = std::max(mmax, std::abs(mi));
  return {static_cast<double>(mmax) > 1.0 / delta, false};
}

double hyperplane_height(const Direction& d, std::span<const std::int64_t> m_prime) {
  const int k = d.pivot();
  double s = 0.0;
  int j = 0;
  for (int i = 0; i < d.dim(); ++i) {
    if (i == k) continue;
    s += d.nu[i] * static_cast<double>(m_prime[j++]);
  }
  return -s / d.nu[k];
}

double hyperplane_frac(const Direction& d, std::span<const std::int64_t> m_prime) {
  if (!d.rational) return wrap_unit(hyperplane_height(d, m_prime));
  const int k = d.pivot();
  std::int64_t num = 0;
  int j = 0;
  for (int i = 0; i < d.dim(); ++i) {
    if (i == k) continue;
    num -= d.m[i] * m_prime[j++];
  }
  std::int64_t den = d.m[k];
  if (den < 0) {
    den = -den;
    num = -num;
  }
  const std::int64_t r = num - floor_div(num, den) * den;
  return static_cast<double>(r) / static_cast<double>(den);
}

namespace {

// Calls fn(m') for every m' in base + [0,R)^(dim) in lexicographic order;
// stops early when fn returns true.
template <class Fn>
bool for_each_cube_point(int dim, std::span<const std::int64_t> base, std::int64_t R, Fn&& fn) {
  IntVec m(base.begin(), base.end());
  if (dim == 0) return fn(std::span<const std::int64_t>(m));
  std::vector<std::int64_t> off(dim, 0);
  for (;;) {
    for (int i = 0; i < dim; ++i) m[i] = base[i] + off[i];
    if (fn(std::span<const std::int64_t>(m))) return true;
    int i = dim - 1;
    while (i >= 0 && ++off[i] == R) off[i--] = 0;
    if (i < 0) return false;
  }
}

}  // namespace

EquidistRecord equidist_ratio(const Direction& d, double delta, double t0, std::int64_t R) {
  if (R < 1) throw DomainError("equidist_ratio: R must be >= 1");
  if (!(delta > 0.0)) throw DomainError("equidist_ratio: delta must be positive");
  const int dim = d.dim() - 1;
  const IntVec base(dim, 0);
  const double start = wrap_unit(t0);
  EquidistRecord rec;
  for_each_cube_point(dim, base, R, [&](std::span<const std::int64_t> m) {
    ++rec.N;
    if (delta >= 1.0) {
      ++rec.A;
    } else {
      double off = hyperplane_frac(d, m) - start;
      if (off < 0.0) off += 1.0;
      if (off < delta) ++rec.A;
    }
    return false;
  });
  rec.ratio = static_cast<double>(rec.A) / static_cast<double>(rec.N);
  return rec;
}

NearIntegerResult near_integer_point(const Direction& d, std::span<const std::int64_t> cube_index,
                                     double delta) {
  if (!(delta > 0.0)) throw DomainError("near_integer_point: delta must be positive");
  const int dim = d.dim() - 1;
  if (static_cast<int>(cube_index.size()) != dim)
    throw DomainError("near_integer_point: cube index must have n-1 components");
  // Coordinate hyperplanes pass through the lattice, so t = 0 trivially.
  const bool coordinate = d.rational && std::count(d.m.begin(), d.m.end(), std::int64_t{0}) == dim;
  if (d.rational && !coordinate && !in_D_delta(d, delta).member) {
    std::ostringstream os;
    os << "direction with max|m_i| <= 1/delta = " << 1.0 / delta << " has no near-integer point construction";
    throw NoNearIntegerPoint(os.str());
  }
  const std::int64_t cap = dim <= 1 ? (std::int64_t{1} << 24) : (std::int64_t{1} << 11);
  const int k = d.pivot();
  for (std::int64_t R = 1; R <= cap; R *= 2) {
    IntVec base(dim);
    for (int i = 0; i < dim; ++i) base[i] = cube_index[i] * R;
    NearIntegerResult out;
    const bool found = for_each_cube_point(dim, base, R, [&](std::span<const std::int64_t> m) {
      const double t = hyperplane_frac(d, m);
      if (t > delta) return false;
      const double h = hyperplane_height(d, m);
      HyperplaneLattice& lat = out.lattice;
      lat.direction = d;
      lat.cube_side = R;
      lat.cube_index.assign(cube_index.begin(), cube_index.end());
      lat.hat_point.assign(d.dim(), 0.0);
      lat.integer_anchor.assign(d.dim(), 0);
      int j = 0;
      for (int i = 0; i < d.dim(); ++i) {
        if (i == k) continue;
        lat.hat_point[i] = static_cast<double>(m[j]);
        lat.integer_anchor[i] = m[j];
        ++j;
      }
      lat.hat_point[k] = h;
      lat.integer_anchor[k] = static_cast<std::int64_t>(std::llround(h - t));
      lat.frac_part = t;
      out.R_used = R;
      return true;
    });
    if (found) return out;
  }
  throw NoNearIntegerPoint("near_integer_point: cube growth cap reached");
}

std::vector<IntVec> primitive_vectors(int n, std::int64_t bound) {
  std::vector<IntVec> out;
  if (bound < 1) return out;
  IntVec m(n, -bound);
  for (;;) {
    std::int64_t g = 0;
    for (auto v : m) g = std::gcd(g, std::abs(v));
    if (g == 1) out.push_back(m);
    int i = n - 1;
    while (i >= 0 && ++m[i] > bound) m[i--] = -bound;
    if (i < 0) break;
  }
  return out;
}

std::string to_string(DomainKind k) {
  switch (k) {
    case DomainKind::Disk: return "disk";
    case DomainKind::HalfDiskFlatBottom: return "half_disk_flat_bottom";
    case DomainKind::Rectangle: return "rectangle";
    case DomainKind::Implicit: return "implicit";
  }
  return "unknown";
}

Domain Domain::disk(Point center, double radius) {
  if (!(radius > 0.0)) throw DomainError("disk: radius must be positive");
  if (center.size() < 2 || center.size() > 3) throw DomainError("disk: dimension must be 2 or 3");
  Domain d;
  d.kind_ = DomainKind::Disk;
  d.center_ = center;
  d.radius_ = radius;
  d.lo_ = d.hi_ = center;
  for (std::size_t i = 0; i < center.size(); ++i) {
    d.lo_[i] -= radius;
    d.hi_[i] += radius;
  }
  return d;
}

Domain Domain::half_disk_flat_bottom(Point center, double radius) {
  if (!(radius > 0.0) || center.size() != 2) throw DomainError("half_disk_flat_bottom: 2D center and positive radius");
  Domain d;
  d.kind_ = DomainKind::HalfDiskFlatBottom;
  d.center_ = center;
  d.radius_ = radius;
  d.lo_ = {center[0] - radius, center[1]};
  d.hi_ = {center[0] + radius, center[1] + radius};
  return d;
}

Domain Domain::rectangle(Point lo, Point hi) {
  if (lo.size() != hi.size() || lo.size() < 2 || lo.size() > 3) throw DomainError("rectangle: bad corners");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(hi[i] > lo[i])) throw DomainError("rectangle: hi must exceed lo");
  Domain d;
  d.kind_ = DomainKind::Rectangle;
  d.lo_ = lo;
  d.hi_ = hi;
  d.center_ = lo;
  for (std::size_t i = 0; i < lo.size(); ++i) d.center_[i] = 0.5 * (lo[i] + hi[i]);
  return d;
}

Domain Domain::implicit(Expr phi, Point lo, Point hi, int resolution) {
  if (lo.size() != 2 || hi.size() != 2) throw DomainError("implicit: only 2D level sets are supported");
  if (resolution < 16) throw DomainError("implicit: resolution must be >= 16");
  Domain d;
  d.kind_ = DomainKind::Implicit;
  d.phi_expr_ = std::move(phi);
  d.lo_ = lo;
  d.hi_ = hi;
  d.center_ = {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])};
  if (!(d.phi(d.center_) < 0.0)) throw DomainError("implicit: box center must lie inside the level set");
  const double reach = std::hypot(hi[0] - lo[0], hi[1] - lo[1]);
  d.poly_.reserve(resolution);
  for (int j = 0; j < resolution; ++j) {
    const double th = kTwoPi * j / resolution;
    const double dx = std::cos(th), dy = std::sin(th);
    double a = 0.0, b = reach;
    if (d.phi(Point{d.center_[0] + b * dx, d.center_[1] + b * dy}) < 0.0)
      throw DomainError("implicit: level set not closed inside its bounding box");
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (a + b);
      if (d.phi(Point{d.center_[0] + mid * dx, d.center_[1] + mid * dy}) < 0.0) a = mid;
      else b = mid;
    }
    const double t = 0.5 * (a + b);
    d.poly_.push_back({d.center_[0] + t * dx, d.center_[1] + t * dy});
  }
  d.cum_.assign(resolution + 1, 0.0);
  for (int j = 0; j < resolution; ++j) {
    const Point& p = d.poly_[j];
    const Point& q = d.poly_[(j + 1) % resolution];
    d.cum_[j + 1] = d.cum_[j] + std::hypot(q[0] - p[0], q[1] - p[1]);
  }
  return d;
}

double Domain::phi(std::span<const double> x) const {
  switch (kind_) {
    case DomainKind::Disk: {
      double r2 = 0.0;
      for (int i = 0; i < dim(); ++i) r2 += (x[i] - center_[i]) * (x[i] - center_[i]);
      return std::sqrt(r2) - radius_;
    }
    case DomainKind::HalfDiskFlatBottom: {
      const double r = std::hypot(x[0] - center_[0], x[1] - center_[1]);
      return std::max(r - radius_, center_[1] - x[1]);
    }
    case DomainKind::Rectangle: {
      double v = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < dim(); ++i) v = std::max({v, lo_[i] - x[i], x[i] - hi_[i]});
      return v;
    }
    case DomainKind::Implicit:
      return phi_expr_(x, {});
  }
  return 0.0;
}

Point Domain::project(std::span<const double> x) const {
  const int n = dim();
  switch (kind_) {
    case DomainKind::Disk: {
      Point v(n);
      for (int i = 0; i < n; ++i) v[i] = x[i] - center_[i];
      double r = norm(v);
      if (r < 1e-300) {
        v.assign(n, 0.0);
        v[0] = 1.0;
        r = 1.0;
      }
      Point p(n);
      for (int i = 0; i < n; ++i) p[i] = center_[i] + radius_ * v[i] / r;
      return p;
    }
    case DomainKind::HalfDiskFlatBottom: {
      const double cx = center_[0], cy = center_[1];
      Point seg{std::clamp(x[0], cx - radius_, cx + radius_), cy};
      Point arc;
      const double dx = x[0] - cx, dy = x[1] - cy;
      const double r = std::hypot(dx, dy);
      if (dy >= 0.0 && r > 1e-300) {
        arc = {cx + radius_ * dx / r, cy + radius_ * dy / r};
      } else {
        arc = {dx >= 0 ? cx + radius_ : cx - radius_, cy};
      }
      const double ds = std::hypot(x[0] - seg[0], x[1] - seg[1]);
      const double da = std::hypot(x[0] - arc[0], x[1] - arc[1]);
      return da < ds ? arc : seg;
    }
    case DomainKind::Rectangle: {
      Point p(x.begin(), x.end());
      if (phi(x) > 0.0) {
        for (int i = 0; i < n; ++i) p[i] = std::clamp(p[i], lo_[i], hi_[i]);
        return p;
      }
      int best = 0;
      bool upper = false;
      double bd = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        if (x[i] - lo_[i] < bd) {
          bd = x[i] - lo_[i];
          best = i;
          upper = false;
        }
        if (hi_[i] - x[i] < bd) {
          bd = hi_[i] - x[i];
          best = i;
          upper = true;
        }
      }
      p[best] = upper ? hi_[best] : lo_[best];
      return p;
    }
    case DomainKind::Implicit: {
      const int m = static_cast<int>(poly_.size());
      double best = std::numeric_limits<double>::infinity();
      Point bp;
      for (int j = 0; j < m; ++j) {
        const Point& a = poly_[j];
        const Point& b = poly_[(j + 1) % m];
        const double ex = b[0] - a[0], ey = b[1] - a[1];
        const double len2 = ex * ex + ey * ey;
        double t = len2 > 0 ? ((x[0] - a[0]) * ex + (x[1] - a[1]) * ey) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double px = a[0] + t * ex, py = a[1] + t * ey;
        const double dd = std::hypot(x[0] - px, x[1] - py);
        if (dd < best) {
          best = dd;
          bp = {px, py};
        }
      }
      for (int it = 0; it < 3; ++it) {
        const Point g = outward_normal(bp);
        if (g.empty()) break;
        const double step = 1e-6 * diameter();
        Point a{bp[0] + step * g[0], bp[1] + step * g[1]};
        Point b{bp[0] - step * g[0], bp[1] - step * g[1]};
        const double dphi = (phi(a) - phi(b)) / (2.0 * step);
        if (std::abs(dphi) < 1e-300) break;
        const double f = phi(bp);
        bp[0] -= f / dphi * g[0];
        bp[1] -= f / dphi * g[1];
      }
      return bp;
    }
  }
  return Point(x.begin(), x.end());
}

Point Domain::outward_normal(std::span<const double> xb) const {
  const int n = dim();
  switch (kind_) {
    case DomainKind::Disk: {
      Point v(n);
      for (int i = 0; i < n; ++i) v[i] = xb[i] - center_[i];
      if (norm(v) < 1e-300) return {};
      return normalized(v);
    }
    case DomainKind::HalfDiskFlatBottom: {
      const double dx = xb[0] - center_[0], dy = xb[1] - center_[1];
      const double r = std::hypot(dx, dy);
      const double tol = 1e-12 * radius_;
      const bool on_flat = std::abs(dy) <= tol && std::abs(dx) < radius_ - tol;
      if (on_flat || dy < 0.0) return {0.0, -1.0};
      if (r < 1e-300) return {};
      return {dx / r, dy / r};
    }
    case DomainKind::Rectangle: {
      int best = 0;
      bool upper = false;
      double bd = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        const double dl = std::abs(xb[i] - lo_[i]), dh = std::abs(xb[i] - hi_[i]);
        if (dl < bd - 1e-14) {
          bd = dl;
          best = i;
          upper = false;
        }
        if (dh < bd - 1e-14) {
          bd = dh;
          best = i;
          upper = true;
        }
      }
      Point v(n, 0.0);
      v[best] = upper ? 1.0 : -1.0;
      return v;
    }
    case DomainKind::Implicit: {
      const double step = 1e-6 * diameter();
      Point g(2);
      for (int i = 0; i < 2; ++i) {
        Point a(xb.begin(), xb.end()), b(xb.begin(), xb.end());
        a[i] += step;
        b[i] -= step;
        g[i] = (phi(a) - phi(b)) / (2.0 * step);
      }
      if (norm(g) < 1e-10) return {};
      return normalized(g);
    }
  }
  return {};
}

double Domain::distance_to_boundary(std::span<const double> x) const {
  const Point p = project(x);
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) s += (x[i] - p[i]) * (x[i] - p[i]);
  return std::sqrt(s);
}

double Domain::perimeter() const {
  if (dim() != 2) throw DomainError("perimeter: only defined in 2D");
  switch (kind_) {
    case DomainKind::Disk: return kTwoPi * radius_;
    case DomainKind::HalfDiskFlatBottom: return std::numbers::pi * radius_ + 2.0 * radius_;
    case DomainKind::Rectangle: return 2.0 * ((hi_[0] - lo_[0]) + (hi_[1] - lo_[1]));
    case DomainKind::Implicit: return cum_.back();
  }
  return 0.0;
}

Point Domain::boundary_point(double s) const {
  const double P = perimeter();
  s = std::fmod(s, P);
  if (s < 0.0) s += P;
  switch (kind_) {
    case DomainKind::Disk: {
      const double th = s / radius_;
      return {center_[0] + radius_ * std::cos(th), center_[1] + radius_ * std::sin(th)};
    }
    case DomainKind::HalfDiskFlatBottom: {
      const double arc = std::numbers::pi * radius_;
      if (s < arc) {
        const double th = s / radius_;
        return {center_[0] + radius_ * std::cos(th), center_[1] + radius_ * std::sin(th)};
      }
      return {center_[0] - radius_ + (s - arc), center_[1]};
    }
    case DomainKind::Rectangle: {
      const double w = hi_[0] - lo_[0], h = hi_[1] - lo_[1];
      if (s < w) return {lo_[0] + s, lo_[1]};
      if (s < w + h) return {hi_[0], lo_[1] + (s - w)};
      if (s < 2 * w + h) return {hi_[0] - (s - w - h), hi_[1]};
      return {lo_[0], hi_[1] - (s - 2 * w - h)};
    }
    case DomainKind::Implicit: {
      const auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
      const int j = std::clamp(static_cast<int>(it - cum_.begin()) - 1, 0, static_cast<int>(poly_.size()) - 1);
      const double seg = cum_[j + 1] - cum_[j];
      const double t = seg > 0 ? (s - cum_[j]) / seg : 0.0;
      const Point& a = poly_[j];
      const Point& b = poly_[(j + 1) % poly_.size()];
      return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
    }
  }
  return {};
}

double Domain::arclength_of(std::span<const double> xb) const {
  switch (kind_) {
    case DomainKind::Disk: {
      double th = std::atan2(xb[1] - center_[1], xb[0] - center_[0]);
      if (th < 0) th += kTwoPi;
      return radius_ * th;
    }
    case DomainKind::HalfDiskFlatBottom: {
      const double dy = xb[1] - center_[1];
      if (std::abs(dy) <= 1e-12 * radius_) {
        const double dx = xb[0] - center_[0];
        if (dx >= radius_ * (1.0 - 1e-12)) return 0.0;
        return std::numbers::pi * radius_ + std::clamp(dx + radius_, 0.0, 2.0 * radius_);
      }
      return radius_ * std::clamp(std::atan2(dy, xb[0] - center_[0]), 0.0, std::numbers::pi);
    }
    case DomainKind::Rectangle: {
      const double w = hi_[0] - lo_[0], h = hi_[1] - lo_[1];
      const double tol = 1e-12 * (w + h);
      if (std::abs(xb[1] - lo_[1]) <= tol && xb[0] < hi_[0] - tol) return xb[0] - lo_[0];
      if (std::abs(xb[0] - hi_[0]) <= tol && xb[1] < hi_[1] - tol) return w + (xb[1] - lo_[1]);
      if (std::abs(xb[1] - hi_[1]) <= tol && xb[0] > lo_[0] + tol) return w + h + (hi_[0] - xb[0]);
      return 2 * w + h + (hi_[1] - xb[1]);
    }
    case DomainKind::Implicit: {
      const int m = static_cast<int>(poly_.size());
      double best = std::numeric_limits<double>::infinity(), s_best = 0.0;
      for (int j = 0; j < m; ++j) {
        const Point& a = poly_[j];
        const Point& b = poly_[(j + 1) % m];
        const double ex = b[0] - a[0], ey = b[1] - a[1];
        const double len2 = ex * ex + ey * ey;
        double t = len2 > 0 ? ((xb[0] - a[0]) * ex + (xb[1] - a[1]) * ey) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double dd = std::hypot(xb[0] - a[0] - t * ex, xb[1] - a[1] - t * ey);
        if (dd < best) {
          best = dd;
          s_best = cum_[j] + t * std::sqrt(len2);
        }
      }
      return s_best;
    }
  }
  return 0.0;
}

double Domain::diameter() const {
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) s += (hi_[i] - lo_[i]) * (hi_[i] - lo_[i]);
  return std::sqrt(s);
}

Point Domain::centroid() const {
  if (kind_ == DomainKind::HalfDiskFlatBottom)
    return {center_[0], center_[1] + 4.0 * radius_ / (3.0 * std::numbers::pi)};
  return center_;
}

std::vector<std::pair<double, double>> Domain::arcs_with_normal(std::span<const double> normal,
                                                                int resolution) const {
  std::vector<std::pair<double, double>> out;
  const double target = std::atan2(normal[1], normal[0]);
  if (kind_ == DomainKind::Disk) {
    double th = target < 0 ? target + kTwoPi : target;
    out.emplace_back(radius_ * th, radius_ * th);
    return out;
  }
  const double P = perimeter();
  std::vector<double> ang(resolution);
  std::vector<char> exact(resolution, 0);
  for (int j = 0; j < resolution; ++j) {
    const Point nb = outward_normal(boundary_point(P * j / resolution));
    ang[j] = nb.empty() ? std::numeric_limits<double>::quiet_NaN() : std::atan2(nb[1], nb[0]);
    exact[j] = !nb.empty() && std::abs(wrap_angle(ang[j] - target)) <= 1e-9;
  }
  // Flat facets: maximal cyclic runs of exact matches.
  int start = 0;
  while (start < resolution && exact[start]) ++start;
  if (start == resolution) {
    out.emplace_back(0.0, P);
    return out;
  }
  for (int c = 0; c < resolution; ++c) {
    const int j = (start + c) % resolution;
    if (!exact[j]) continue;
    if (exact[(j + resolution - 1) % resolution]) continue;
    int len = 0;
    while (exact[(j + len) % resolution]) ++len;
    const double s0 = P * j / resolution;
    double s1 = P * (j + len - 1) / resolution;
    out.emplace_back(s0, s1);
  }
  // Isolated crossings between consecutive non-matching samples.
  for (int j = 0; j < resolution; ++j) {
    const int k = (j + 1) % resolution;
    if (exact[j] || exact[k] || std::isnan(ang[j]) || std::isnan(ang[k])) continue;
    const double step = wrap_angle(ang[k] - ang[j]);
    const double need = wrap_angle(target - ang[j]);
    const bool crosses = step > 0 ? (need > 0 && need <= step) : (need < 0 && need >= step);
    if (!crosses || step == 0.0) continue;
    const double s = P * (j + need / step) / resolution;
    out.emplace_back(s, s);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string Domain::describe() const {
  std::ostringstream os;
  os << to_string(kind_);
  if (kind_ == DomainKind::Disk || kind_ == DomainKind::HalfDiskFlatBottom) {
    os << "(center=(";
    for (int i = 0; i < dim(); ++i) os << (i ? "," : "") << center_[i];
    os << "), r=" << radius_ << ")";
  } else if (kind_ == DomainKind::Implicit) {
    os << "(" << phi_expr_.source() << ")";
  }
  return os.str();
}

IddcAudit iddc_audit(const Domain& dom, int samples, std::int64_t max_denominator, double tol) {
  if (samples < 1) throw DomainError("iddc_audit: samples must be >= 1");
  IddcAudit audit;
  audit.samples = samples;
  const double P = dom.perimeter();
  std::vector<IntVec> cls(samples);
  std::vector<char> rat(samples, 0);
  int nrat = 0;
  for (int j = 0; j < samples; ++j) {
    const double s = P * j / samples;
    const Point nb = dom.outward_normal(dom.boundary_point(s));
    if (nb.empty()) {
      audit.degenerate_points.push_back(s);
      continue;
    }
    const Direction d = classify_direction(nb, tol, max_denominator);
    if (d.rational) {
      rat[j] = 1;
      cls[j] = d.m;
      ++nrat;
      audit.rational_points.emplace_back(s, d.m);
    }
  }
  audit.rational_fraction = static_cast<double>(nrat) / samples;
  if (nrat == samples && std::all_of(cls.begin(), cls.end(), [&](const IntVec& m) { return m == cls[0]; })) {
    audit.rational_intervals.push_back({0.0, P, samples, cls[0]});
  } else {
    auto same = [&](int a, int b) { return rat[a] && rat[b] && cls[a] == cls[b]; };
    for (int j = 0; j < samples; ++j) {
      if (!rat[j]) continue;
      if (same((j + samples - 1) % samples, j)) continue;
      int len = 1;
      while (len < samples && same((j + len - 1) % samples, (j + len) % samples)) ++len;
      if (len > 2)
        audit.rational_intervals.push_back({P * j / samples, P * (j + len - 1) / samples, len, cls[j]});
    }
  }
  audit.plausible = audit.rational_intervals.empty();
  std::ostringstream os;
  if (audit.plausible) {
    os << "IDDC-plausible: " << nrat << " isolated rational normals in " << samples << " samples";
  } else {
    os << "not IDDC: " << audit.rational_intervals.size() << " flat rational facet(s)";
  }
  audit.verdict = os.str();
  return audit;
}

}  // namespace bhom
