#include "bhom/barriers.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "bhom/error.hpp"

namespace bhom {

namespace {

void check_constants(int n, double lambda, double Lambda) {
  if (n < 2 || n > 3) throw DomainError("barriers are defined for n = 2 or 3");
  if (!(lambda > 0.0) || !(Lambda >= lambda)) throw DomainError("barriers need 0 < lambda <= Lambda");
}

double radius_from(const BarrierSpec& b, std::span<const double> x, Point& d) {
  d.assign(b.n, 0.0);
  for (int i = 0; i < b.n; ++i) d[i] = x[i] - b.center[i];
  const double r = norm(d);
  if (!(r > 0.0)) throw DomainError("radial barrier evaluated at its center");
  return r;
}

}  // namespace

double exponent_interior(int n, double lambda, double Lambda) {
  check_constants(n, lambda, Lambda);
  const double alpha = (n - 1) * lambda / Lambda - 1.0;
  if (!(alpha > 0.0)) {
    std::ostringstream os;
    os << "stability condition fails: (n-1) lambda = " << (n - 1) * lambda << " <= Lambda = " << Lambda;
    throw StabilityError(os.str());
  }
  return alpha;
}

double exponent_exterior(int n, double lambda, double Lambda) {
  check_constants(n, lambda, Lambda);
  const double alpha = Lambda / lambda * (n - 1) - 1.0;
  if (!(alpha > 0.0)) {
    std::ostringstream os;
    os << "exterior exponent (Lambda/lambda)(n-1) - 1 = " << alpha << " is not positive (logarithmic case)";
    throw DegenerateBarrier(os.str());
  }
  return alpha;
}

std::string to_string(BarrierKind k) {
  switch (k) {
    case BarrierKind::QuadStrip: return "quad_strip";
    case BarrierKind::RadialInterior: return "radial_interior";
    case BarrierKind::RadialExterior: return "radial_exterior";
  }
  return "unknown";
}

BarrierSpec BarrierSpec::quad_strip(int n, double lambda, double Lambda, double scale, double amplitude) {
  check_constants(n, lambda, Lambda);
  if (!(scale > 0.0) || !(amplitude > 0.0)) throw DomainError("quad_strip needs positive scale and amplitude");
  BarrierSpec b;
  b.kind = BarrierKind::QuadStrip;
  b.n = n;
  b.lambda = lambda;
  b.Lambda = Lambda;
  b.scale = scale;
  b.amplitude = amplitude;
  b.coefficient = (n - 1) * Lambda / lambda;
  b.center.assign(n, 0.0);
  return b;
}

BarrierSpec BarrierSpec::radial_interior(int n, double lambda, double Lambda, Point center) {
  BarrierSpec b;
  b.kind = BarrierKind::RadialInterior;
  b.n = n;
  b.lambda = lambda;
  b.Lambda = Lambda;
  b.alpha = exponent_interior(n, lambda, Lambda);
  if (static_cast<int>(center.size()) != n) throw DomainError("barrier center has wrong dimension");
  b.center = std::move(center);
  return b;
}

BarrierSpec BarrierSpec::radial_exterior(int n, double lambda, double Lambda, Point center, double r0) {
  BarrierSpec b;
  b.kind = BarrierKind::RadialExterior;
  b.n = n;
  b.lambda = lambda;
  b.Lambda = Lambda;
  b.alpha = exponent_exterior(n, lambda, Lambda);
  if (!(r0 > 0.0)) throw DomainError("exterior barrier radius must be positive");
  if (static_cast<int>(center.size()) != n) throw DomainError("barrier center has wrong dimension");
  b.center = std::move(center);
  b.r0 = r0;
  return b;
}

std::string BarrierSpec::describe() const {
  std::ostringstream os;
  os << to_string(kind) << "(n=" << n << ", lambda=" << lambda << ", Lambda=" << Lambda;
  if (kind == BarrierKind::QuadStrip)
    os << ", s=" << scale << ", c=" << coefficient << ", amplitude=" << amplitude;
  else
    os << ", alpha=" << alpha;
  if (kind == BarrierKind::RadialExterior) os << ", r0=" << r0;
  os << ")";
  return os.str();
}

double barrier_value(const BarrierSpec& b, std::span<const double> x) {
  if (static_cast<int>(x.size()) < b.n) throw DomainError("barrier point has wrong dimension");
  if (b.kind == BarrierKind::QuadStrip) {
    double tang = 0.0;
    for (int i = 0; i + 1 < b.n; ++i) tang += x[i] * x[i];
    const double t = x[b.n - 1] / b.scale - 1.0;
    return b.amplitude * (tang / (b.scale * b.scale) + b.coefficient * (1.0 - t * t));
  }
  Point d;
  const double r = radius_from(b, x, d);
  const double p = std::pow(r, -b.alpha);
  return b.kind == BarrierKind::RadialInterior ? p : std::pow(b.r0, -b.alpha) - p;
}

SymMatrix barrier_hessian(const BarrierSpec& b, std::span<const double> x) {
  if (static_cast<int>(x.size()) < b.n) throw DomainError("barrier point has wrong dimension");
  SymMatrix H(b.n);
  if (b.kind == BarrierKind::QuadStrip) {
    const double s2 = b.scale * b.scale;
    for (int i = 0; i + 1 < b.n; ++i) H(i, i) = 2.0 * b.amplitude / s2;
    H(b.n - 1, b.n - 1) = -2.0 * b.amplitude * b.coefficient / s2;
    return H;
  }
  // D^2 r^-a = -a r^(-a-2) (I - (a+2) x x^T / r^2).
  Point d;
  const double r = radius_from(b, x, d);
  const double a = b.alpha;
  const double sgn = b.kind == BarrierKind::RadialInterior ? 1.0 : -1.0;
  const double pre = -a * std::pow(r, -a - 2.0);
  for (int i = 0; i < b.n; ++i)
    for (int j = 0; j < b.n; ++j) H(i, j) = sgn * pre * ((i == j ? 1.0 : 0.0) - (a + 2.0) * d[i] * d[j] / (r * r));
  return H;
}

SupersolutionReport verify_supersolution(const BarrierSpec& b, const EllipticOperator& op,
                                         std::span<const Point> samples, double tol) {
  if (op.dim() != b.n) throw DomainError("verify_supersolution: operator and barrier dimensions differ");
  SupersolutionReport rep;
  rep.samples = static_cast<int>(samples.size());
  rep.max_operator_value = -std::numeric_limits<double>::infinity();
  const Point y(b.n, 0.0);
  for (const Point& x : samples) {
    const SymMatrix H = barrier_hessian(b, x);
    double worst = -std::numeric_limits<double>::infinity();
    if (op.y_dependent()) {
      // Periodic in y: probe a few cell positions.
      for (int k = 0; k < 8; ++k) {
        Point yk(b.n);
        for (int i = 0; i < b.n; ++i) yk[i] = op.period()[i] * std::fmod(0.37 * (k + 1) * (i + 1), 1.0);
        worst = std::max(worst, op(H, yk));
      }
    } else {
      worst = op(H, y);
    }
    if (worst > rep.max_operator_value) {
      rep.max_operator_value = worst;
      rep.worst_point = x;
    }
  }
  rep.holds = rep.max_operator_value <= tol * std::max(1.0, b.amplitude);
  if (b.kind == BarrierKind::QuadStrip) {
    rep.checks_boundary = true;
    rep.min_boundary_value = std::numeric_limits<double>::infinity();
    const int m = 33;
    const double s = b.scale;
    // Faces of |x'_i| <= s/2, 0 <= x_n <= s other than the bottom.
    auto visit = [&](const Point& x) { rep.min_boundary_value = std::min(rep.min_boundary_value, barrier_value(b, x)); };
    if (b.n == 2) {
      for (int k = 0; k < m; ++k) {
        const double t = static_cast<double>(k) / (m - 1);
        visit({-0.5 * s + s * t, s});
        visit({-0.5 * s, s * t});
        visit({0.5 * s, s * t});
      }
    } else {
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l) {
          const double t = static_cast<double>(k) / (m - 1), u = static_cast<double>(l) / (m - 1);
          visit({-0.5 * s + s * t, -0.5 * s + s * u, s});
          for (double side : {-0.5 * s, 0.5 * s}) {
            visit({side, -0.5 * s + s * t, s * u});
            visit({-0.5 * s + s * t, side, s * u});
          }
        }
    }
    rep.boundary_dominates = rep.min_boundary_value >= 1.0 - 1e-12;
  }
  return rep;
}

std::vector<Point> barrier_region_samples(const BarrierSpec& b, int count, double inner, double outer,
                                          unsigned seed) {
  if (count < 1) throw DomainError("barrier_region_samples: count must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    Point x(b.n);
    if (b.kind == BarrierKind::QuadStrip) {
      for (int i = 0; i + 1 < b.n; ++i) x[i] = b.scale * (u(rng) - 0.5);
      x[b.n - 1] = b.scale * u(rng);
    } else {
      if (!(inner > 0.0) || !(outer > inner)) throw DomainError("radial samples need 0 < inner < outer");
      Point dir(b.n);
      double len = 0.0;
      do {
        for (auto& c : dir) c = 2.0 * u(rng) - 1.0;
        len = norm(dir);
      } while (len < 1e-3 || len > 1.0);
      const double r = inner + (outer - inner) * u(rng);
      for (int i = 0; i < b.n; ++i) x[i] = b.center[i] + r * dir[i] / len;
    }
    out.push_back(std::move(x));
  }
  return out;
}

double finite_boundary_stability_bound(std::span<const Point> points, double r_m, std::span<const Point> K, int n,
                                       double lambda, double Lambda) {
  const double alpha = exponent_interior(n, lambda, Lambda);
  if (!(r_m > 0.0)) throw DomainError("stability bound needs r_m > 0");
  if (K.empty()) throw DomainError("stability bound needs a nonempty compact set");
  double total = 0.0;
  for (const Point& z : points) {
    double dist = std::numeric_limits<double>::infinity();
    for (const Point& k : K) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) d2 += (z[i] - k[i]) * (z[i] - k[i]);
      dist = std::min(dist, std::sqrt(d2));
    }
    if (!(dist > 0.0)) throw DomainError("stability bound: point lies in the compact set");
    total += std::pow(r_m / dist, alpha);
  }
  return total;
}

}  // namespace bhom
