#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "bhom/error.hpp"
#include "bhom/fdsolver.hpp"

using namespace bhom;

namespace {

const FastVariable kIdentity = FastVariable::scaled(2, 1.0);

PointFunction zero() {
  return [](const Point&) { return 0.0; };
}

double min_boundary(const GridField& g) {
  double m = INFINITY;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.mask[i] == NodeType::Boundary) m = std::min(m, g.values[i]);
  return m;
}

double max_boundary(const GridField& g) {
  double m = -INFINITY;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.mask[i] == NodeType::Boundary) m = std::max(m, g.values[i]);
  return m;
}

// Random trigonometric boundary data.
PointFunction random_trig(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double a = u(rng), b = 3 * u(rng), c = 3 * u(rng), d = u(rng);
  return [=](const Point& x) { return a * std::sin(b * x[0] + 1) + d * std::cos(c * x[1]); };
}

// Radial profile of M+ in R^n: Lam_or_lam(u'') u'' + Lam_or_lam(u') (n-1) u'/r = 0,
// integrated with RK4 and shot on u'(r0) to hit u(r1) = target.
double radial_rk4(double r0, double r1, double u0, double slope, double lam, double Lam, int n, double r_eval) {
  auto rhs = [&](double r, double u1) {
    // Solve for u'' given u'; the coefficient of u'' depends on its sign.
    const double t = (n - 1) * u1 / r;
    const double tang = t > 0 ? Lam * t : lam * t;
    const double upp_pos = -tang / Lam, upp_neg = -tang / lam;
    return upp_pos > 0 ? upp_pos : upp_neg;
  };
  const int steps = 4000;
  const double dr = (r1 - r0) / steps;
  double r = r0, u = u0, v = slope;
  for (int s = 0; s < steps; ++s) {
    if (r >= r_eval - 1e-15) break;
    const double step = std::min(dr, r_eval - r);
    const double k1u = v, k1v = rhs(r, v);
    const double k2u = v + 0.5 * step * k1v, k2v = rhs(r + 0.5 * step, v + 0.5 * step * k1v);
    const double k3u = v + 0.5 * step * k2v, k3v = rhs(r + 0.5 * step, v + 0.5 * step * k2v);
    const double k4u = v + step * k3v, k4v = rhs(r + step, v + step * k3v);
    u += step / 6 * (k1u + 2 * k2u + 2 * k3u + k4u);
    v += step / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
    r += step;
  }
  return u;
}

}  // namespace

TEST(Stencil, DirectionCounts) {
  EXPECT_EQ(make_stencil(2, 1).dirs.size(), 2u);
  EXPECT_EQ(make_stencil(2, 2).dirs.size(), 4u);
  EXPECT_EQ(make_stencil(2, 3).dirs.size(), 8u);
  EXPECT_EQ(make_stencil(3, 2).dirs.size(), 9u);
  for (int order : {1, 2, 3}) {
    const Stencil st = make_stencil(2, order);
    for (const auto& f : st.frames) {
      const auto& a = st.dirs[f[0]];
      const auto& b = st.dirs[f[1]];
      EXPECT_EQ(a[0] * b[0] + a[1] * b[1], 0);
    }
  }
}

TEST(MonotoneWeights, CrossDominance) {
  const double rows[] = {1.0, 0.9, 0.9, 1.0};
  const SymMatrix a = SymMatrix::from_rows(2, rows);
  const std::vector<char> all(8, 1);
  const WeightResult w1 = monotone_weights(a, make_stencil(2, 1), all);
  EXPECT_FALSE(w1.ok);
  EXPECT_EQ(w1.coefficient, "a12");
  const Stencil st = make_stencil(2, 2);
  const WeightResult w2 = monotone_weights(a, st, all);
  ASSERT_TRUE(w2.ok);
  // Reconstruct sum_d w_d e e^T / |e|^2 by hand.
  double r00 = 0, r01 = 0, r11 = 0;
  for (std::size_t d = 0; d < st.dirs.size(); ++d) {
    EXPECT_GE(w2.w[d], 0.0);
    const auto& e = st.dirs[d];
    r00 += w2.w[d] * e[0] * e[0] / st.len2[d];
    r01 += w2.w[d] * e[0] * e[1] / st.len2[d];
    r11 += w2.w[d] * e[1] * e[1] / st.len2[d];
  }
  EXPECT_NEAR(r00, 1.0, 1e-14);
  EXPECT_NEAR(r01, 0.9, 1e-14);
  EXPECT_NEAR(r11, 1.0, 1e-14);
}

TEST(MonotoneWeights, KnightMovesForStrongAnisotropy) {
  // a12 > a11 needs a direction steeper than the diagonals.
  const double rows[] = {1.0, 1.2, 1.2, 2.0};
  const SymMatrix a = SymMatrix::from_rows(2, rows);
  const std::vector<char> all(8, 1);
  EXPECT_FALSE(monotone_weights(a, make_stencil(2, 2), all).ok);
  const Stencil st = make_stencil(2, 3);
  const WeightResult w = monotone_weights(a, st, all);
  ASSERT_TRUE(w.ok);
  double r01 = 0;
  for (std::size_t d = 0; d < st.dirs.size(); ++d) r01 += w.w[d] * st.dirs[d][0] * st.dirs[d][1] / st.len2[d];
  EXPECT_NEAR(r01, 1.2, 1e-12);
}

TEST(Discretize, CertificateNamesNodeAndCoefficient) {
  const double rows[] = {1.0, 0.9, 0.9, 1.0};
  const auto op = EllipticOperator::constant_linear(SymMatrix::from_rows(2, rows), 0.1, 1.9);
  const PointFunction g = zero();
  try {
    discretize_box(op, {0, 0}, {1, 1}, 1.0 / 16, 1, kIdentity, g, g);
    FAIL() << "expected CertificateError";
  } catch (const CertificateError& e) {
    EXPECT_GE(e.node(), 0);
    EXPECT_NEAR(e.coefficient(), 0.9, 1e-15);
    EXPECT_NE(std::string(e.what()).find("a12"), std::string::npos);
  }
  const DiscreteProblem p = discretize_box(op, {0, 0}, {1, 1}, 1.0 / 16, 2, kIdentity, g, g);
  EXPECT_FALSE(p.certificate.empty());
}

TEST(Discretize, FivePointSquare) {
  const PointFunction g = zero();
  const DiscreteProblem p = discretize_box(EllipticOperator::laplacian(2), {0, 0}, {1, 1}, 1.0 / 64, 1, kIdentity, g, g);
  EXPECT_EQ(p.interior.size(), 63u * 63u);
  EXPECT_EQ(p.grid.count(NodeType::Boundary), 4 * 64);
  EXPECT_THROW(discretize_box(EllipticOperator::laplacian(2), {0, 0}, {1, 1}, 0.3, 1, kIdentity, g, g), DomainError);
}

TEST(SolveDirichlet, HarmonicQuadraticIsExact) {
  const PointFunction g = [](const Point& x) { return x[0] * x[0] - x[1] * x[1]; };
  const DiscreteProblem p = discretize_box(EllipticOperator::laplacian(2), {0, 0}, {1, 1}, 1.0 / 64, 1, kIdentity, g, zero());
  const SolveResult r = solve_dirichlet(p);
  EXPECT_TRUE(r.record.converged);
  double err = 0;
  for (std::size_t i = 0; i < r.field.size(); ++i) err = std::max(err, std::abs(r.field.values[i] - g(r.field.coord(i))));
  EXPECT_LE(err, 1e-10);
}

TEST(SolveDirichlet, ConstantsForEveryKind) {
  const double r1[] = {2, 0.5, 0.5, 1}, r2[] = {1, -0.3, -0.3, 2};
  const auto bell = EllipticOperator::bellman({EllipticOperator::constant_linear(SymMatrix::from_rows(2, r1), 0.5, 2.5),
                                               EllipticOperator::constant_linear(SymMatrix::from_rows(2, r2), 0.5, 2.5)},
                                              false);
  const std::vector<EllipticOperator> ops = {EllipticOperator::pucci(+1, 2, 1, 2), EllipticOperator::pucci(-1, 2, 1, 2),
                                             EllipticOperator::laplacian(2), bell};
  const Domain disk = Domain::disk({0, 0}, 1);
  const PointFunction c = [](const Point&) { return 0.7; };
  for (const auto& op : ops) {
    const SolveResult r = solve_dirichlet(discretize(op, disk, 1.0 / 16, 2, kIdentity, c, zero()));
    for (std::size_t i = 0; i < r.field.size(); ++i)
      if (r.field.mask[i] != NodeType::Exterior) EXPECT_NEAR(r.field.values[i], 0.7, 1e-8) << op.describe();
  }
}

TEST(SolveDirichlet, ResidualBelowToleranceAfterConvergence) {
  std::mt19937_64 rng(1);
  const DiscreteProblem p =
      discretize(EllipticOperator::pucci(+1, 2, 1, 2), Domain::disk({0, 0}, 1), 1.0 / 32, 2, kIdentity, random_trig(rng), zero());
  const SolveResult r = solve_dirichlet(p);
  ASSERT_TRUE(r.record.converged);
  for (double v : residual(p, r.field.values))
    if (!std::isnan(v)) EXPECT_LE(std::abs(v), 1e-8);
  EXPECT_EQ(r.record.residual_history.size(), static_cast<std::size_t>(r.record.iterations));
}

TEST(SolveDirichlet, GaussSeidelAgreesWithHoward) {
  std::mt19937_64 rng(2);
  const DiscreteProblem p =
      discretize(EllipticOperator::pucci(-1, 2, 1, 3), Domain::disk({0, 0}, 1), 1.0 / 16, 2, kIdentity, random_trig(rng), zero());
  const SolveResult howard = solve_dirichlet(p);
  SolveOptions gs;
  gs.method = SolveMethod::GaussSeidel;
  const SolveResult a = solve_dirichlet(p, gs);
  gs.method = SolveMethod::RedBlack;
  const SolveResult b = solve_dirichlet(p, gs);
  EXPECT_TRUE(b.record.red_black);
  EXPECT_FALSE(a.record.red_black);
  for (std::size_t i = 0; i < p.grid.size(); ++i) {
    if (p.grid.mask[i] != NodeType::Interior) continue;
    EXPECT_NEAR(a.field.values[i], howard.field.values[i], 1e-6);
    EXPECT_NEAR(b.field.values[i], howard.field.values[i], 1e-6);
  }
}

TEST(SolveDirichlet, IterationCapReportsHistory) {
  std::mt19937_64 rng(3);
  const DiscreteProblem p =
      discretize(EllipticOperator::pucci(+1, 2, 1, 2), Domain::disk({0, 0}, 1), 1.0 / 32, 2, kIdentity, random_trig(rng), zero());
  SolveOptions opt;
  opt.method = SolveMethod::GaussSeidel;
  opt.max_sweeps = 3;
  try {
    solve_dirichlet(p, opt);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.residual_history().size(), 3u);
  }
  opt.throw_on_failure = false;
  EXPECT_FALSE(solve_dirichlet(p, opt).record.converged);
}

TEST(SolveDirichlet, FactorizationReusedForConstantLinear) {
  clear_factorization_cache();
  const PointFunction g = [](const Point& x) { return x[0]; };
  const DiscreteProblem p = discretize_box(EllipticOperator::laplacian(2), {0, 0}, {1, 1}, 1.0 / 32, 1, kIdentity, g, zero());
  EXPECT_FALSE(solve_dirichlet(p).record.factorization_reused);
  EXPECT_TRUE(solve_dirichlet(p).record.factorization_reused);
}

TEST(SolveDirichletProperty, DiscreteMaximumPrinciple) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto op = EllipticOperator::pucci(trial % 2 ? 1 : -1, 2, 1, 1 + trial);
    const DiscreteProblem p = discretize(op, Domain::disk({0, 0}, 1), 1.0 / 16, 2, kIdentity, random_trig(rng), zero());
    const SolveResult r = solve_dirichlet(p);
    const double lo = min_boundary(r.field), hi = max_boundary(r.field);
    for (std::size_t i = 0; i < p.grid.size(); ++i) {
      if (p.grid.mask[i] != NodeType::Interior) continue;
      EXPECT_GE(r.field.values[i], lo - 1e-9);
      EXPECT_LE(r.field.values[i], hi + 1e-9);
    }
  }
}

TEST(ComparisonCheck, ShiftGivesMargin) {
  std::mt19937_64 rng(5);
  const DiscreteProblem p =
      discretize(EllipticOperator::pucci(+1, 2, 1, 2), Domain::disk({0, 0}, 1), 1.0 / 16, 2, kIdentity, random_trig(rng), zero());
  const SolveResult v = solve_dirichlet(p);
  GridField u = v.field;
  for (auto& x : u.values) x += 0.1;
  const ComparisonReport rep = comparison_check(p, u, v.field);
  EXPECT_TRUE(rep.premises_hold);
  EXPECT_TRUE(rep.conclusion_holds);
  EXPECT_NEAR(rep.worst_margin, 0.1, 1e-12);
}

TEST(ComparisonCheckProperty, OrderedBoundaryDataGiveOrderedSolutions) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> bump(0.0, 0.5);
  const Domain disk = Domain::disk({0, 0}, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto op = EllipticOperator::pucci(trial % 2 ? 1 : -1, 2, 1, 2);
    const PointFunction gv = random_trig(rng);
    const double lift = bump(rng), freq = 1 + 4 * bump(rng);
    const PointFunction gu = [=](const Point& x) { return gv(x) + lift * (1 + std::sin(freq * x[0])); };
    const DiscreteProblem pu = discretize(op, disk, 1.0 / 12, 2, kIdentity, gu, zero());
    const DiscreteProblem pv = discretize(op, disk, 1.0 / 12, 2, kIdentity, gv, zero());
    const GridField u = solve_dirichlet(pu).field, v = solve_dirichlet(pv).field;
    const ComparisonReport rep = comparison_check(pu, u, v);
    EXPECT_TRUE(rep.premises_hold) << "trial " << trial;
    EXPECT_TRUE(rep.consistent()) << "trial " << trial << " margin " << rep.worst_margin;
  }
}

TEST(ComparisonCheck, ViolatedPremisesAreNotAFailure) {
  const PointFunction g = zero();
  const DiscreteProblem p = discretize_box(EllipticOperator::laplacian(2), {0, 0}, {1, 1}, 0.25, 1, kIdentity, g, g);
  GridField u = p.grid, v = p.grid;
  for (auto& x : v.values) x = 1.0;  // boundary ordering fails
  const ComparisonReport rep = comparison_check(p, u, v);
  EXPECT_FALSE(rep.premises_hold);
  EXPECT_TRUE(rep.consistent());
}

TEST(OscillationProbe, HarmonicCubic) {
  const PointFunction cubic = [](const Point& x) { return x[0] * x[0] * x[0] - 3 * x[0] * x[1] * x[1]; };
  const DiscreteProblem p = discretize_box(EllipticOperator::laplacian(2), {-1, -1}, {1, 1}, 1.0 / 64, 1, kIdentity, cubic, zero());
  GridField u = p.grid;
  for (std::size_t i = 0; i < u.size(); ++i) u.values[i] = cubic(u.coord(i));
  const double c[] = {0.0, 0.0}, radii[] = {1.0, 0.5};
  const OscillationDecay od = oscillation_decay_probe(u, c, radii);
  // r^3 cos(3 theta): osc over B_r is exactly 2 r^3, attained on the lattice axes.
  EXPECT_NEAR(od.osc[0], 2.0, 1e-12);
  EXPECT_NEAR(od.osc[1], 0.25, 1e-12);
  EXPECT_LE(od.osc[1] / od.osc[0], 0.5);
  EXPECT_NEAR(od.gamma, 0.125, 1e-9);
}

TEST(OscillationProbe, ConstantAndErrors) {
  const PointFunction g = [](const Point&) { return 3.0; };
  const DiscreteProblem p = discretize_box(EllipticOperator::laplacian(2), {-1, -1}, {1, 1}, 1.0 / 16, 1, kIdentity, g, zero());
  GridField u = p.grid;
  for (auto& v : u.values) v = 3.0;
  const double c[] = {0.0, 0.0}, radii[] = {0.5, 0.25}, one[] = {0.5}, big[] = {0.5, 2.0};
  const OscillationDecay od = oscillation_decay_probe(u, c, radii);
  EXPECT_EQ(od.osc[0], 0.0);
  EXPECT_EQ(od.gamma, 0.0);
  EXPECT_THROW(oscillation_decay_probe(u, c, one), DomainError);
  EXPECT_THROW(oscillation_decay_probe(u, c, big), DomainError);
}

TEST(OscillationProbe, SolvedPucciContracts) {
  const PointFunction g = [](const Point& x) { return std::cos(12 * x[0]) * std::sin(9 * x[1]); };
  const DiscreteProblem p = discretize(EllipticOperator::pucci(+1, 2, 1, 2), Domain::disk({0, 0}, 1), 1.0 / 48, 2, kIdentity, g, zero());
  const SolveResult r = solve_dirichlet(p);
  const double c[] = {0.0, 0.0}, radii[] = {0.8, 0.4, 0.2};
  const OscillationDecay od = oscillation_decay_probe(r.field, c, radii);
  EXPECT_GT(od.gamma, 0.0);
  EXPECT_LT(od.gamma, 1.0);
}

TEST(Axisymmetric, RadialPucciProfileMatchesOde) {
  const double lam = 1.0, Lam = 1.5, alpha = 2 * lam / Lam - 1;
  AxisymmetricGeometry geo;
  geo.rho_max = 1.0;
  geo.z_lo = -1.0;
  geo.z_hi = 1.0;
  geo.phi = [](const Point& x) { const double r = std::hypot(x[0], x[1]); return std::max(r - 1.0, 0.5 - r); };
  geo.project = [](const Point& x) {
    const double r = std::hypot(x[0], x[1]), target = r > 0.75 ? 1.0 : 0.5;
    return Point{x[0] * target / r, x[1] * target / r};
  };
  const PointFunction g = [&](const Point& x) { return std::pow(std::hypot(x[0], x[1]), -alpha); };
  const double h = 1.0 / 32;
  const DiscreteProblem p = discretize_axisymmetric(EllipticOperator::pucci(+1, 3, lam, Lam), 3, geo, h, 2, g, zero());
  const SolveResult r = solve_dirichlet(p);

  // Shooting on the radial ODE for the boundary values at r = 0.5 and r = 1.
  const double u0 = std::pow(0.5, -alpha), u1 = 1.0;
  double s_lo = -10.0, s_hi = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double s = 0.5 * (s_lo + s_hi);
    (radial_rk4(0.5, 1.0, u0, s, lam, Lam, 3, 1.0) > u1 ? s_hi : s_lo) = s;
  }
  const double slope = 0.5 * (s_lo + s_hi);
  double worst = 0.0;
  for (std::size_t i = 0; i < p.grid.size(); ++i) {
    if (p.grid.mask[i] != NodeType::Interior) continue;
    const Point x = p.grid.coord(i);
    const double rr = std::hypot(x[0], x[1]);
    worst = std::max(worst, std::abs(r.field.values[i] - radial_rk4(0.5, 1.0, u0, slope, lam, Lam, 3, rr)));
  }
  EXPECT_LE(worst, 2 * h);
}

TEST(GridDump, RoundTrip) {
  std::mt19937_64 rng(8);
  const DiscreteProblem p =
      discretize(EllipticOperator::laplacian(2), Domain::disk({0, 0}, 1), 1.0 / 8, 1, kIdentity, random_trig(rng), zero());
  const GridField u = solve_dirichlet(p).field;
  std::stringstream ss;
  write_grid(ss, u);
  const GridField back = read_grid(ss);
  ASSERT_EQ(back.size(), u.size());
  EXPECT_EQ(back.mask, u.mask);
  for (std::size_t i = 0; i < u.size(); ++i)
    if (u.mask[i] != NodeType::Exterior) EXPECT_EQ(back.values[i], u.values[i]);
  std::stringstream csv;
  write_cross_section_csv(csv, u, 1, 0.0);
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "coord,value");
}

TEST(GridField, InterpolationIsExactForAffine) {
  GridField g = GridField::make(2, {0.0, 0.0}, {5, 5, 1}, 0.25);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.mask[i] = NodeType::Interior;
    const Point x = g.coord(i);
    g.values[i] = 2 * x[0] - 3 * x[1] + 1;
  }
  const double x[] = {0.37, 0.81}, out[] = {1.5, 0.5};
  EXPECT_NEAR(g.interpolate(x), 2 * 0.37 - 3 * 0.81 + 1, 1e-14);
  EXPECT_TRUE(std::isnan(g.interpolate(out)));
}
