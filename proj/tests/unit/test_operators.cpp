#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bhom/error.hpp"
#include "bhom/expr.hpp"
#include "bhom/linalg.hpp"
#include "bhom/operators.hpp"

using namespace bhom;

namespace {

SymMatrix random_sym(std::mt19937_64& rng, int n, double scale = 2.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  SymMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m(i, j) = m(j, i) = u(rng);
  return m;
}

SymMatrix random_psd(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SymMatrix m(n);
  for (int k = 0; k < n; ++k) {
    Point v(n);
    for (auto& c : v) c = u(rng);
    m = m + SymMatrix::outer(v);
  }
  return m;
}

// Closed-form 2x2 Pucci, written independently of the library.
double pucci2(double a, double b, double c, double lam, double Lam, int sign) {
  const double mid = 0.5 * (a + c), rad = std::hypot(0.5 * (a - c), b);
  double v = 0.0;
  for (double e : {mid + rad, mid - rad}) v += (e > 0) == (sign > 0) ? Lam * e : lam * e;
  return v;
}

}  // namespace

TEST(Expr, PrecedenceAndFunctions) {
  const double x[] = {2.0, 3.0}, y[] = {0.25, 0.0};
  EXPECT_DOUBLE_EQ(Expr::parse("1 + 2*3")(x, y), 7.0);
  EXPECT_DOUBLE_EQ(Expr::parse("-x1^2")(x, y), -4.0);
  EXPECT_DOUBLE_EQ(Expr::parse("2^3^2")(x, y), 512.0);
  EXPECT_NEAR(Expr::parse("sin(2*pi*y1)")(x, y), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(Expr::parse("floor(x2/2) + sign(-x1)")(x, y), 0.0);
  EXPECT_DOUBLE_EQ(Expr::parse("1 + floor(2*(y1 - floor(y1)))").of_y(std::vector<double>{0.75}), 2.0);
  EXPECT_TRUE(Expr::parse("x1*y2").depends_on_y());
  EXPECT_TRUE(Expr::parse("3*pi").is_constant());
}

TEST(Expr, ParseErrorsNameColumn) {
  try {
    Expr::parse("1 + * 2");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("column"), std::string::npos);
  }
  EXPECT_THROW(Expr::parse("sin(y1"), ConfigError);
  EXPECT_THROW(Expr::parse("z1"), ConfigError);
}

TEST(Linalg, EigenvaluesThreeByThree) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const SymMatrix m = random_sym(rng, 3);
    const auto ev = symmetric_eigenvalues(m);
    ASSERT_EQ(ev.size(), 3u);
    EXPECT_GE(ev[0], ev[1]);
    EXPECT_GE(ev[1], ev[2]);
    EXPECT_NEAR(ev[0] + ev[1] + ev[2], m.trace(), 1e-12);
    const double det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
                       m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
                       m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    EXPECT_NEAR(ev[0] * ev[1] * ev[2], det, 1e-10);
  }
}

TEST(Linalg, FrameLastColumnIsNormal) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n : {2, 3}) {
    for (int trial = 0; trial < 100; ++trial) {
      Point v(n);
      for (auto& c : v) c = u(rng);
      const Point nu = normalized(v);
      const Frame q(nu);
      EXPECT_LE(q.orthogonality_error(), 1e-12);
      const Point last = q.column(n - 1);
      for (int i = 0; i < n; ++i) EXPECT_NEAR(last[i], nu[i], 1e-12);
      const SymMatrix m = random_sym(rng, n);
      const SymMatrix back = q.from_frame(q.to_frame(m));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) EXPECT_NEAR(back(i, j), m(i, j), 1e-12);
    }
  }
}

TEST(Pucci, DefinitionExamples) {
  EXPECT_DOUBLE_EQ(pucci_eval(SymMatrix::identity(2), 1, 2, +1), 4.0);
  EXPECT_DOUBLE_EQ(pucci_eval(SymMatrix::identity(2), 1, 2, -1), 2.0);
  const double d[] = {1.0, -1.0};
  EXPECT_DOUBLE_EQ(pucci_eval(SymMatrix::diagonal(d), 1, 2, +1), 1.0);
  EXPECT_DOUBLE_EQ(pucci_eval(SymMatrix::diagonal(d), 1, 2, -1), -1.0);
  const double off[] = {0, 1, 1, 0};
  EXPECT_NEAR(pucci_eval(SymMatrix::from_rows(2, off), 1, 2, +1), 1.0, 1e-15);
}

TEST(Pucci, RejectsAsymmetry) {
  const double rows[] = {1, 1, 0, 1};
  EXPECT_THROW(pucci_eval(SymMatrix::from_rows(2, rows), 1, 2, +1), DomainError);
  EXPECT_THROW(pucci_eval(SymMatrix::identity(2), 2, 1, +1), DomainError);
}

TEST(PucciProperty, MatchesClosedFormOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const SymMatrix m = random_sym(rng, 2);
    for (int s : {+1, -1})
      EXPECT_NEAR(pucci_eval(m, 0.7, 3.1, s), pucci2(m(0, 0), m(0, 1), m(1, 1), 0.7, 3.1, s), 1e-12);
  }
}

TEST(PucciProperty, OrderingDualitySubadditivity) {
  std::mt19937_64 rng(23);
  for (int n : {2, 3}) {
    for (int trial = 0; trial < 300; ++trial) {
      const SymMatrix a = random_sym(rng, n), b = random_sym(rng, n);
      const double plus = pucci_eval(a, 1, 2, +1), minus = pucci_eval(a, 1, 2, -1);
      EXPECT_GE(plus, minus - 1e-14);
      EXPECT_NEAR(pucci_eval(-a, 1, 2, +1), -minus, 1e-12);
      EXPECT_LE(pucci_eval(a + b, 1, 2, +1), plus + pucci_eval(b, 1, 2, +1) + 1e-12);
      EXPECT_NEAR(pucci_eval(a, 1, 1, +1), a.trace(), 1e-12);
      EXPECT_NEAR(pucci_eval(a, 1, 1, -1), a.trace(), 1e-12);
    }
  }
}

TEST(PucciProperty, UniformEllipticityTraceForm) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 300; ++trial) {
    const SymMatrix m = random_sym(rng, 3), nn = random_psd(rng, 3);
    for (int s : {+1, -1}) {
      const double diff = pucci_eval(m + nn, 0.5, 2.5, s) - pucci_eval(m, 0.5, 2.5, s);
      EXPECT_GE(diff, 0.5 * nn.trace() - 1e-12);
      EXPECT_LE(diff, 2.5 * nn.trace() + 1e-12);
    }
  }
}

TEST(Validate, PucciPasses) {
  const auto rep = validate_operator(EllipticOperator::pucci(+1, 2, 1, 2), 1000);
  EXPECT_TRUE(rep.passed);
  EXPECT_LT(rep.homogeneity_error, 1e-12);
  EXPECT_EQ(rep.samples, 1000);
}

TEST(Validate, IdentityLinearPasses) {
  std::vector<Expr> a = {Expr::parse("1"), Expr::parse("0"), Expr::parse("0"), Expr::parse("1")};
  EXPECT_TRUE(validate_operator(EllipticOperator::linear(2, a, 1, 1), 200).passed);
}

TEST(Validate, ConstructedViolationReported) {
  std::vector<Expr> a = {Expr::parse("1 + 0.5*sin(2*pi*y1)"), Expr::parse("0"), Expr::parse("0"),
                         Expr::parse("1")};
  const auto rep = validate_operator(EllipticOperator::linear(2, a, 1, 2), 500);
  EXPECT_FALSE(rep.passed);
  EXPECT_GT(rep.ellipticity_violation + rep.coefficient_violation, 0.1);
  EXPECT_FALSE(rep.failures.empty());
}

TEST(Validate, BellmanFamily) {
  const double r1[] = {2, 0.5, 0.5, 1}, r2[] = {1, -0.3, -0.3, 2};
  const auto op = EllipticOperator::bellman({EllipticOperator::constant_linear(SymMatrix::from_rows(2, r1), 0.5, 2.5),
                                             EllipticOperator::constant_linear(SymMatrix::from_rows(2, r2), 0.5, 2.5)},
                                            true);
  EXPECT_TRUE(validate_operator(op, 300).passed);
  EXPECT_TRUE(op.is_sup());
  EXPECT_EQ(op.members(), 2);
}

TEST(DataNorms, SingleMode) {
  const Expr g = Expr::parse("sin(2*pi*y1)");
  const double x[] = {0.0, 0.0}, period[] = {1.0, 1.0};
  const auto norms = estimate_data_norms(g, x, period, 2, 64);
  EXPECT_NEAR(norms.sup_g, 1.0, 2e-3);
  EXPECT_NEAR(norms.sup_grad_g, 2 * std::numbers::pi, 0.01 * 2 * std::numbers::pi);
  EXPECT_NEAR(norms.sup_hess_g, 4 * std::numbers::pi * std::numbers::pi, 0.02 * 4 * std::numbers::pi * std::numbers::pi);
  EXPECT_LT(norms.periodicity_error, 1e-9);
}

TEST(CellProblem, YIndependentPucciIsItself) {
  const auto op = EllipticOperator::pucci(+1, 2, 1, 2);
  const double rows[] = {1.0, 0.3, 0.3, -0.5};
  const SymMatrix m = SymMatrix::from_rows(2, rows);
  const auto est = effective_operator_estimate(op, m, 1e-3, 16);
  const double exact = pucci2(1.0, 0.3, -0.5, 1, 2, +1);
  EXPECT_NEAR(est.value, exact, 0.02 * std::abs(exact));
}

TEST(CellProblem, TraceOfIdentity) {
  const auto est = effective_operator_estimate(EllipticOperator::laplacian(2), SymMatrix::identity(2), 1e-3, 16);
  EXPECT_NEAR(est.value, 2.0, 0.02);
}

TEST(CellProblem, LayeredHarmonicMean) {
  // Oracle: for a11 depending on y1 only, the 1-d corrector makes the flux
  // constant, so the effective coefficient is the harmonic mean of {1, 2}.
  const double harmonic = 1.0 / (0.5 * (1.0 / 1.0 + 1.0 / 2.0));
  std::vector<Expr> a = {Expr::parse("1 + floor(2*(y1 - floor(y1)))"), Expr::parse("0"), Expr::parse("0"),
                         Expr::parse("1")};
  const auto op = EllipticOperator::linear(2, a, 1, 2);
  const double d[] = {1.0, 0.0};
  const auto est = effective_operator_estimate(op, SymMatrix::diagonal(d), 1e-4, 128);
  EXPECT_NEAR(est.value, harmonic, 0.05 * harmonic);
}

TEST(CellProblemProperty, MonotoneInMatrix) {
  std::mt19937_64 rng(31);
  const auto op = EllipticOperator::pucci(-1, 2, 1, 3);
  for (int trial = 0; trial < 5; ++trial) {
    const SymMatrix m1 = random_sym(rng, 2), m2 = m1 + random_psd(rng, 2);
    const double f1 = effective_operator_estimate(op, m1, 1e-3, 8).value;
    const double f2 = effective_operator_estimate(op, m2, 1e-3, 8).value;
    EXPECT_GE(f2, f1 - 1e-8);
  }
}
