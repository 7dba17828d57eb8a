#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <numbers>
#include <random>

#include "bhom/error.hpp"
#include "bhom/geometry.hpp"

using namespace bhom;

namespace {

// Independent fractional part of the graph height over m' (pivot = last axis
// in 2D for these tests, chosen by largest component).
double frac_height(const Point& nu, std::int64_t m) {
  const int k = std::abs(nu[1]) >= std::abs(nu[0]) ? 1 : 0;
  const double h = -nu[1 - k] * static_cast<double>(m) / nu[k];
  return h - std::floor(h);
}

}  // namespace

TEST(ClassifyDirection, ExactRatioIsRational) {
  const Direction d = classify_direction(Point{0.6, 0.8});
  ASSERT_TRUE(d.rational);
  EXPECT_EQ(d.m, (IntVec{3, 4}));
}

TEST(ClassifyDirection, EqualComponents) {
  const double s = 1.0 / std::sqrt(2.0);
  const Direction d = classify_direction(Point{s, s});
  ASSERT_TRUE(d.rational);
  EXPECT_EQ(d.m, (IntVec{1, 1}));
}

TEST(ClassifyDirection, SignFollowsVector) {
  const Direction d = classify_direction(Point{-3.0, 4.0});
  ASSERT_TRUE(d.rational);
  EXPECT_EQ(d.m, (IntVec{-3, 4}));
}

TEST(ClassifyDirection, RootTwoIsIrrationalAtDefaultCap) {
  const Direction d = classify_direction(Point{1.0, std::sqrt(2.0)});
  EXPECT_FALSE(d.rational);
  EXPECT_NEAR(norm(d.nu), 1.0, 1e-12);
}

TEST(ClassifyDirection, LargeCapFindsConvergentWitness) {
  // 13860/19601 is a convergent of 1/sqrt(2); check the witness independently.
  const Point v{1.0, std::sqrt(2.0)};
  const Point nu = normalized(v);
  const Point m{13860.0, 19601.0};
  const Point mhat = normalized(m);
  const double err = std::max(std::abs(mhat[0] - nu[0]), std::abs(mhat[1] - nu[1]));
  ASSERT_LE(err, 1e-9);
  const Direction d = classify_direction(v, 1e-9, 1000000);
  ASSERT_TRUE(d.rational);
  EXPECT_EQ(d.m, (IntVec{13860, 19601}));
}

TEST(ClassifyDirection, ZeroVectorThrows) {
  EXPECT_THROW(classify_direction(Point{0.0, 0.0}), DomainError);
  EXPECT_THROW(classify_direction(Point{1.0, 0.0}, 1e-9, 0), DomainError);
}

TEST(ClassifyDirection, ThreeDimensional) {
  const Direction d = classify_direction(Point{2.0, -4.0, 6.0});
  ASSERT_TRUE(d.rational);
  EXPECT_EQ(d.m, (IntVec{1, -2, 3}));
}

TEST(ClassifyDirectionProperty, ScaleInvariant) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> ints(-40, 40);
  std::uniform_real_distribution<double> reals(-1.0, 1.0), scales(1e-3, 1e3);
  for (int trial = 0; trial < 300; ++trial) {
    Point v = trial % 2 ? Point{double(ints(rng)), double(ints(rng))} : Point{reals(rng), reals(rng)};
    if (norm(v) == 0.0) continue;
    const double c = scales(rng);
    const Point w{c * v[0], c * v[1]};
    const Direction a = classify_direction(v), b = classify_direction(w);
    EXPECT_EQ(a.rational, b.rational);
    EXPECT_EQ(a.m, b.m);
  }
}

TEST(ClassifyDirectionProperty, RationalInvariants) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> ints(-200, 200);
  for (int trial = 0; trial < 300; ++trial) {
    const Point v{double(ints(rng)), double(ints(rng)), double(ints(rng))};
    if (norm(v) == 0.0) continue;
    const Direction d = classify_direction(v);
    ASSERT_TRUE(d.rational);
    std::int64_t g = 0;
    for (auto mi : d.m) g = std::gcd(g, std::abs(mi));
    EXPECT_EQ(g, 1);
    const Point mhat = normalized(Point(d.m.begin(), d.m.end()));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(mhat[i], d.nu[i], 1e-9);
  }
}

TEST(InDDelta, Examples) {
  EXPECT_TRUE(in_D_delta(classify_direction(Point{3, 4}), 0.5).member);
  EXPECT_FALSE(in_D_delta(classify_direction(Point{1, 1}), 0.5).member);
  EXPECT_FALSE(in_D_delta(classify_direction(Point{1, 0}), 0.9).member);
  const auto irr = in_D_delta(classify_direction(Point{1, std::sqrt(2.0)}), 0.1);
  EXPECT_TRUE(irr.member);
  EXPECT_TRUE(irr.vacuous);
  EXPECT_THROW(in_D_delta(classify_direction(Point{1, 0}), 0.0), DomainError);
}

TEST(Equidist, GoldenSlope) {
  const double phi = 0.5 * (1 + std::sqrt(5.0));
  const Direction d = classify_direction(Point{1.0, phi});
  ASSERT_FALSE(d.rational);
  const auto r1000 = equidist_ratio(d, 0.1, 0.3, 1000);
  const auto r10000 = equidist_ratio(d, 0.1, 0.3, 10000);
  EXPECT_EQ(r1000.N, 1000);
  EXPECT_NEAR(r1000.ratio, 0.1, 0.01);
  EXPECT_NEAR(r10000.ratio, 0.1, 0.01);
  EXPECT_LE(std::abs(r10000.ratio - 0.1), std::abs(r1000.ratio - 0.1) + 2.0 / std::sqrt(1000.0));
}

TEST(Equidist, FullWindow) {
  const auto r = equidist_ratio(classify_direction(Point{0.3, 0.7}), 1.0, 0.42, 50);
  EXPECT_EQ(r.A, r.N);
  EXPECT_DOUBLE_EQ(r.ratio, 1.0);
}

TEST(Equidist, RationalTwoValueOrbit) {
  const Direction d = classify_direction(Point{1.0, 2.0});
  // h(m) = -m/2: fractional parts are exactly {0, 1/2}.
  int outside = 0;
  for (std::int64_t m = 0; m < 100; ++m) {
    const double t = frac_height(d.nu, m);
    outside += (t >= 0.2 && t < 0.3);
  }
  ASSERT_EQ(outside, 0);
  const auto r = equidist_ratio(d, 0.1, 0.2, 100);
  EXPECT_EQ(r.A, 0);
  EXPECT_EQ(r.N, 100);
}

TEST(EquidistProperty, CountAdditivity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<Direction> dirs = {classify_direction(Point{1.0, 0.5 * (1 + std::sqrt(5.0))}),
                                       classify_direction(Point{3.0, 7.0}),
                                       classify_direction(Point{1.0, std::sqrt(2.0), std::sqrt(3.0)})};
  for (int trial = 0; trial < 60; ++trial) {
    const Direction& d = dirs[trial % dirs.size()];
    const double d1 = 0.4 * u(rng) + 0.01, d2 = 0.4 * u(rng) + 0.01, t0 = u(rng);
    const std::int64_t R = d.dim() == 2 ? 500 : 30;
    const auto a = equidist_ratio(d, d1, t0, R);
    const auto b = equidist_ratio(d, d2, t0 + d1, R);
    const auto c = equidist_ratio(d, d1 + d2, t0, R);
    EXPECT_EQ(a.A + b.A, c.A) << "trial " << trial;
  }
}

TEST(EquidistProperty, DiscrepancyShrinks) {
  const Direction d = classify_direction(Point{1.0, std::sqrt(3.0)});
  double prev = 1.0;
  for (std::int64_t R : {100, 300, 1000}) {
    const auto r = equidist_ratio(d, 0.1, 0.25, R);
    const double dev = std::abs(r.ratio - 0.1);
    EXPECT_LE(dev, prev + 2.0 / std::sqrt(double(R)));
    prev = dev;
  }
}

TEST(NearIntegerPoint, AxisDirection) {
  const Direction d = classify_direction(Point{0.0, 1.0});
  const auto r = near_integer_point(d, IntVec{5}, 0.1);
  EXPECT_EQ(r.R_used, 1);
  EXPECT_DOUBLE_EQ(r.lattice.frac_part, 0.0);
  EXPECT_DOUBLE_EQ(r.lattice.hat_point[0], 5.0);
  EXPECT_DOUBLE_EQ(r.lattice.hat_point[1], 0.0);
}

TEST(NearIntegerPoint, RootTwoWithinSixtyFour) {
  const Direction d = classify_direction(Point{1.0, std::sqrt(2.0)});
  // Brute-force oracle: some m in [-64, 64] has fractional height <= 0.05.
  bool exists = false;
  for (std::int64_t m = -64; m <= 64 && !exists; ++m) exists = frac_height(d.nu, m) <= 0.05;
  ASSERT_TRUE(exists);
  const auto r = near_integer_point(d, IntVec{0}, 0.05);
  EXPECT_LE(r.R_used, 64);
  EXPECT_LE(r.lattice.frac_part, 0.05);
  EXPECT_NEAR(dot(r.lattice.hat_point, d.nu), 0.0, 1e-10);
  const auto m = static_cast<std::int64_t>(std::llround(r.lattice.hat_point[0]));
  EXPECT_NEAR(frac_height(d.nu, m), r.lattice.frac_part, 1e-12);
  double gap = 0.0;
  for (int i = 0; i < 2; ++i) gap += std::pow(r.lattice.hat_point[i] - double(r.lattice.integer_anchor[i]), 2);
  EXPECT_NEAR(std::sqrt(gap), r.lattice.frac_part, 1e-9);
}

TEST(NearIntegerPoint, RationalOutsideDDeltaThrows) {
  const Direction d = classify_direction(Point{1.0, 1.0});
  EXPECT_THROW(near_integer_point(d, IntVec{0}, 0.1), NoNearIntegerPoint);
}

TEST(NearIntegerPointProperty, GapRecheckedIndependently) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> cube(-20, 20);
  std::uniform_real_distribution<double> deltas(0.01, 0.3);
  const Direction d = classify_direction(Point{std::sqrt(5.0), 1.0});
  for (int trial = 0; trial < 50; ++trial) {
    const double delta = deltas(rng);
    const IntVec k{cube(rng)};
    const auto r = near_integer_point(d, k, delta);
    const auto m = static_cast<std::int64_t>(std::llround(r.lattice.hat_point[1]));
    EXPECT_GE(m, k[0] * r.R_used);
    EXPECT_LT(m, (k[0] + 1) * r.R_used);
    EXPECT_LE(frac_height(d.nu, m), delta + 1e-12);
  }
}

TEST(PrimitiveVectors, SmallCounts) {
  EXPECT_EQ(primitive_vectors(2, 1).size(), 8u);
  EXPECT_EQ(primitive_vectors(2, 2).size(), 16u);
  EXPECT_EQ(primitive_vectors(3, 1).size(), 26u);
}

TEST(Domain, DiskProjectionAndNormal) {
  const Domain d = Domain::disk({0.0, 0.0}, 2.0);
  const Point p = d.project(Point{0.3, 0.4});
  EXPECT_NEAR(p[0], 1.2, 1e-14);
  EXPECT_NEAR(p[1], 1.6, 1e-14);
  const Point n = d.outward_normal(p);
  EXPECT_NEAR(n[0], 0.6, 1e-14);
  EXPECT_NEAR(d.distance_to_boundary(Point{0.3, 0.4}), 1.5, 1e-14);
  EXPECT_NEAR(d.perimeter(), 4 * std::numbers::pi, 1e-14);
  const double s = d.arclength_of(Point{0.0, 2.0});
  EXPECT_NEAR(s, std::numbers::pi, 1e-14);
}

TEST(Domain, HalfDiskPieces) {
  const Domain d = Domain::half_disk_flat_bottom();
  EXPECT_TRUE(d.contains(Point{0.0, 1.5}));
  EXPECT_FALSE(d.contains(Point{0.0, 0.9}));
  const Point flat = d.project(Point{0.2, 1.05});
  EXPECT_NEAR(flat[1], 1.0, 1e-14);
  const Point n = d.outward_normal(flat);
  EXPECT_DOUBLE_EQ(n[0], 0.0);
  EXPECT_DOUBLE_EQ(n[1], -1.0);
  const Point c = d.centroid();
  EXPECT_NEAR(c[1], 1.0 + 4.0 / (3.0 * std::numbers::pi), 1e-14);
  const double P = d.perimeter();
  EXPECT_NEAR(P, std::numbers::pi + 2.0, 1e-14);
  const Point mid = d.boundary_point(std::numbers::pi + 1.0);
  EXPECT_NEAR(mid[0], 0.0, 1e-14);
  EXPECT_NEAR(mid[1], 1.0, 1e-14);
  EXPECT_NEAR(d.arclength_of(mid), std::numbers::pi + 1.0, 1e-12);
}

TEST(Domain, ImplicitCircleMatchesDisk) {
  const Domain imp = Domain::implicit(Expr::parse("x1^2 + x2^2 - 1"), {-1.5, -1.5}, {1.5, 1.5}, 4096);
  EXPECT_NEAR(imp.perimeter(), 2 * std::numbers::pi, 1e-5);
  const Point p = imp.project(Point{0.3, 0.4});
  EXPECT_NEAR(p[0], 0.6, 1e-5);
  EXPECT_NEAR(p[1], 0.8, 1e-5);
  const Point n = imp.outward_normal(p);
  EXPECT_NEAR(n[0], 0.6, 1e-5);
  EXPECT_NEAR(n[1], 0.8, 1e-5);
}

TEST(Domain, ArcsWithNormal) {
  const Domain sq = Domain::rectangle({0.0, 0.0}, {1.0, 1.0});
  const auto right = sq.arcs_with_normal(Point{1.0, 0.0}, 4000);
  ASSERT_EQ(right.size(), 1u);
  EXPECT_NEAR(right[0].first, 1.0, 1e-3);
  EXPECT_NEAR(right[0].second, 2.0, 1e-3);
  const Domain hd = Domain::half_disk_flat_bottom();
  const double s = 1.0 / std::sqrt(2.0);
  const auto corner = hd.arcs_with_normal(Point{-s, -s}, 4096);
  ASSERT_EQ(corner.size(), 1u);
  EXPECT_NEAR(corner[0].first, std::numbers::pi, 2e-3);
  const Domain disk = Domain::disk({0.0, 0.0}, 1.0);
  const auto pt = disk.arcs_with_normal(Point{0.0, -1.0});
  ASSERT_EQ(pt.size(), 1u);
  EXPECT_NEAR(pt[0].first, 1.5 * std::numbers::pi, 1e-14);
}

TEST(IddcAudit, DiskIsPlausible) {
  const Domain d = Domain::disk({0.0, 0.0}, 1.0);
  const auto audit = iddc_audit(d, 360, 100);
  // Oracle: brute-force search of slopes p/q with q <= 100 at each sample angle.
  int rational = 0;
  for (int j = 0; j < 360; ++j) {
    const double th = 2 * std::numbers::pi * j / 360;
    const double a = std::abs(std::cos(th)), b = std::abs(std::sin(th));
    const double r = std::min(a, b) / std::max(a, b);
    bool hit = false;
    for (int q = 1; q <= 100 && !hit; ++q) {
      const double p = std::round(r * q);
      const Point mhat = normalized(Point{p, double(q)});
      const Point nn = normalized(Point{std::min(a, b), std::max(a, b)});
      hit = std::abs(mhat[0] - nn[0]) <= 1e-9 && std::abs(mhat[1] - nn[1]) <= 1e-9;
    }
    rational += hit;
  }
  EXPECT_EQ(static_cast<int>(audit.rational_points.size()), rational);
  EXPECT_LE(audit.rational_fraction, 0.2);
  EXPECT_TRUE(audit.rational_intervals.empty());
  EXPECT_TRUE(audit.plausible);
}

TEST(IddcAudit, HalfDiskFlatFacet) {
  const auto audit = iddc_audit(Domain::half_disk_flat_bottom(), 512, 100);
  EXPECT_FALSE(audit.plausible);
  ASSERT_EQ(audit.rational_intervals.size(), 1u);
  EXPECT_EQ(audit.rational_intervals[0].m, (IntVec{0, -1}));
}

TEST(IddcAudit, SquareHasFourFacets) {
  const auto audit = iddc_audit(Domain::rectangle({0.0, 0.0}, {1.0, 1.0}), 400, 100);
  EXPECT_FALSE(audit.plausible);
  EXPECT_EQ(audit.rational_intervals.size(), 4u);
}
