#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mirrorfield/error.hpp"
#include "mirrorfield/field.hpp"
#include "support.hpp"

using namespace mirrorfield;

TEST(PositionalEncode, ZeroInput) {
  const std::vector<double> x{0, 0, 0};
  const auto e = positional_encode(x, 2);
  ASSERT_EQ(e.size(), 12u);
  for (std::size_t i = 0; i < e.size(); i += 2) {
    EXPECT_EQ(e[i], 0.0);
    EXPECT_EQ(e[i + 1], 1.0);
  }
}

TEST(PositionalEncode, HalfScalar) {
  const std::vector<double> x{0.5};
  const auto e = positional_encode(x, 1);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_NEAR(e[0], 1.0, 1e-15);
  EXPECT_NEAR(e[1], 0.0, 1e-15);
}

TEST(PositionalEncode, LengthAndLayout) {
  Rng rng(3, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto k = static_cast<std::size_t>(1 + rng.uniform_int(6));
    const int levels = static_cast<int>(rng.uniform_int(8));
    std::vector<double> x(k);
    for (double& v : x) v = 4 * rng.uniform() - 2;
    const auto e = positional_encode(x, levels);
    ASSERT_EQ(e.size(), 2 * static_cast<std::size_t>(levels) * k);
    std::size_t at = 0;
    for (std::size_t j = 0; j < k; ++j) {
      for (int l = 0; l < levels; ++l) {
        const double arg = std::ldexp(std::numbers::pi * x[j], l);
        EXPECT_NEAR(e[at++], std::sin(arg), 1e-12);
        EXPECT_NEAR(e[at++], std::cos(arg), 1e-12);
      }
    }
    std::vector<double> out(e.size());
    positional_encode(x, levels, out);
    EXPECT_EQ(out, e);
  }
}

TEST(AnalyticField, Constant) {
  const auto f = AnalyticField::constant(2.0, {1, 0, 0});
  Rng rng(4, 0);
  for (int i = 0; i < 100; ++i) {
    const Vec3 p{10 * rng.uniform() - 5, 10 * rng.uniform() - 5, 10 * rng.uniform() - 5};
    const FieldSample s = f.query({p, testing_support::random_unit(rng)});
    EXPECT_EQ(s.density, 2.0);
    EXPECT_EQ(s.color.x, 1.0);
    EXPECT_EQ(s.color.y, 0.0);
    EXPECT_EQ(s.color.z, 0.0);
  }
}

TEST(AnalyticField, OverlappingBoxes) {
  AnalyticField f;
  f.add_box({0, 0, 0}, {1, 1, 1}, 1.0, {1, 0, 0});
  f.add_box({0.5, 0, 0}, {1.5, 1, 1}, 3.0, {0, 0, 1});
  const FieldSample both = f.query({{0.75, 0.5, 0.5}, {0, 0, 1}});
  EXPECT_DOUBLE_EQ(both.density, 4.0);
  EXPECT_DOUBLE_EQ(both.color.x, 0.25);
  EXPECT_DOUBLE_EQ(both.color.z, 0.75);
  const FieldSample none = f.query({{2, 2, 2}, {0, 0, 1}});
  EXPECT_EQ(none.density, 0.0);
}

TEST(Field, NonFiniteQueryThrows) {
  const auto f = AnalyticField::constant(1.0, {1, 1, 1});
  const double nan = std::nan("");
  const double inf = INFINITY;
  for (const FieldQuery& q : {FieldQuery{{nan, 0, 0}, {0, 0, 1}}, FieldQuery{{0, inf, 0}, {0, 0, 1}},
                              FieldQuery{{0, 0, 0}, {0, nan, 1}}}) {
    try {
      f.query(q);
      FAIL() << "expected NonFiniteQuery";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::NonFiniteQuery);
    }
  }
  VoxelGridField g({2, 2, 2}, {0, 0, 0}, {1, 1, 1});
  EXPECT_THROW(g.query({{nan, 0, 0}, {0, 0, 1}}), Error);
}

TEST(VoxelGrid, LatticePointReturnsCell) {
  VoxelGridField g({3, 4, 5}, {-1, -1, -1}, {2, 3, 4});
  Rng rng(5, 0);
  for (int k = 0; k < 5; ++k) {
    for (int j = 0; j < 4; ++j) {
      for (int i = 0; i < 3; ++i) {
        g.set_cell(i, j, k, 10 * rng.uniform(), {rng.uniform(), rng.uniform(), rng.uniform()});
      }
    }
  }
  for (int k = 0; k < 5; ++k) {
    for (int j = 0; j < 4; ++j) {
      for (int i = 0; i < 3; ++i) {
        const FieldSample s = g.query({g.cell_center(i, j, k), {0, 0, 1}});
        const FieldSample c = g.cell(i, j, k);
        EXPECT_NEAR(s.density, c.density, 1e-12);
        EXPECT_NEAR(s.color.y, c.color.y, 1e-12);
      }
    }
  }
}

TEST(VoxelGrid, MidpointOfTwoCells) {
  VoxelGridField g({2, 1, 1}, {0, 0, 0}, {2, 1, 1});
  g.set_cell(0, 0, 0, 0.0, {0.5, 0.5, 0.5});
  g.set_cell(1, 0, 0, 4.0, {0.5, 0.5, 0.5});
  const Vec3 mid = (g.cell_center(0, 0, 0) + g.cell_center(1, 0, 0)) * 0.5;
  const FieldSample s = g.query({mid, {0, 0, 1}});
  EXPECT_DOUBLE_EQ(s.density, 2.0);
  EXPECT_DOUBLE_EQ(s.color.x, 0.5);
}

TEST(VoxelGrid, OutsideBoundsEmptyAndBorderClamps) {
  VoxelGridField g({2, 2, 2}, {0, 0, 0}, {1, 1, 1});
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) g.set_cell(i, j, k, 1.0 + i, {1, 1, 1});
  EXPECT_EQ(g.query({{1.01, 0.5, 0.5}, {0, 0, 1}}).density, 0.0);
  EXPECT_EQ(g.query({{0.5, -0.01, 0.5}, {0, 0, 1}}).density, 0.0);
  EXPECT_DOUBLE_EQ(g.query({{0.01, 0.5, 0.5}, {0, 0, 1}}).density, 1.0);
  EXPECT_DOUBLE_EQ(g.query({{0.99, 0.5, 0.5}, {0, 0, 1}}).density, 2.0);
}

TEST(VoxelGrid, LinearAlongEachAxisBetweenLatticePoints) {
  VoxelGridField g({4, 4, 4}, {0, 0, 0}, {1, 1, 1});
  Rng rng(6, 0);
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) g.set_cell(i, j, k, 5 * rng.uniform(), {0, 0, 0});
  const double lo = g.cell_center(0, 0, 0).x;
  const double hi = g.cell_center(3, 3, 3).x;
  for (int trial = 0; trial < 200; ++trial) {
    Vec3 p{lo + (hi - lo) * rng.uniform(), lo + (hi - lo) * rng.uniform(),
           lo + (hi - lo) * rng.uniform()};
    const auto axis = static_cast<std::size_t>(rng.uniform_int(3));
    // Stay inside one cell span along the chosen axis.
    const double h = 0.25;
    const double a0 = lo + h * std::floor((p[axis] - lo) / h);
    const double a1 = std::min(a0 + h, hi);
    Vec3 q0 = p, q1 = p, qm = p;
    q0[axis] = a0;
    q1[axis] = a1;
    const double t = rng.uniform();
    qm[axis] = a0 + t * (a1 - a0);
    const double d0 = g.query({q0, {0, 0, 1}}).density;
    const double d1 = g.query({q1, {0, 0, 1}}).density;
    const double dm = g.query({qm, {0, 0, 1}}).density;
    EXPECT_NEAR(dm, (1 - t) * d0 + t * d1, 1e-12);
  }
}

TEST(VoxelGrid, FromFieldAndValidation) {
  AnalyticField a;
  a.add_box({0, 0, 0}, {0.5, 1, 1}, 3.0, {0, 1, 0});
  const auto g = VoxelGridField::from_field(a, {2, 2, 2}, {0, 0, 0}, {1, 1, 1});
  EXPECT_EQ(g.cell(0, 1, 1).density, 3.0);
  EXPECT_EQ(g.cell(1, 0, 0).density, 0.0);
  EXPECT_THROW(VoxelGridField({0, 1, 1}, {0, 0, 0}, {1, 1, 1}), Error);
  EXPECT_THROW(VoxelGridField({1, 1, 1}, {0, 0, 0}, {1, 0, 1}), Error);
  VoxelGridField h({1, 1, 1}, {0, 0, 0}, {1, 1, 1});
  EXPECT_THROW(h.set_cell(0, 0, 0, -1.0, {}), Error);
}

TEST(CountingField, CountsSingleAndBatch) {
  const auto f = AnalyticField::constant(1.0, {1, 1, 1});
  CountingField c(f);
  c.query({{0, 0, 0}, {0, 0, 1}});
  std::vector<FieldQuery> qs(17);
  std::vector<FieldSample> out(17);
  c.query_batch(qs, out);
  EXPECT_EQ(c.count(), 18u);
  EXPECT_EQ(out[16].density, 1.0);
  c.reset();
  EXPECT_EQ(c.count(), 0u);
}

TEST(Field, DensityNonNegativeOnRandomQueries) {
  AnalyticField a;
  a.add_box({-1, -1, -1}, {1, 1, 1}, 2.0, {0.2, 0.3, 0.4}).add_everywhere(0.1, {1, 1, 1});
  const auto g = VoxelGridField::from_field(a, {5, 5, 5}, {-2, -2, -2}, {2, 2, 2});
  Rng rng(7, 0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p{6 * rng.uniform() - 3, 6 * rng.uniform() - 3, 6 * rng.uniform() - 3};
    const Vec3 d = testing_support::random_unit(rng);
    EXPECT_GE(a.query({p, d}).density, 0.0);
    EXPECT_GE(g.query({p, d}).density, 0.0);
  }
}
