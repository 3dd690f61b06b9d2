#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "mirrorfield/camera.hpp"
#include "mirrorfield/error.hpp"
#include "mirrorfield/geom.hpp"
#include "support.hpp"

using namespace mirrorfield;
using testing_support::random_unit;

namespace {

// Plane intersection followed by a signed-area point-in-triangle test.
std::optional<std::pair<double, Vec3>> plane_oracle(const Ray& r, const Triangle& tri) {
  const Vec3 n = cross(tri[1] - tri[0], tri[2] - tri[0]);
  const double area2 = length(n);
  if (area2 < 1e-12) return std::nullopt;
  const double denom = dot(n, r.direction);
  if (std::abs(denom) < 1e-14) return std::nullopt;
  const double t = dot(n, tri[0] - r.origin) / denom;
  if (t < r.t_near || t > r.t_far) return std::nullopt;
  const Vec3 p = r.at(t);
  const Vec3 un = n / area2;
  const double b0 = dot(cross(tri[1] - p, tri[2] - p), un) / area2;
  const double b1 = dot(cross(tri[2] - p, tri[0] - p), un) / area2;
  const double b2 = dot(cross(tri[0] - p, tri[1] - p), un) / area2;
  if (b0 < 0 || b1 < 0 || b2 < 0) return std::nullopt;
  return std::make_pair(t, Vec3{b0, b1, b2});
}

Ray ray_through(const Vec3& origin, const Vec3& point) {
  return {origin, normalize(point - origin), 0.0, 1e30};
}

MirrorSurface square_mirror(double z, double half = 1.0) {
  const std::vector<Vec3> c{{-half, -half, z}, {half, -half, z}, {half, half, z}, {-half, half, z}};
  return make_mirror(c, {});
}

}  // namespace

TEST(Reflect, NormalIncidence) {
  const Vec3 r = reflect({0, 0, -1}, {0, 0, 1});
  EXPECT_NEAR(r.x, 0, 1e-15);
  EXPECT_NEAR(r.y, 0, 1e-15);
  EXPECT_NEAR(r.z, 1, 1e-15);
}

TEST(Reflect, FortyFiveDegrees) {
  const double s = 1 / std::sqrt(2.0);
  const Vec3 r = reflect({s, 0, -s}, {0, 0, 1});
  EXPECT_NEAR(r.x, s, 1e-15);
  EXPECT_NEAR(r.y, 0, 1e-15);
  EXPECT_NEAR(r.z, s, 1e-15);
}

TEST(Reflect, RandomPairsKeepLengthAndAngle) {
  Rng rng(1, 0);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 d = random_unit(rng), n = random_unit(rng);
    const Vec3 r = reflect(d, n);
    EXPECT_NEAR(length(r), 1.0, 1e-12);
    // Angle between the incident direction reversed and the normal equals the
    // angle between the outgoing direction and the normal, up to side.
    EXPECT_NEAR(std::abs(dot(-d, n)), std::abs(dot(r, n)), 1e-12);
    const Vec3 back = reflect(r, n);
    EXPECT_LT(testing_support::max_abs_diff(back, d), 1e-9);
  }
}

TEST(IntersectTriangle, Examples) {
  const Triangle tri{Vec3{-1, -1, 0}, Vec3{1, -1, 0}, Vec3{0, 1, 0}};
  const auto hit = intersect_triangle({{0, 0, -5}, {0, 0, 1}, 0, 1e30}, tri);
  ASSERT_TRUE(hit);
  EXPECT_NEAR(hit->t, 5.0, 1e-12);
  EXPECT_NEAR(hit->barycentrics.x + hit->barycentrics.y + hit->barycentrics.z, 1.0, 1e-12);
  EXPECT_FALSE(intersect_triangle({{0, 0, -5}, {1, 0, 0}, 0, 1e30}, tri));
  EXPECT_FALSE(intersect_triangle({{0, 0, 5}, {0, 0, 1}, 0, 1e30}, tri));
  EXPECT_FALSE(intersect_triangle({{0, 0, -5}, {0, 0, 1}, 6, 1e30}, tri));
  const Triangle flat{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{2, 0, 0}};
  EXPECT_FALSE(intersect_triangle({{0.5, 1, 0}, {0, -1, 0}, 0, 1e30}, flat));
}

TEST(IntersectTriangle, AgreesWithPlaneOracle) {
  Rng rng(2, 0);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) {
    Triangle tri;
    for (Vec3& v : tri) v = Vec3{rng.uniform(), rng.uniform(), rng.uniform()} * 2.0 - Vec3{1, 1, 1};
    const Vec3 o = 3.0 * random_unit(rng);
    const Vec3 target = (tri[0] + tri[1] + tri[2]) / 3.0 + 0.8 * random_unit(rng);
    const Ray r{o, normalize(target - o), 0.0, 1e30};
    const auto got = intersect_triangle(r, tri);
    const auto want = plane_oracle(r, tri);
    // Skip rays that graze an edge, where either answer is acceptable.
    if (want) {
      const Vec3 b = want->second;
      if (std::min({b.x, b.y, b.z}) < 1e-9) continue;
    }
    ASSERT_EQ(got.has_value(), want.has_value()) << "case " << i;
    if (got) {
      ++hits;
      EXPECT_NEAR(got->t, want->first, 1e-9);
      EXPECT_LT(testing_support::max_abs_diff(got->barycentrics, want->second), 1e-9);
    }
  }
  EXPECT_GT(hits, 500);
}

TEST(FirstMirrorHit, NearestOfTwoParallel) {
  const std::vector<MirrorSurface> s{square_mirror(2.0), square_mirror(1.0)};
  const auto hit = first_mirror_hit({{0.1, 0.2, 0}, {0, 0, 1}, 0, 1e30}, s);
  ASSERT_TRUE(hit);
  EXPECT_NEAR(hit->t, 1.0, 1e-12);
  EXPECT_EQ(hit->surface_index, 1);
  EXPECT_LE(dot(hit->normal, Vec3{0, 0, 1}), 0);
}

TEST(FirstMirrorHit, MissAndBackSide) {
  const std::vector<MirrorSurface> s{square_mirror(1.0)};
  EXPECT_FALSE(first_mirror_hit({{5, 5, 0}, {0, 0, 1}, 0, 1e30}, s));
  const Vec3 plane_normal = s[0].normal;
  // Approach from the side the plane normal points away from.
  const Vec3 origin = Vec3{0, 0, 1} - 3.0 * plane_normal;
  const auto hit = first_mirror_hit({origin, plane_normal, 0, 1e30}, s);
  ASSERT_TRUE(hit);
  EXPECT_LT(testing_support::max_abs_diff(hit->normal, -plane_normal), 1e-12);
  const auto front = first_mirror_hit({Vec3{0, 0, 1} + 3.0 * plane_normal, -plane_normal, 0, 1e30}, s);
  ASSERT_TRUE(front);
  EXPECT_LT(testing_support::max_abs_diff(front->normal, plane_normal), 1e-12);
}

TEST(FirstMirrorHit, MatchesExhaustiveScan) {
  Rng rng(3, 0);
  std::vector<MirrorSurface> s;
  for (int m = 0; m < 5; ++m) {
    const Vec3 c = random_unit(rng) * 1.5;
    const Vec3 n = random_unit(rng);
    const Vec3 a = normalize(cross(n, std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0}));
    const Vec3 b = cross(n, a);
    const std::vector<Vec3> corners{c - 0.5 * a - 0.5 * b, c + 0.5 * a - 0.5 * b,
                                    c + 0.5 * a + 0.5 * b, c - 0.5 * a + 0.5 * b};
    s.push_back(make_mirror(corners, {}));
  }
  for (int i = 0; i < 5000; ++i) {
    const Ray r{4.0 * random_unit(rng), random_unit(rng), 0.0, 1e30};
    double best = std::numeric_limits<double>::infinity();
    int best_surface = -1;
    for (std::size_t k = 0; k < s.size(); ++k) {
      for (const Triangle& tri : s[k].triangles) {
        if (const auto h = plane_oracle(r, tri); h && h->first < best) {
          best = h->first;
          best_surface = static_cast<int>(k);
        }
      }
    }
    const auto hit = first_mirror_hit(r, s);
    if (best_surface < 0) {
      EXPECT_FALSE(hit);
    } else {
      ASSERT_TRUE(hit);
      EXPECT_NEAR(hit->t, best, 1e-9);
      EXPECT_EQ(hit->surface_index, best_surface);
      EXPECT_LE(dot(hit->normal, r.direction), 0);
    }
  }
}

TEST(TriangulateVertex, ExactRays) {
  const Vec3 p{1, 2, 3};
  const std::vector<Ray> rays{ray_through({0, 0, 0}, p), ray_through({10, 0, 0}, p)};
  const Vec3 v = triangulate_vertex(rays);
  EXPECT_LT(testing_support::max_abs_diff(v, p), 1e-9);
  std::vector<Ray> three = rays;
  three.push_back(ray_through({-3, 7, -2}, p));
  EXPECT_LT(testing_support::max_abs_diff(triangulate_vertex(three), v), 1e-9);
}

TEST(TriangulateVertex, ParallelRaysAreDegenerate) {
  const std::vector<Ray> rays{{{0, 0, 0}, {0, 0, 1}, 0, 1}, {{1, 0, 0}, {0, 0, 1}, 0, 1}};
  try {
    triangulate_vertex(rays);
    FAIL() << "expected DegenerateRays";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateRays);
  }
  EXPECT_THROW(triangulate_vertex(std::span<const Ray>(rays.data(), 1)), Error);
}

TEST(TriangulateVertex, PerturbedRaysBeatGridNeighbours) {
  Rng rng(4, 0);
  const Vec3 p{0.3, -0.2, 0.5};
  std::vector<Ray> rays;
  for (int j = 0; j < 4; ++j) {
    const Vec3 o = 5.0 * random_unit(rng);
    Ray r = ray_through(o, p);
    r.direction = normalize(r.direction + 0.01 * random_unit(rng));
    rays.push_back(r);
  }
  auto residual = [&](const Vec3& x) {
    double s = 0;
    for (const Ray& r : rays) {
      const Vec3 d = x - r.origin;
      const Vec3 perp = d - dot(d, r.direction) * r.direction;
      s += dot(perp, perp);
    }
    return s;
  };
  const Vec3 v = triangulate_vertex(rays);
  const double rv = residual(v);
  for (int i = -5; i <= 5; ++i) {
    for (int j = -5; j <= 5; ++j) {
      for (int k = -5; k <= 5; ++k) {
        const Vec3 g = v + 0.01 * Vec3{double(i), double(j), double(k)};
        EXPECT_LE(rv, residual(g) + 1e-15);
      }
    }
  }
}

TEST(FitMirrorPlane, UnitSquare) {
  const std::vector<Vec3> sq{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  const PlaneFit f = fit_mirror_plane(sq);
  EXPECT_NEAR(std::abs(f.normal.z), 1.0, 1e-12);
  for (std::size_t i = 0; i < sq.size(); ++i) {
    EXPECT_LT(testing_support::max_abs_diff(f.projected[i], sq[i]), 1e-12);
  }
}

TEST(FitMirrorPlane, JitteredVerticesProjectCoplanar) {
  Rng rng(5, 0);
  std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0.5, 0.3, 0}};
  for (Vec3& p : pts) p.z += 1e-3 * (2 * rng.uniform() - 1);
  const PlaneFit f = fit_mirror_plane(pts);
  for (const Vec3& p : f.projected) EXPECT_LT(std::abs(dot(p - f.centroid, f.normal)), 1e-12);
  // Projecting again changes nothing.
  const PlaneFit g = fit_mirror_plane(f.projected);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_LT(testing_support::max_abs_diff(g.projected[i], f.projected[i]), 1e-12);
  }
}

TEST(FitMirrorPlane, NormalMatchesSvd) {
  Rng rng(6, 0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec3> pts;
    const Vec3 n = random_unit(rng);
    const Vec3 a = normalize(cross(n, std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0}));
    const Vec3 b = cross(n, a);
    for (int i = 0; i < 6; ++i) {
      pts.push_back((2 * rng.uniform() - 1) * a + (2 * rng.uniform() - 1) * b +
                    0.05 * (2 * rng.uniform() - 1) * n);
    }
    Eigen::MatrixXd m(pts.size(), 3);
    Vec3 c;
    for (const Vec3& p : pts) c += p / static_cast<double>(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      m.row(static_cast<long>(i)) << pts[i].x - c.x, pts[i].y - c.y, pts[i].z - c.z;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
    const Eigen::Vector3d v = svd.matrixV().col(2);
    const PlaneFit f = fit_mirror_plane(pts);
    EXPECT_NEAR(std::abs(f.normal.x * v.x() + f.normal.y * v.y() + f.normal.z * v.z()), 1.0, 1e-9);
  }
}

TEST(FitMirrorPlane, CollinearIsDegenerate) {
  const std::vector<Vec3> line{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  try {
    fit_mirror_plane(line);
    FAIL() << "expected DegeneratePlane";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegeneratePlane);
  }
}

TEST(MakeMirror, QuadFanAndOrientation) {
  const std::vector<Vec3> c{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  const MirrorSurface m = make_mirror(c, {0.2, 0.9});
  ASSERT_EQ(m.triangles.size(), 2u);
  // (v1, v2, v3) and (v1, v3, v4): the diagonal v1-v3 is shared.
  EXPECT_LT(testing_support::max_abs_diff(m.triangles[0][0], c[0]), 1e-12);
  EXPECT_LT(testing_support::max_abs_diff(m.triangles[0][2], c[2]), 1e-12);
  EXPECT_LT(testing_support::max_abs_diff(m.triangles[1][0], c[0]), 1e-12);
  EXPECT_LT(testing_support::max_abs_diff(m.triangles[1][1], c[2]), 1e-12);
  EXPECT_LT(testing_support::max_abs_diff(m.triangles[1][2], c[3]), 1e-12);
  // Counter-clockwise seen from +z.
  EXPECT_NEAR(m.normal.z, 1.0, 1e-12);
  EXPECT_EQ(m.roughness_alpha, 0.2);
  EXPECT_EQ(m.fresnel_f0, 0.9);
  const MirrorSurface tri = make_mirror(std::span(c.data(), 3), {});
  EXPECT_EQ(tri.triangles.size(), 1u);
}

namespace {

struct Rig {
  std::vector<Camera> cameras;
  std::vector<Vec3> corners;
  std::vector<VertexAnnotation> annotations;
};

Rig make_rig(int views) {
  Rig rig;
  rig.corners = {{-0.5, 0.2, 0.1}, {0.6, 0.25, 0.05}, {0.55, 0.3, 0.9}, {-0.45, 0.25, 0.95}};
  const Vec3 eyes[4] = {{-2, -3, 1.5}, {2, -3, 1.2}, {0.2, -3.5, 2.5}, {-1, -2.5, 0.3}};
  for (int v = 0; v < views; ++v) {
    rig.cameras.push_back(look_at(eyes[v], {0, 0.25, 0.5}, {0, 0, 1}, 64, 64, 50));
    for (int id = 0; id < 4; ++id) {
      const auto px = project(rig.cameras.back(), rig.corners[static_cast<std::size_t>(id)]);
      EXPECT_TRUE(px);
      rig.annotations.push_back({id, v, *px});
    }
  }
  return rig;
}

}  // namespace

TEST(BuildMirrors, NoiselessAnnotationsRecoverVertices) {
  for (const int views : {2, 4}) {
    const Rig rig = make_rig(views);
    const std::vector<int> ids{0, 1, 2, 3};
    const auto est = triangulate_corners(rig.annotations, rig.cameras, ids);
    for (int i = 0; i < 4; ++i) {
      EXPECT_LT(testing_support::max_abs_diff(est[static_cast<std::size_t>(i)],
                                              rig.corners[static_cast<std::size_t>(i)]),
                1e-6);
    }
    const MirrorSpec spec{ids, {0.1, 1.0}};
    const auto mirrors = build_mirrors(rig.annotations, rig.cameras, std::span(&spec, 1));
    ASSERT_EQ(mirrors.size(), 1u);
    EXPECT_EQ(mirrors[0].triangles.size(), 2u);
    EXPECT_NEAR(length(mirrors[0].normal), 1.0, 1e-12);
  }
}

TEST(BuildMirrors, SingleViewVertexIsInsufficient) {
  Rig rig = make_rig(2);
  std::erase_if(rig.annotations, [](const VertexAnnotation& a) { return a.vertex_id == 2 && a.image_id == 1; });
  const MirrorSpec spec{{0, 1, 2, 3}, {}};
  try {
    build_mirrors(rig.annotations, rig.cameras, std::span(&spec, 1));
    FAIL() << "expected InsufficientAnnotations";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientAnnotations);
  }
}

TEST(BuildMirrors, NoiseSweepErrorIsNonDecreasing) {
  const Rig rig = make_rig(2);
  const std::vector<int> ids{0, 1, 2, 3};
  double previous = -1;
  for (const double k : {0.0, 2.0, 5.0, 10.0, 25.0}) {
    double sum = 0;
    for (int t = 0; t < 50; ++t) {
      Rng rng(7, static_cast<std::uint64_t>(t));
      auto noisy = rig.annotations;
      for (VertexAnnotation& a : noisy) {
        a.pixel.x += k * (2 * rng.uniform() - 1);
        a.pixel.y += k * (2 * rng.uniform() - 1);
      }
      const auto est = triangulate_corners(noisy, rig.cameras, ids);
      for (int i = 0; i < 4; ++i) {
        sum += length(est[static_cast<std::size_t>(i)] - rig.corners[static_cast<std::size_t>(i)]) / 4;
      }
    }
    const double mean = sum / 50;
    EXPECT_GE(mean, previous) << "noise " << k;
    previous = mean;
  }
}
