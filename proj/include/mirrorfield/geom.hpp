#pragma once

#include <array>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mirrorfield/vec.hpp"

namespace mirrorfield {

struct Camera;

// r(t) = origin + t * direction for t in [t_near, t_far]; direction is unit.
struct Ray {
  Vec3 origin;
  Vec3 direction{0, 0, 1};
  double t_near = 0.0;
  double t_far = std::numeric_limits<double>::infinity();

  Vec3 at(double t) const { return origin + t * direction; }
};

using Triangle = std::array<Vec3, 3>;

struct TriangleHit {
  double t = 0;
  // Weights of (v1, v2, v3); non-negative and summing to one.
  Vec3 barycentrics;
};

struct MirrorMaterial {
  double roughness_alpha = 0.0;
  double fresnel_f0 = 1.0;
};

// A planar reflector. All triangles share `normal`, which points to the
// reflective side implied by the counter-clockwise corner order.
struct MirrorSurface {
  std::vector<Triangle> triangles;
  Vec3 normal{0, 0, 1};
  double roughness_alpha = 0.0;
  double fresnel_f0 = 1.0;
};

struct SurfaceHit {
  double t = 0;
  Vec3 point;
  // Facing the ray origin: dot(normal, ray.direction) <= 0.
  Vec3 normal;
  int surface_index = -1;
};

struct VertexAnnotation {
  int vertex_id = 0;
  int image_id = 0;
  Vec2 pixel;
};

// Corner ids (3 or 4, counter-clockwise seen from the reflective side) and
// the material of one annotated mirror.
struct MirrorSpec {
  std::vector<int> vertex_ids;
  MirrorMaterial material;
};

Vec3 reflect(const Vec3& incident, const Vec3& normal);

// Moller-Trumbore. Degenerate triangles and hits outside [t_near, t_far]
// yield nothing.
std::optional<TriangleHit> intersect_triangle(const Ray& ray, const Triangle& tri);

// Nearest hit over every triangle of every surface. Mirrors are two-sided.
std::optional<SurfaceHit> first_mirror_hit(const Ray& ray, std::span<const MirrorSurface> surfaces);

// Least-squares point closest to all rays. Throws DegenerateRays when fewer
// than two rays are given or the normal matrix has condition number > 1e8.
Vec3 triangulate_vertex(std::span<const Ray> rays);

struct PlaneFit {
  Vec3 normal;
  Vec3 centroid;
  std::vector<Vec3> projected;
};

// PCA plane through the points; the normal is the eigenvector of the
// smallest covariance eigenvalue. Throws DegeneratePlane for collinear input.
PlaneFit fit_mirror_plane(std::span<const Vec3> vertices);

// Planar mirror from ordered corners: plane fit, projection, and fan
// triangulation (v1,v2,v3) + (v1,v3,v4).
MirrorSurface make_mirror(std::span<const Vec3> corners, const MirrorMaterial& material);

// Triangulates every corner from its annotations and assembles the mirrors.
std::vector<MirrorSurface> build_mirrors(std::span<const VertexAnnotation> annotations,
                                         std::span<const Camera> cameras,
                                         std::span<const MirrorSpec> mirrors);

// Triangulated corner positions keyed by vertex id, in the order of `ids`.
std::vector<Vec3> triangulate_corners(std::span<const VertexAnnotation> annotations,
                                      std::span<const Camera> cameras, std::span<const int> ids);

}  // namespace mirrorfield
