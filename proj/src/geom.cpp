#include "mirrorfield/geom.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "mirrorfield/camera.hpp"
#include "mirrorfield/error.hpp"

namespace mirrorfield {

namespace {

constexpr double kMaxConditionNumber = 1e8;
constexpr double kMinTriangleArea = 1e-12;

Eigen::Vector3d to_eigen(const Vec3& v) { return {v.x, v.y, v.z}; }
Vec3 from_eigen(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

}  // namespace

Vec3 reflect(const Vec3& incident, const Vec3& normal) {
  return incident - 2.0 * dot(incident, normal) * normal;
}

std::optional<TriangleHit> intersect_triangle(const Ray& ray, const Triangle& tri) {
  const Vec3 e1 = tri[1] - tri[0];
  const Vec3 e2 = tri[2] - tri[0];
  const double area2 = length(cross(e1, e2));
  if (area2 <= 2.0 * kMinTriangleArea) return std::nullopt;

  const Vec3 p = cross(ray.direction, e2);
  const double det = dot(e1, p);
  // Parallel to the plane, relative to the triangle's scale.
  if (std::abs(det) <= 1e-12 * area2) return std::nullopt;
  const double inv_det = 1.0 / det;

  const Vec3 s = ray.origin - tri[0];
  const double u = dot(s, p) * inv_det;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = cross(s, e1);
  const double v = dot(ray.direction, q) * inv_det;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = dot(e2, q) * inv_det;
  if (t < ray.t_near || t > ray.t_far) return std::nullopt;
  return TriangleHit{t, {1.0 - u - v, u, v}};
}

std::optional<SurfaceHit> first_mirror_hit(const Ray& ray,
                                           std::span<const MirrorSurface> surfaces) {
  std::optional<SurfaceHit> best;
  Ray shrinking = ray;
  for (std::size_t s = 0; s < surfaces.size(); ++s) {
    for (const Triangle& tri : surfaces[s].triangles) {
      const auto hit = intersect_triangle(shrinking, tri);
      if (!hit) continue;
      if (best && hit->t >= best->t) continue;
      SurfaceHit h;
      h.t = hit->t;
      h.point = ray.at(hit->t);
      h.normal = surfaces[s].normal;
      if (dot(h.normal, ray.direction) > 0) h.normal = -h.normal;
      h.surface_index = static_cast<int>(s);
      best = h;
      shrinking.t_far = hit->t;
    }
  }
  return best;
}

Vec3 triangulate_vertex(std::span<const Ray> rays) {
  if (rays.size() < 2) {
    throw Error(ErrorKind::DegenerateRays,
                "need at least 2 rays, got " + std::to_string(rays.size()));
  }
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  for (const Ray& r : rays) {
    const Eigen::Vector3d d = to_eigen(r.direction).normalized();
    const Eigen::Matrix3d proj = Eigen::Matrix3d::Identity() - d * d.transpose();
    a += proj;
    b += proj * to_eigen(r.origin);
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(a);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(2);
  if (!(lo > 0) || hi / lo > kMaxConditionNumber) {
    throw Error(ErrorKind::DegenerateRays, "rays are (nearly) parallel, condition number " +
                                               std::to_string(lo > 0 ? hi / lo : INFINITY));
  }
  const Eigen::Vector3d v = eig.eigenvectors() *
                            (eig.eigenvalues().cwiseInverse().asDiagonal() *
                             (eig.eigenvectors().transpose() * b));
  return from_eigen(v);
}

PlaneFit fit_mirror_plane(std::span<const Vec3> vertices) {
  if (vertices.size() < 3) {
    throw Error(ErrorKind::DegeneratePlane,
                "need at least 3 vertices, got " + std::to_string(vertices.size()));
  }
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const Vec3& v : vertices) centroid += to_eigen(v);
  centroid /= static_cast<double>(vertices.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Vec3& v : vertices) {
    const Eigen::Vector3d d = to_eigen(v) - centroid;
    cov += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d ev = eig.eigenvalues();
  // Collinear (or coincident) points leave two vanishing eigenvalues.
  if (!(ev(2) > 0) || ev(1) <= 1e-12 * ev(2)) {
    throw Error(ErrorKind::DegeneratePlane, "vertices are collinear");
  }

  PlaneFit fit;
  fit.normal = normalize(from_eigen(eig.eigenvectors().col(0)));
  fit.centroid = from_eigen(centroid);
  fit.projected.reserve(vertices.size());
  for (const Vec3& v : vertices) {
    fit.projected.push_back(v - dot(v - fit.centroid, fit.normal) * fit.normal);
  }
  return fit;
}

MirrorSurface make_mirror(std::span<const Vec3> corners, const MirrorMaterial& material) {
  if (corners.size() != 3 && corners.size() != 4) {
    throw Error(ErrorKind::InvalidArgument,
                "a mirror needs 3 or 4 corners, got " + std::to_string(corners.size()));
  }
  PlaneFit fit = fit_mirror_plane(corners);
  const auto& v = fit.projected;
  const Vec3 winding = cross(v[1] - v[0], v[2] - v[0]);
  if (dot(winding, fit.normal) < 0) fit.normal = -fit.normal;

  MirrorSurface mirror;
  mirror.normal = fit.normal;
  mirror.roughness_alpha = material.roughness_alpha;
  mirror.fresnel_f0 = material.fresnel_f0;
  mirror.triangles.push_back({v[0], v[1], v[2]});
  if (v.size() == 4) mirror.triangles.push_back({v[0], v[2], v[3]});
  return mirror;
}

std::vector<Vec3> triangulate_corners(std::span<const VertexAnnotation> annotations,
                                      std::span<const Camera> cameras, std::span<const int> ids) {
  std::vector<Vec3> corners;
  corners.reserve(ids.size());
  for (const int id : ids) {
    std::vector<Ray> rays;
    for (const VertexAnnotation& a : annotations) {
      if (a.vertex_id != id) continue;
      if (a.image_id < 0 || static_cast<std::size_t>(a.image_id) >= cameras.size()) {
        throw Error(ErrorKind::Data, "annotation of vertex " + std::to_string(id) +
                                         " references unknown image " +
                                         std::to_string(a.image_id));
      }
      rays.push_back(pixel_ray(cameras[static_cast<std::size_t>(a.image_id)], a.pixel.x,
                               a.pixel.y));
    }
    if (rays.size() < 2) {
      throw Error(ErrorKind::InsufficientAnnotations,
                  "vertex " + std::to_string(id) + " is annotated in " +
                      std::to_string(rays.size()) + " image(s), need 2");
    }
    corners.push_back(triangulate_vertex(rays));
  }
  return corners;
}

std::vector<MirrorSurface> build_mirrors(std::span<const VertexAnnotation> annotations,
                                         std::span<const Camera> cameras,
                                         std::span<const MirrorSpec> mirrors) {
  std::vector<MirrorSurface> out;
  out.reserve(mirrors.size());
  for (const MirrorSpec& spec : mirrors) {
    const std::vector<Vec3> corners = triangulate_corners(annotations, cameras, spec.vertex_ids);
    out.push_back(make_mirror(corners, spec.material));
  }
  return out;
}

}  // namespace mirrorfield
