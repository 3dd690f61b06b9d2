#include "mirrorfield/camera.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mirrorfield/error.hpp"

namespace mirrorfield {

Ray camera_ray(const Camera& camera, double u, double v, double t_near, double t_far) {
  if (!(u >= 0 && u < camera.width && v >= 0 && v < camera.height)) {
    throw Error(ErrorKind::InvalidArgument, "pixel (" + std::to_string(u) + ", " +
                                                std::to_string(v) + ") outside " +
                                                std::to_string(camera.width) + "x" +
                                                std::to_string(camera.height) + " image");
  }
  return pixel_ray(camera, u, v, t_near, t_far);
}

Ray pixel_ray(const Camera& camera, double u, double v, double t_near, double t_far) {
  const Vec3 local{(u + 0.5 - camera.cx) / camera.fx, -(v + 0.5 - camera.cy) / camera.fy, -1.0};
  Ray ray;
  ray.origin = camera.position();
  ray.direction = normalize(camera.camera_to_world.transform_vector(local));
  ray.t_near = t_near;
  ray.t_far = t_far;
  return ray;
}

std::optional<Vec2> project(const Camera& camera, const Vec3& point) {
  const Vec3 q = camera.camera_to_world.inverse_transform_vector(point - camera.position());
  if (!(q.z < 0)) return std::nullopt;
  const double x = q.x / -q.z;
  const double y = q.y / -q.z;
  return Vec2{camera.cx + camera.fx * x - 0.5, camera.cy - camera.fy * y - 0.5};
}

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
               double vertical_fov_degrees) {
  const Vec3 forward = normalize(target - eye);
  Vec3 right = cross(forward, up);
  if (length(right) < 1e-9) right = cross(forward, Vec3{0, 1, 0});
  if (length(right) < 1e-9) right = cross(forward, Vec3{1, 0, 0});
  right = normalize(right);
  const Vec3 true_up = cross(right, forward);
  const Vec3 back = -forward;

  Camera camera;
  camera.width = width;
  camera.height = height;
  const double f = 0.5 * height / std::tan(0.5 * vertical_fov_degrees * kPi / 180.0);
  camera.fx = f;
  camera.fy = f;
  camera.cx = 0.5 * width;
  camera.cy = 0.5 * height;
  Mat4& m = camera.camera_to_world;
  for (int r = 0; r < 3; ++r) {
    m(r, 0) = right[static_cast<std::size_t>(r)];
    m(r, 1) = true_up[static_cast<std::size_t>(r)];
    m(r, 2) = back[static_cast<std::size_t>(r)];
    m(r, 3) = eye[static_cast<std::size_t>(r)];
  }
  m(3, 0) = m(3, 1) = m(3, 2) = 0;
  m(3, 3) = 1;
  return camera;
}

double rotation_error(const Camera& camera) {
  double worst = 0;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      const double d = dot(camera.camera_to_world.column(a), camera.camera_to_world.column(b));
      worst = std::max(worst, std::abs(d - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

}  // namespace mirrorfield
