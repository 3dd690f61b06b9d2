#pragma once

#include <optional>

#include "mirrorfield/geom.hpp"
#include "mirrorfield/vec.hpp"

namespace mirrorfield {

// Pinhole camera looking along -Z in camera space, +Y up, pixel (0,0) at the
// top-left corner of the image. Pixel coordinates are continuous; integer
// (u, v) addresses the pixel whose center is at (u + 0.5, v + 0.5).
struct Camera {
  int width = 0;
  int height = 0;
  double fx = 1, fy = 1, cx = 0, cy = 0;
  Mat4 camera_to_world;

  Vec3 position() const { return camera_to_world.translation(); }
};

// Ray through pixel (u, v) with t in [t_near, t_far]. Throws InvalidArgument
// for pixels outside [0, width) x [0, height).
Ray camera_ray(const Camera& camera, double u, double v, double t_near = 0.0,
               double t_far = 1e30);

// Same pinhole ray without the bounds check (annotations may sit on or past
// the image border).
Ray pixel_ray(const Camera& camera, double u, double v, double t_near = 0.0, double t_far = 1e30);

// Inverse of camera_ray: the pixel coordinate whose ray passes through
// `point`, or nothing when the point is on or behind the image plane's
// side of the camera.
std::optional<Vec2> project(const Camera& camera, const Vec3& point);

// Camera at `eye` looking at `target`; `up` is a hint and may be parallel to
// the view direction, in which case another axis is used.
Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
               double vertical_fov_degrees);

// Maximum deviation of the rotation block from orthonormality.
double rotation_error(const Camera& camera);

}  // namespace mirrorfield
