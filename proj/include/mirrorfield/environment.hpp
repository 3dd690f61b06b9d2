#pragma once

#include <optional>

#include "mirrorfield/geom.hpp"
#include "mirrorfield/vec.hpp"

namespace mirrorfield {

// Emitting sphere enclosing the scene. Its radiance at a point depends only
// on the direction of that point from the center: either a constant or a
// latitude/longitude checkerboard.
struct Environment {
  Vec3 center;
  double radius = 10.0;
  bool checker = false;
  int tiles_phi = 8;
  int tiles_theta = 4;
  Vec3 color_a{0.5, 0.5, 0.5};
  Vec3 color_b{0.5, 0.5, 0.5};

  // Radiance on the sphere in the direction `d` (unit) seen from the center.
  Vec3 emission(const Vec3& d) const;
  // Distance along the ray to where it leaves the sphere, if it does.
  std::optional<double> exit_distance(const Vec3& origin, const Vec3& direction) const;
  // Radiance arriving along the ray (origin + t direction) from the sphere.
  Vec3 radiance(const Vec3& origin, const Vec3& direction) const;
};

}  // namespace mirrorfield
