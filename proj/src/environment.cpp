#include "mirrorfield/environment.hpp"

#include <algorithm>
#include <cmath>

namespace mirrorfield {

Vec3 Environment::emission(const Vec3& d) const {
  if (!checker) return color_a;
  const double theta = std::acos(std::clamp(d.z, -1.0, 1.0));
  double phi = std::atan2(d.y, d.x);
  if (phi < 0) phi += 2.0 * kPi;
  const auto i = static_cast<long>(std::floor(phi / (2.0 * kPi) * tiles_phi));
  const auto j = static_cast<long>(std::floor(theta / kPi * tiles_theta));
  return ((i + j) % 2 == 0) ? color_a : color_b;
}

std::optional<double> Environment::exit_distance(const Vec3& origin, const Vec3& direction) const {
  const Vec3 oc = origin - center;
  const double b = dot(oc, direction);
  const double c = dot(oc, oc) - radius * radius;
  const double disc = b * b - c;
  if (disc < 0) return std::nullopt;
  const double t = -b + std::sqrt(disc);
  if (t < 0) return std::nullopt;
  return t;
}

Vec3 Environment::radiance(const Vec3& origin, const Vec3& direction) const {
  const auto t = exit_distance(origin, direction);
  if (!t) return emission(direction);
  return emission(normalize(origin + *t * direction - center));
}

}  // namespace mirrorfield
