#include "mirrorfield/brdf.hpp"

#include "mirrorfield/geom.hpp"

#include <algorithm>
#include <cmath>

namespace mirrorfield {

ShadingFrame ShadingFrame::from_normal(const Vec3& normal) {
  // Duff et al., "Building an Orthonormal Basis, Revisited".
  const double sign = std::copysign(1.0, normal.z);
  const double a = -1.0 / (sign + normal.z);
  const double b = normal.x * normal.y * a;
  ShadingFrame f;
  f.n = normal;
  f.t = {1.0 + sign * normal.x * normal.x * a, sign * b, -sign * normal.x};
  f.b = {b, sign + normal.y * normal.y * a, -normal.y};
  return f;
}

double ggx_d(const Vec3& half, double alpha) {
  const double cos_h = half.z;
  if (cos_h <= 0) return 0.0;
  const double a2 = alpha * alpha;
  const double denom = cos_h * cos_h * (a2 - 1.0) + 1.0;
  return a2 / (kPi * denom * denom);
}

double ggx_g1(const Vec3& v, double alpha) {
  const double cos_v = v.z;
  if (cos_v <= 0) return 0.0;
  const double a2 = alpha * alpha;
  return 2.0 * cos_v / (cos_v + std::sqrt(a2 + (1.0 - a2) * cos_v * cos_v));
}

double fresnel_schlick(double cos_theta, double f0) {
  const double m = std::clamp(1.0 - cos_theta, 0.0, 1.0);
  const double m2 = m * m;
  return f0 + (1.0 - f0) * m2 * m2 * m;
}

VndfSample vndf_sample_raw(const Vec3& omega_o, double alpha, Vec2 u) {
  // Heitz 2018, "Sampling the GGX Distribution of Visible Normals".
  const Vec3 vh = normalize(Vec3{alpha * omega_o.x, alpha * omega_o.y, omega_o.z});
  const double lensq = vh.x * vh.x + vh.y * vh.y;
  const Vec3 t1 = lensq > 0 ? Vec3{-vh.y, vh.x, 0} / std::sqrt(lensq) : Vec3{1, 0, 0};
  const Vec3 t2 = cross(vh, t1);
  const double r = std::sqrt(u.x);
  const double phi = 2.0 * kPi * u.y;
  const double p1 = r * std::cos(phi);
  double p2 = r * std::sin(phi);
  const double s = 0.5 * (1.0 + vh.z);
  p2 = (1.0 - s) * std::sqrt(std::max(0.0, 1.0 - p1 * p1)) + s * p2;
  const Vec3 nh = p1 * t1 + p2 * t2 + std::sqrt(std::max(0.0, 1.0 - p1 * p1 - p2 * p2)) * vh;
  const Vec3 half = normalize(Vec3{alpha * nh.x, alpha * nh.y, std::max(1e-12, nh.z)});
  return {half, reflect(-omega_o, half)};
}

VndfSample vndf_sample(const Vec3& omega_o, double alpha, Rng& rng) {
  for (int attempt = 0; attempt < kMaxVndfAttempts; ++attempt) {
    const VndfSample s = vndf_sample_raw(omega_o, alpha, rng.uniform2());
    if (s.omega_i.z > 0) return s;
  }
  return {{0, 0, 1}, {-omega_o.x, -omega_o.y, omega_o.z}};
}

double vndf_pdf(const Vec3& omega_o, const Vec3& half, double alpha) {
  if (omega_o.z <= 0) return 0.0;
  const double cos_oh = dot(omega_o, half);
  if (cos_oh <= 0) return 0.0;
  return cos_oh * ggx_g1(omega_o, alpha) * ggx_d(half, alpha) / omega_o.z;
}

double vndf_pdf_direction(const Vec3& omega_o, const Vec3& omega_i, double alpha) {
  const Vec3 sum = omega_o + omega_i;
  const double len = length(sum);
  if (len <= 0) return 0.0;
  const Vec3 half = sum / len;
  const double cos_oh = dot(omega_o, half);
  if (cos_oh <= 0) return 0.0;
  return vndf_pdf(omega_o, half, alpha) / (4.0 * cos_oh);
}

double ggx_brdf(const Vec3& omega_o, const Vec3& omega_i, const BrdfParams& params) {
  if (omega_o.z <= 0 || omega_i.z <= 0) return 0.0;
  const Vec3 half = normalize(omega_o + omega_i);
  const double alpha = params.roughness_alpha;
  const double f = fresnel_schlick(dot(omega_i, half), params.fresnel_f0);
  const double g = ggx_g1(omega_o, alpha) * ggx_g1(omega_i, alpha);
  return f * g * ggx_d(half, alpha) / (4.0 * omega_o.z * omega_i.z);
}

double estimator_weight(const Vec3& omega_o, const Vec3& omega_i, const Vec3& half,
                        const BrdfParams& params) {
  (void)omega_o;
  const double f = fresnel_schlick(std::clamp(dot(omega_i, half), 0.0, 1.0), params.fresnel_f0);
  return f * ggx_g1(omega_i, params.roughness_alpha);
}

}  // namespace mirrorfield
