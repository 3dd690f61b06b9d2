#pragma once

#include "mirrorfield/rng.hpp"
#include "mirrorfield/vec.hpp"

namespace mirrorfield {

// Right-handed orthonormal frame with the surface normal as local +Z.
struct ShadingFrame {
  Vec3 n, t, b;

  static ShadingFrame from_normal(const Vec3& normal);
  Vec3 to_local(const Vec3& v) const { return {dot(v, t), dot(v, b), dot(v, n)}; }
  Vec3 to_world(const Vec3& v) const { return v.x * t + v.y * b + v.z * n; }
};

struct BrdfParams {
  double roughness_alpha = 0.0;
  double fresnel_f0 = 1.0;
};

// Below this roughness a surface is treated as a perfect mirror.
inline constexpr double kDeltaRoughness = 1e-3;
inline constexpr int kMaxVndfAttempts = 64;

inline bool is_delta(const BrdfParams& p) { return p.roughness_alpha < kDeltaRoughness; }

// All direction arguments below are unit vectors in the local frame (normal
// = +Z). omega_o points away from the surface toward the viewer.

// GGX normal distribution D(h).
double ggx_d(const Vec3& half, double alpha);
// Smith masking for one direction.
double ggx_g1(const Vec3& v, double alpha);
double fresnel_schlick(double cos_theta, double f0);

struct VndfSample {
  Vec3 half;
  Vec3 omega_i;
};

// One draw of the visible-normal distribution from two uniforms; omega_i may
// point below the surface.
VndfSample vndf_sample_raw(const Vec3& omega_o, double alpha, Vec2 u);

// Draws until omega_i is above the surface, at most kMaxVndfAttempts times,
// then falls back to the ideal reflection.
VndfSample vndf_sample(const Vec3& omega_o, double alpha, Rng& rng);

// Density of `half` under visible-normal sampling (per unit solid angle of
// half vectors): max(0, wo.h) G1(wo) D(h) / (n.wo).
double vndf_pdf(const Vec3& omega_o, const Vec3& half, double alpha);
// The same density expressed over reflected directions omega_i.
double vndf_pdf_direction(const Vec3& omega_o, const Vec3& omega_i, double alpha);

// Full GGX BRDF value f(wo, wi) with separable Smith masking-shadowing.
double ggx_brdf(const Vec3& omega_o, const Vec3& omega_i, const BrdfParams& params);

// Monte-Carlo weight f * cos / pdf for a visible-normal sample:
// F(wi.h) * G1(wi). For delta surfaces pass half = (0,0,1).
double estimator_weight(const Vec3& omega_o, const Vec3& omega_i, const Vec3& half,
                        const BrdfParams& params);

}  // namespace mirrorfield
