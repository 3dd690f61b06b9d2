#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mirrorfield/brdf.hpp"
#include "support.hpp"

using namespace mirrorfield;
using std::numbers::pi;
using testing_support::chi_square_p;
using testing_support::chi_square_statistic;

namespace {

// Reference GGX written out from the closed forms, separate from the library.
double ref_d(double cos_h, double a) {
  if (cos_h <= 0) return 0;
  const double k = cos_h * cos_h * (a * a - 1) + 1;
  return a * a / (pi * k * k);
}

double ref_g1(double cos_v, double a) {
  if (cos_v <= 0) return 0;
  return 2 * cos_v / (cos_v + std::sqrt(a * a + (1 - a * a) * cos_v * cos_v));
}

double ref_f(double c, double f0) { return f0 + (1 - f0) * std::pow(1 - c, 5); }

double ref_brdf(const Vec3& wo, const Vec3& wi, double a, double f0) {
  if (wo.z <= 0 || wi.z <= 0) return 0;
  const Vec3 h = normalize(wo + wi);
  return ref_f(dot(wi, h), f0) * ref_d(h.z, a) * ref_g1(wo.z, a) * ref_g1(wi.z, a) /
         (4 * wo.z * wi.z);
}

double ref_pdf(const Vec3& wo, const Vec3& h, double a) {
  const double c = dot(wo, h);
  if (c <= 0 || wo.z <= 0) return 0;
  return c * ref_g1(wo.z, a) * ref_d(h.z, a) / wo.z;
}

Vec3 spherical(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

Vec3 view_at(double theta) { return spherical(theta, 0.3); }

// Hemisphere quadrature with theta = (pi/2) t^2, which packs nodes near the
// pole where narrow lobes live.
template <typename F>
double hemisphere_integral(F&& f, int n = 256) {
  double sum = 0;
  for (int it = 0; it < n; ++it) {
    const double t = (it + 0.5) / n;
    const double theta = 0.5 * pi * t * t;
    const double jac = pi * t / n;  // d theta
    for (int ip = 0; ip < n; ++ip) {
      const double phi = 2 * pi * (ip + 0.5) / n;
      sum += f(spherical(theta, phi)) * std::sin(theta) * jac * (2 * pi / n);
    }
  }
  return sum;
}

// Maps theta_h to [0,1) so that a GGX lobe of width alpha spreads evenly.
double lobe_coordinate(double theta, double a) {
  const double s = std::tan(theta) / a;
  return s * s / (1 + s * s);
}

double lobe_theta(double u, double a) { return std::atan(a * std::sqrt(u / (1 - u))); }

}  // namespace

TEST(Ggx, DistributionExamples) {
  EXPECT_NEAR(ggx_d({0, 0, 1}, 1.0), 1 / pi, 1e-12);
  EXPECT_NEAR(ggx_d({0, 0, 1}, 0.5), 1 / (0.25 * pi), 1e-12);
  EXPECT_EQ(ggx_d(normalize(Vec3{0.3, 0, -1}), 0.5), 0.0);
  Rng rng(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 h = testing_support::random_unit(rng);
    const double a = 0.01 + rng.uniform();
    EXPECT_NEAR(ggx_d(h, a), ref_d(h.z, a), 1e-9 * (1 + ref_d(h.z, a)));
  }
}

TEST(Ggx, MaskingExamples) {
  for (double a : {0.01, 0.3, 1.0}) EXPECT_NEAR(ggx_g1({0, 0, 1}, a), 1.0, 1e-15);
  for (double c : {0.05, 0.5, 0.9}) {
    const Vec3 v{std::sqrt(1 - c * c), 0, c};
    EXPECT_NEAR(ggx_g1(v, 0.0), 1.0, 1e-12);
  }
  EXPECT_NEAR(ggx_g1({std::sqrt(0.75), 0, 0.5}, 1.0), 1 / 1.5, 1e-12);
  EXPECT_EQ(ggx_g1({1, 0, 0}, 0.5), 0.0);
  EXPECT_EQ(ggx_g1(normalize(Vec3{1, 0, -0.1}), 0.5), 0.0);
}

TEST(Ggx, FresnelExamples) {
  EXPECT_DOUBLE_EQ(fresnel_schlick(1.0, 0.3), 0.3);
  EXPECT_DOUBLE_EQ(fresnel_schlick(0.0, 0.3), 1.0);
  EXPECT_NEAR(fresnel_schlick(0.5, 0.04), 0.07, 1e-15);
}

TEST(Ggx, BrdfMatchesReference) {
  Rng rng(2, 0);
  for (int i = 0; i < 2000; ++i) {
    Vec3 wo = testing_support::random_unit(rng);
    Vec3 wi = testing_support::random_unit(rng);
    wo.z = std::abs(wo.z);
    wi.z = std::abs(wi.z);
    const BrdfParams p{0.02 + 0.9 * rng.uniform(), rng.uniform()};
    const double r = ref_brdf(wo, wi, p.roughness_alpha, p.fresnel_f0);
    EXPECT_NEAR(ggx_brdf(wo, wi, p), r, 1e-9 * (1 + r));
  }
}

TEST(ShadingFrame, OrthonormalRightHanded) {
  Rng rng(3, 0);
  std::vector<Vec3> normals{{0, 0, 1}, {0, 0, -1}, {1, 0, 0}, {0, -1, 0}};
  for (int i = 0; i < 1000; ++i) normals.push_back(testing_support::random_unit(rng));
  for (const Vec3& n : normals) {
    const ShadingFrame f = ShadingFrame::from_normal(n);
    EXPECT_NEAR(length(f.t), 1, 1e-9);
    EXPECT_NEAR(length(f.b), 1, 1e-9);
    EXPECT_NEAR(dot(f.t, f.b), 0, 1e-9);
    EXPECT_NEAR(dot(f.t, f.n), 0, 1e-9);
    EXPECT_NEAR(dot(f.b, f.n), 0, 1e-9);
    EXPECT_NEAR(length(cross(f.t, f.b) - f.n), 0, 1e-9);
    const Vec3 v = testing_support::random_unit(rng);
    EXPECT_NEAR(length(f.to_world(f.to_local(v)) - v), 0, 1e-12);
  }
}

TEST(Vndf, DeltaLimit) {
  Rng rng(4, 0);
  for (double theta : {0.0, 0.4, 1.0, 1.4}) {
    const Vec3 wo = view_at(theta);
    const Vec3 ideal{-wo.x, -wo.y, wo.z};
    for (int i = 0; i < 1000; ++i) {
      const VndfSample s = vndf_sample(wo, 1e-4, rng);
      EXPECT_LT(std::acos(std::min(1.0, dot(s.omega_i, ideal))), 0.01);
    }
  }
}

TEST(Vndf, SamplesAboveSurfaceAndReflect) {
  Rng rng(5, 0);
  for (int i = 0; i < 20000; ++i) {
    const Vec3 wo = view_at(1.5 * rng.uniform());
    const double a = 0.01 + rng.uniform();
    const VndfSample s = vndf_sample(wo, a, rng);
    EXPECT_GT(s.half.z, 0);
    EXPECT_GT(s.omega_i.z, 0);
    const Vec3 r = 2 * dot(wo, s.half) * s.half - wo;
    EXPECT_NEAR(length(r - s.omega_i), 0, 1e-9);
  }
}

TEST(Vndf, NormalViewAzimuthUniform) {
  const int bins = 16, n = 100000;
  std::vector<double> obs(bins, 0), exp(bins, static_cast<double>(n) / bins);
  Rng rng(6, 0);
  for (int i = 0; i < n; ++i) {
    const VndfSample s = vndf_sample({0, 0, 1}, 0.5, rng);
    double phi = std::atan2(s.half.y, s.half.x);
    if (phi < 0) phi += 2 * pi;
    obs[std::min(bins - 1, static_cast<int>(phi / (2 * pi) * bins))] += 1;
  }
  EXPECT_GT(chi_square_p(chi_square_statistic(obs, exp), bins - 1), 0.01);
}

// Histogram of the half-vector polar angle (in a lobe-adapted coordinate)
// against bin probabilities obtained by integrating the reference density.
class VndfChiSquare : public ::testing::TestWithParam<double> {};

TEST_P(VndfChiSquare, PolarMarginalMatchesDensity) {
  const double a = GetParam();
  const int bins = 64, n = 100000;
  for (double view_theta : {0.0, 0.7, 1.3}) {
    const Vec3 wo = view_at(view_theta);
    std::vector<double> prob(bins, 0);
    const int sub = 64, nphi = 512;
    for (int b = 0; b < bins; ++b) {
      const double t0 = lobe_theta(static_cast<double>(b) / bins, a);
      const double t1 = b + 1 == bins ? 0.5 * pi : lobe_theta(static_cast<double>(b + 1) / bins, a);
      for (int s = 0; s < sub; ++s) {
        const double th = t0 + (t1 - t0) * (s + 0.5) / sub;
        double ring = 0;
        for (int k = 0; k < nphi; ++k) {
          ring += ref_pdf(wo, spherical(th, 2 * pi * (k + 0.5) / nphi), a);
        }
        prob[static_cast<std::size_t>(b)] +=
            ring * (2 * pi / nphi) * std::sin(th) * (t1 - t0) / sub;
      }
    }
    double total = 0;
    for (double p : prob) total += p;
    EXPECT_NEAR(total, 1.0, 1e-3) << "view " << view_theta;

    std::vector<double> obs(bins, 0);
    Rng rng(7, static_cast<std::uint64_t>(view_theta * 100));
    for (int i = 0; i < n; ++i) {
      const VndfSample s = vndf_sample_raw(wo, a, rng.uniform2());
      const double u = lobe_coordinate(std::acos(std::clamp(s.half.z, -1.0, 1.0)), a);
      obs[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>(u * bins)))] += 1;
    }
    // Pool sparse tail bins so every expected count is at least 5.
    std::vector<double> po, pe;
    double acc_o = 0, acc_e = 0;
    for (int b = 0; b < bins; ++b) {
      acc_o += obs[static_cast<std::size_t>(b)];
      acc_e += prob[static_cast<std::size_t>(b)] * n / total;
      if (acc_e >= 5) {
        po.push_back(acc_o);
        pe.push_back(acc_e);
        acc_o = acc_e = 0;
      }
    }
    if (acc_e > 0) {
      po.back() += acc_o;
      pe.back() += acc_e;
    }
    const double p = chi_square_p(chi_square_statistic(po, pe), static_cast<int>(po.size()) - 1);
    EXPECT_GT(p, 0.01) << "alpha " << a << " view " << view_theta;
  }
}

INSTANTIATE_TEST_SUITE_P(Roughness, VndfChiSquare, ::testing::Values(0.05, 0.1, 0.5));

TEST(Vndf, PdfIntegratesToOne) {
  for (double a : {0.05, 0.1, 0.5, 1.0}) {
    for (double view_theta : {0.0, 0.5, 1.0, 1.4}) {
      const Vec3 wo = view_at(view_theta);
      const double integral = hemisphere_integral([&](const Vec3& h) { return vndf_pdf(wo, h, a); });
      EXPECT_NEAR(integral, 1.0, 1e-2) << "alpha " << a << " view " << view_theta;
    }
  }
}

TEST(Vndf, PdfZeroForBackfacingHalf) {
  const Vec3 wo = view_at(0.8);
  const Vec3 h = normalize(Vec3{-wo.x * 3, -wo.y * 3, 0.2});
  ASSERT_LE(dot(wo, h), 0);
  EXPECT_EQ(vndf_pdf(wo, h, 0.5), 0.0);
  EXPECT_EQ(vndf_pdf(wo, {0, 0, -1}, 0.5), 0.0);
}

TEST(Vndf, PdfMatchesReferenceAndDirectionJacobian) {
  Rng rng(8, 0);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 wo = view_at(1.5 * rng.uniform());
    const double a = 0.02 + rng.uniform();
    const VndfSample s = vndf_sample_raw(wo, a, rng.uniform2());
    const double ph = ref_pdf(wo, s.half, a);
    EXPECT_NEAR(vndf_pdf(wo, s.half, a), ph, 1e-9 * (1 + ph));
    EXPECT_NEAR(vndf_pdf_direction(wo, s.omega_i, a), ph / (4 * dot(wo, s.half)),
                1e-7 * (1 + ph));
  }
}

// E[g/p] over raw samples equals the integral of g over the support of p.
TEST(Vndf, MonteCarloConsistency) {
  const double a = 0.5;
  const int n = 1000000;
  struct Case {
    Vec3 wo;
    bool weighted;
  };
  for (const Case& c : {Case{{0, 0, 1}, false}, Case{view_at(0.9), true}}) {
    auto g = [&](const Vec3& h) {
      return c.weighted ? h.z * std::max(0.0, dot(c.wo, h)) : h.z;
    };
    const double quad = hemisphere_integral(
        [&](const Vec3& h) { return dot(c.wo, h) > 0 ? g(h) : 0.0; }, 512);
    Rng rng(9, c.weighted ? 1 : 0);
    double sum = 0;
    for (int i = 0; i < n; ++i) {
      const VndfSample s = vndf_sample_raw(c.wo, a, rng.uniform2());
      sum += g(s.half) / vndf_pdf(c.wo, s.half, a);
    }
    EXPECT_NEAR(sum / n, quad, 0.01 * quad);
    if (!c.weighted) {
      EXPECT_NEAR(quad, pi, 1e-3);
    }
  }
}

TEST(EstimatorWeight, Examples) {
  const Vec3 n{0, 0, 1};
  EXPECT_NEAR(estimator_weight(n, n, n, {0.0, 1.0}), 1.0, 1e-15);
  EXPECT_NEAR(estimator_weight(n, n, n, {1e-4, 1.0}), 1.0, 1e-12);
  EXPECT_EQ(estimator_weight(n, n, n, {0.3, 0.0}), 0.0);
}

TEST(EstimatorWeight, BoundedAndEqualsFresnelTimesMasking) {
  Rng rng(10, 0);
  for (int i = 0; i < 100000; ++i) {
    const Vec3 wo = view_at(1.55 * rng.uniform());
    const BrdfParams p{0.001 + rng.uniform(), rng.uniform()};
    const VndfSample s = vndf_sample(wo, p.roughness_alpha, rng);
    const double w = estimator_weight(wo, s.omega_i, s.half, p);
    ASSERT_LE(w, 1.0);
    ASSERT_GE(w, 0.0);
    if (i % 10 == 0) {
      const double r = ref_f(dot(s.omega_i, s.half), p.fresnel_f0) *
                       ref_g1(s.omega_i.z, p.roughness_alpha);
      EXPECT_NEAR(w, r, 1e-12);
    }
  }
}

// With F = 1, the weight averaged over visible-normal samples reproduces the
// cosine-weighted BRDF integral.
TEST(EstimatorWeight, WhiteFurnace) {
  const int n = 400000;
  for (double a : {0.1, 0.5, 0.9}) {
    for (double view_theta : {0.2, 0.8, 1.3}) {
      const Vec3 wo = view_at(view_theta);
      const double albedo = hemisphere_integral(
          [&](const Vec3& wi) { return ref_brdf(wo, wi, a, 1.0) * wi.z; }, 512);
      const double acceptance = hemisphere_integral(
          [&](const Vec3& wi) { return vndf_pdf_direction(wo, wi, a); }, 512);
      Rng rng(11, static_cast<std::uint64_t>(a * 10 + view_theta * 100));
      double raw = 0, rejected = 0;
      for (int i = 0; i < n; ++i) {
        const VndfSample s = vndf_sample_raw(wo, a, rng.uniform2());
        if (s.omega_i.z > 0) raw += estimator_weight(wo, s.omega_i, s.half, {a, 1.0});
        const VndfSample r = vndf_sample(wo, a, rng);
        rejected += estimator_weight(wo, r.omega_i, r.half, {a, 1.0});
      }
      EXPECT_NEAR(raw / n, albedo, 0.02 * albedo) << "alpha " << a << " view " << view_theta;
      // Redrawing rejected samples renormalizes by the acceptance probability.
      EXPECT_NEAR(rejected / n, albedo / acceptance, 0.02 * albedo / acceptance);
    }
  }
}
