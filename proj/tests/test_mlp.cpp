#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mirrorfield/error.hpp"
#include "mirrorfield/mlp.hpp"
#include "support.hpp"

using namespace mirrorfield;
using testing_support::random_unit;

namespace {

MlpArchitecture small_arch(Activation act = Activation::Softplus) {
  MlpArchitecture a;
  a.hidden_layers = 3;
  a.width = 8;
  a.skip_layer = 2;
  a.color_width = 6;
  a.hidden_activation = act;
  a.encoding.levels_position = 2;
  a.encoding.levels_direction = 1;
  return a;
}

// Independent count: every dense layer has (in + 1) * out parameters.
std::size_t count_by_hand(const MlpArchitecture& a) {
  const int p = 6 * a.encoding.levels_position + (a.encoding.include_raw ? 3 : 0);
  const int d = 6 * a.encoding.levels_direction + (a.encoding.include_raw ? 3 : 0);
  std::size_t n = 0;
  auto dense = [&](int in, int out) { n += static_cast<std::size_t>((in + 1) * out); };
  for (int l = 0; l < a.hidden_layers; ++l) {
    const bool skip = l > 0 && l == a.skip_layer;
    dense(l == 0 ? p : a.width + (skip ? p : 0), a.width);
  }
  dense(a.width, 1);
  dense(a.width, a.width);
  dense(a.width + d, a.color_width);
  dense(a.color_width, 3);
  return n;
}

FieldQuery random_query(Rng& rng) {
  return {{2 * rng.uniform() - 1, 2 * rng.uniform() - 1, 2 * rng.uniform() - 1},
          random_unit(rng)};
}

double dot_output(const FieldSample& s, const SampleAdjoint& a) {
  return a.density * s.density + dot(a.color, s.color);
}

}  // namespace

TEST(Mlp, ParameterCountMatchesLayerOracle) {
  for (int skip : {0, 1, 2, 5}) {
    for (bool raw : {true, false}) {
      MlpArchitecture a = small_arch();
      a.skip_layer = skip;
      a.encoding.include_raw = raw;
      EXPECT_EQ(a.parameter_count(), count_by_hand(a));
      EXPECT_EQ(MlpField::init(a, 1).parameters().size(), count_by_hand(a));
    }
  }
  EXPECT_EQ(MlpArchitecture{}.parameter_count(), count_by_hand(MlpArchitecture{}));
}

TEST(Mlp, InitDeterministicPerSeed) {
  const auto a = small_arch();
  const auto f1 = MlpField::init(a, 42);
  const auto f2 = MlpField::init(a, 42);
  const auto f3 = MlpField::init(a, 43);
  EXPECT_TRUE(std::equal(f1.parameters().begin(), f1.parameters().end(),
                         f2.parameters().begin()));
  EXPECT_FALSE(std::equal(f1.parameters().begin(), f1.parameters().end(),
                          f3.parameters().begin()));
}

TEST(Mlp, InitGlorotBoundsAndZeroBias) {
  const auto a = small_arch();
  const auto f = MlpField::init(a, 9);
  const int p = a.encoding.position_dim();
  const int d = a.encoding.direction_dim();
  std::vector<std::pair<int, int>> shapes{{p, 8}, {8, 8}, {8 + p, 8}, {8, 1}, {8, 8}, {8 + d, 6},
                                          {6, 3}};
  std::size_t off = 0;
  const auto params = f.parameters();
  for (auto [in, out] : shapes) {
    const double limit = std::sqrt(6.0 / (in + out));
    double max_abs = 0;
    for (int i = 0; i < in * out; ++i) max_abs = std::max(max_abs, std::abs(params[off++]));
    EXPECT_LE(max_abs, limit);
    EXPECT_GT(max_abs, 0.3 * limit);
    for (int i = 0; i < out; ++i) EXPECT_EQ(params[off++], 0.0);
  }
  EXPECT_EQ(off, params.size());
}

TEST(Mlp, InitialOutputsFiniteAndInRange) {
  const auto f = MlpField::init(MlpArchitecture{}, 5);
  Rng rng(10, 0);
  for (int i = 0; i < 1000; ++i) {
    const FieldSample s = f.query(random_query(rng));
    ASSERT_TRUE(std::isfinite(s.density));
    EXPECT_GE(s.density, 0.0);
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_GE(s.color[c], 0.0);
      EXPECT_LE(s.color[c], 1.0);
    }
  }
}

TEST(Mlp, BatchMatchesSingleAndIsDeterministic) {
  auto f = MlpField::init(small_arch(Activation::Relu), 3);
  Rng rng(11, 0);
  std::vector<FieldQuery> qs;
  for (int i = 0; i < 600; ++i) qs.push_back(random_query(rng));
  for (Precision prec : {Precision::Float64, Precision::Float32}) {
    f.set_precision(prec);
    std::vector<FieldSample> a(qs.size()), b(qs.size());
    f.query_batch(qs, a);
    f.query_batch(qs, b);
    for (std::size_t i = 0; i < qs.size(); ++i) {
      EXPECT_EQ(a[i].density, b[i].density);
      EXPECT_EQ(a[i].color.x, b[i].color.x);
      const FieldSample s = f.query(qs[i]);
      EXPECT_NEAR(s.density, a[i].density, 1e-5);
      EXPECT_NEAR(s.color.z, a[i].color.z, 1e-5);
    }
  }
}

TEST(Mlp, Float32CloseToFloat64) {
  auto f = MlpField::init(MlpArchitecture{}, 8);
  Rng rng(12, 0);
  std::vector<FieldQuery> qs;
  for (int i = 0; i < 300; ++i) qs.push_back(random_query(rng));
  std::vector<FieldSample> d(qs.size()), s(qs.size());
  f.set_precision(Precision::Float64);
  f.query_batch(qs, d);
  f.set_precision(Precision::Float32);
  f.query_batch(qs, s);
  for (std::size_t i = 0; i < qs.size(); ++i) {
    EXPECT_NEAR(s[i].density, d[i].density, 1e-4 * (1 + d[i].density));
    EXPECT_NEAR(s[i].color.y, d[i].color.y, 1e-4);
  }
}

TEST(Mlp, NonFiniteQueryThrows) {
  const auto f = MlpField::init(small_arch(), 1);
  EXPECT_THROW(f.query({{std::nan(""), 0, 0}, {0, 0, 1}}), Error);
}

TEST(MlpGradient, ZeroUpstreamGivesZeroGradient) {
  const auto f = MlpField::init(small_arch(), 2);
  Rng rng(13, 0);
  std::vector<FieldQuery> qs;
  for (int i = 0; i < 50; ++i) qs.push_back(random_query(rng));
  const std::vector<SampleAdjoint> zero(qs.size());
  const auto g = f.query_batch_with_gradients(qs, zero);
  ASSERT_EQ(g.size(), f.parameters().size());
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(MlpGradient, ShapeMismatchThrows) {
  const auto f = MlpField::init(small_arch(), 2);
  std::vector<FieldQuery> qs(3);
  std::vector<SampleAdjoint> up(2);
  EXPECT_THROW(f.query_batch_with_gradients(qs, up), Error);
  std::vector<double> short_grad(5);
  std::vector<SampleAdjoint> up3(3);
  EXPECT_THROW(f.accumulate_gradient(qs, up3, short_grad), Error);
  EXPECT_THROW(MlpField(small_arch(), std::vector<double>(7)), Error);
}

// Central differences of <upstream, output> at h = 1e-5, float64.
TEST(MlpGradient, MatchesFiniteDifferences) {
  auto f = MlpField::init(small_arch(Activation::Softplus), 21);
  f.set_precision(Precision::Float64);
  // Nonzero biases so every parameter is exercised away from init symmetry.
  std::vector<double> params(f.parameters().begin(), f.parameters().end());
  Rng rng(14, 0);
  for (double& p : params) p += 0.2 * (rng.uniform() - 0.5);
  f.set_parameters(params);

  const FieldQuery q = random_query(rng);
  const SampleAdjoint up{0.7, {-0.4, 1.3, 0.25}};
  const auto grad = f.query_batch_with_gradients(std::span(&q, 1), std::span(&up, 1));

  const double h = 1e-5;
  int checked = 0;
  double worst = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::vector<double> pp = params, pm = params;
    pp[i] += h;
    pm[i] -= h;
    f.set_parameters(pp);
    const double lp = dot_output(f.query(q), up);
    f.set_parameters(pm);
    const double lm = dot_output(f.query(q), up);
    const double fd = (lp - lm) / (2 * h);
    const double scale = std::max(std::abs(fd), std::abs(grad[i]));
    // Entries below the FD noise floor carry no relative information.
    if (scale < 1e-6) {
      EXPECT_NEAR(grad[i], fd, 1e-9);
      continue;
    }
    const double rel = std::abs(grad[i] - fd) / scale;
    worst = std::max(worst, rel);
    EXPECT_LT(rel, 1e-4) << "parameter " << i << " analytic " << grad[i] << " fd " << fd;
    ++checked;
  }
  EXPECT_GT(checked, static_cast<int>(params.size()) / 2);
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(MlpGradient, BatchGradientIsSumOfPerSample) {
  auto f = MlpField::init(small_arch(), 4);
  f.set_precision(Precision::Float64);
  Rng rng(15, 0);
  std::vector<FieldQuery> qs;
  std::vector<SampleAdjoint> up;
  for (int i = 0; i < 300; ++i) {
    qs.push_back(random_query(rng));
    up.push_back({rng.uniform() - 0.5, {rng.uniform(), rng.uniform() - 0.5, -rng.uniform()}});
  }
  const auto total = f.query_batch_with_gradients(qs, up);
  std::vector<double> sum(total.size(), 0.0);
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const auto g = f.query_batch_with_gradients(std::span(&qs[i], 1), std::span(&up[i], 1));
    for (std::size_t k = 0; k < g.size(); ++k) sum[k] += g[k];
  }
  for (std::size_t k = 0; k < total.size(); ++k) {
    EXPECT_NEAR(total[k], sum[k], 1e-10 * (1 + std::abs(sum[k])));
  }
  // Repeated calls are bit-identical.
  EXPECT_EQ(f.query_batch_with_gradients(qs, up), total);
}

TEST(MlpGradient, AccumulateAddsIntoExisting) {
  const auto f = MlpField::init(small_arch(), 4);
  Rng rng(16, 0);
  std::vector<FieldQuery> qs{random_query(rng), random_query(rng)};
  std::vector<SampleAdjoint> up{{1, {0, 1, 0}}, {0, {1, 0, 0}}};
  const auto g = f.query_batch_with_gradients(qs, up);
  std::vector<double> acc(g.size(), 1.0);
  f.accumulate_gradient(qs, up, acc);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_DOUBLE_EQ(acc[k], 1.0 + g[k]);
}

TEST(MlpCheckpoint, RoundTripIsBitExact) {
  const auto dir = std::filesystem::temp_directory_path() / "mirrorfield_test_mlp";
  std::filesystem::create_directories(dir);
  MlpArchitecture a = small_arch(Activation::Relu);
  a.encoding.include_raw = false;
  a.skip_layer = 1;
  const auto f = MlpField::init(a, 77);
  save_checkpoint(dir / "m.mfck", f);
  const auto g = load_checkpoint(dir / "m.mfck");
  EXPECT_TRUE(g.architecture() == a);
  ASSERT_EQ(g.parameters().size(), f.parameters().size());
  for (std::size_t i = 0; i < f.parameters().size(); ++i) {
    EXPECT_EQ(g.parameters()[i], f.parameters()[i]);
  }
  // A second round trip of the loaded field is byte-identical on disk.
  save_checkpoint(dir / "m2.mfck", g);
  EXPECT_EQ(std::filesystem::file_size(dir / "m.mfck"), std::filesystem::file_size(dir / "m2.mfck"));
  std::ifstream s1(dir / "m.mfck", std::ios::binary), s2(dir / "m2.mfck", std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(s1)), {});
  const std::string b2((std::istreambuf_iterator<char>(s2)), {});
  EXPECT_EQ(b1, b2);
}

TEST(MlpCheckpoint, CorruptFilesRejected) {
  const auto dir = std::filesystem::temp_directory_path() / "mirrorfield_test_mlp";
  std::filesystem::create_directories(dir);
  {
    std::ofstream o(dir / "bad.mfck", std::ios::binary);
    o << "NOPE1234";
  }
  EXPECT_THROW(load_checkpoint(dir / "bad.mfck"), Error);
  EXPECT_THROW(load_checkpoint(dir / "missing.mfck"), Error);
  const auto f = MlpField::init(small_arch(), 1);
  save_checkpoint(dir / "trunc.mfck", f);
  std::filesystem::resize_file(dir / "trunc.mfck", std::filesystem::file_size(dir / "trunc.mfck") - 4);
  EXPECT_THROW(load_checkpoint(dir / "trunc.mfck"), Error);
}

TEST(MlpArchitecture, ValidateRejectsBadShapes) {
  MlpArchitecture a = small_arch();
  a.hidden_layers = 0;
  EXPECT_THROW(a.validate(), Error);
  a = small_arch();
  a.encoding.levels_position = -1;
  EXPECT_THROW(a.validate(), Error);
  a = small_arch();
  a.encoding.levels_direction = 0;
  a.encoding.include_raw = false;
  EXPECT_THROW(a.validate(), Error);
}
