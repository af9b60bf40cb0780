#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "hicd/degradation.hpp"
#include "hicd/error.hpp"
#include "hicd/resample.hpp"
#include "testing.hpp"

namespace hicd {
namespace {

Image random_image(std::size_t h, std::size_t w, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  Image img(h, w, 3);
  img.pixels = testing::uniform_values(img.pixels.size(), rng, lo, hi);
  return img;
}

// Keys cubic convolution, written out from the piecewise definition.
double keys(double t) {
  const double a = -0.75;
  t = std::abs(t);
  if (t <= 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
  if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
  return 0.0;
}

// Separable bicubic with half-pixel centers and clamped borders, single channel.
double bicubic_probe(const std::vector<double>& src, std::size_t h, std::size_t w, std::size_t oh, std::size_t ow,
                     std::size_t oy, std::size_t ox) {
  const double sy = (static_cast<double>(oy) + 0.5) * static_cast<double>(h) / static_cast<double>(oh) - 0.5;
  const double sx = (static_cast<double>(ox) + 0.5) * static_cast<double>(w) / static_cast<double>(ow) - 0.5;
  const auto fy = static_cast<long>(std::floor(sy)), fx = static_cast<long>(std::floor(sx));
  double v = 0.0;
  for (long i = fy - 1; i <= fy + 2; ++i) {
    for (long j = fx - 1; j <= fx + 2; ++j) {
      const long ci = std::clamp(i, 0L, static_cast<long>(h) - 1), cj = std::clamp(j, 0L, static_cast<long>(w) - 1);
      v += keys(sy - static_cast<double>(i)) * keys(sx - static_cast<double>(j)) * src[ci * w + cj];
    }
  }
  return v;
}

TEST(Resample, ReflectIndexMirrorsWithoutRepeatingEdges) {
  EXPECT_EQ(reflect_index(-1, 5), 1);
  EXPECT_EQ(reflect_index(-2, 5), 2);
  EXPECT_EQ(reflect_index(5, 5), 3);
  EXPECT_EQ(reflect_index(6, 5), 2);
  EXPECT_EQ(reflect_index(0, 1), 0);
  for (std::ptrdiff_t i = -20; i < 20; ++i) {
    const auto r = reflect_index(i, 4);
    EXPECT_GE(r, 0);
    EXPECT_LT(r, 4);
  }
}

TEST(Resample, TablesAreIdentityAtEqualSize) {
  for (auto interp : {Interp::nearest, Interp::bilinear, Interp::bicubic}) {
    const auto table = make_resample_table(7, 7, interp);
    for (std::size_t i = 0; i < 7; ++i) {
      ASSERT_EQ(table[i].index.size(), 1u);
      EXPECT_EQ(table[i].index[0], i);
      EXPECT_EQ(table[i].weight[0], 1.0);
    }
  }
}

TEST(Resample, WeightsSumToOne) {
  for (auto interp : {Interp::nearest, Interp::bilinear, Interp::bicubic}) {
    for (auto [in, out] : {std::pair{5, 13}, std::pair{16, 2}, std::pair{3, 7}}) {
      for (const auto& taps : make_resample_table(in, out, interp)) {
        EXPECT_NEAR(std::accumulate(taps.weight.begin(), taps.weight.end(), 0.0), 1.0, 1e-14);
      }
    }
  }
}

TEST(Resample, AdjointMatchesForwardMap) {
  std::mt19937_64 rng(4);
  for (auto interp : {Interp::nearest, Interp::bilinear, Interp::bicubic}) {
    const auto x = testing::uniform_values(5 * 6 * 2, rng);
    const auto y = testing::uniform_values(9 * 4 * 2, rng);
    std::vector<double> ax(y.size()), aty(x.size(), 0.0);
    resize_hwc(x, 1, 5, 6, 2, ax, 9, 4, interp);
    resize_hwc_adjoint(y, 1, 5, 6, 2, aty, 9, 4, interp);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += ax[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * aty[i];
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Kernel, EvenSizeIsParameterError) {
  EXPECT_THROW(make_kernel(KernelKind::isotropic, 8, 1.0), ParameterError);
  EXPECT_THROW(make_kernel(KernelKind::isotropic, 7, 0.0), ParameterError);
}

TEST(Kernel, TinySigmaIsADelta) {
  const auto k = make_kernel(KernelKind::isotropic, 7, 1e-6);
  EXPECT_GT(k.weights[24], 1.0 - 1e-9);
  for (std::size_t i = 0; i < 49; ++i)
    if (i != 24) EXPECT_LT(k.weights[i], 1e-12);
}

TEST(Kernel, IsotropicHasFourFoldSymmetry) {
  const auto k = make_kernel(KernelKind::isotropic, 7, 1.0);
  EXPECT_EQ(k.sigma_x, k.sigma_y);
  const double center = k.weights[24];
  EXPECT_EQ(center, *std::max_element(k.weights.begin(), k.weights.end()));
  for (std::size_t r = 0; r < 7; ++r) {
    for (std::size_t c = 0; c < 7; ++c) {
      const double w = k.weights[r * 7 + c];
      EXPECT_NEAR(w, k.weights[c * 7 + r], 1e-10);
      EXPECT_NEAR(w, k.weights[(6 - r) * 7 + c], 1e-10);
      EXPECT_NEAR(w, k.weights[r * 7 + (6 - c)], 1e-10);
    }
  }
}

TEST(Kernel, AnisotropicPrincipalAxisFollowsAngle) {
  const auto k = make_kernel(KernelKind::anisotropic, 9, 3.0, 0.6, std::numbers::pi / 4);
  double cxx = 0.0, cyy = 0.0, cxy = 0.0;
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 9; ++c) {
      const double w = k.weights[static_cast<std::size_t>(r * 9 + c)], x = c - 4, y = r - 4;
      cxx += w * x * x;
      cyy += w * y * y;
      cxy += w * x * y;
    }
  }
  const double axis = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
  EXPECT_NEAR(axis, std::numbers::pi / 4, 1e-6);
}

TEST(Degrade, IdentitySpecIsBitwiseIdentity) {
  std::mt19937_64 rng(1);
  const Image hq = random_image(12, 10, rng);
  EXPECT_EQ(degrade(hq, identity_spec()), hq);
}

TEST(Degrade, ConstantImageStaysConstantAtHalfResolution) {
  const Image hq(16, 12, 3, 0.5);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 10; ++i) {
    DegradationSpec spec = sample_spec(rng, 2);
    spec.noise_sigma = 0.0;
    const Image lq = degrade(hq, spec);
    EXPECT_EQ(lq.height, 8u);
    EXPECT_EQ(lq.width, 6u);
    for (double v : lq.pixels) EXPECT_NEAR(v, 0.5, 1e-12);
  }
}

TEST(Degrade, NearestCheckerboardKeepsTopLeftSamples) {
  Image hq(4, 4, 1);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) hq.at(y, x, 0) = static_cast<double>((y + x) % 2);
  DegradationSpec spec = identity_spec();
  spec.scale = 2;
  spec.resample = Interp::nearest;
  const Image lq = degrade(hq, spec);
  ASSERT_EQ(lq.height, 2u);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 2; ++x) EXPECT_EQ(lq.at(y, x, 0), hq.at(2 * y, 2 * x, 0));
}

TEST(Degrade, FloorsIndivisibleExtents) {
  DegradationSpec spec = identity_spec();
  spec.scale = 4;
  const Image lq = degrade(Image(10, 7, 3, 0.2), spec);
  EXPECT_EQ(lq.height, 2u);
  EXPECT_EQ(lq.width, 1u);
}

TEST(Degrade, ScaleBeyondExtentIsParameterError) {
  DegradationSpec spec = identity_spec();
  spec.scale = 8;
  EXPECT_THROW(degrade(Image(4, 16, 3), spec), ParameterError);
}

TEST(Degrade, NoiseIsAddedAtLowResolutionAndClipped) {
  std::mt19937_64 rng(3);
  const Image hq = random_image(16, 16, rng);
  DegradationSpec spec = identity_spec();
  spec.scale = 2;
  spec.noise_sigma = 0.5;
  spec.rng_seed = 77;
  const Image lq = degrade(hq, spec);
  EXPECT_EQ(lq.height, 8u);
  for (double v : lq.pixels) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  // Same seed, same noise; different seed, different noise.
  EXPECT_EQ(degrade(hq, spec), lq);
  spec.rng_seed = 78;
  EXPECT_NE(degrade(hq, spec), lq);
}

TEST(Degrade, BlurRunsBeforeDownsample) {
  // With nearest downsampling, blur-then-sample differs from sample-then-blur on a checkerboard.
  Image hq(8, 8, 1);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) hq.at(y, x, 0) = static_cast<double>((y + x) % 2);
  DegradationSpec spec = identity_spec();
  spec.kernel = make_kernel(KernelKind::isotropic, 3, 1.0);
  spec.scale = 2;
  spec.resample = Interp::nearest;
  const Image lq = degrade(hq, spec);
  const Image expected = resize_image(blur(hq, spec.kernel), 4, 4, Interp::nearest);
  EXPECT_EQ(lq, expected);
  for (double v : lq.pixels) EXPECT_LT(v, 1.0);
}

TEST(SampleSpec, DeterministicUnderSeed) {
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 20; ++i) {
    const auto sa = sample_spec(a, 4), sb = sample_spec(b, 4);
    EXPECT_EQ(sa.kernel.weights, sb.kernel.weights);
    EXPECT_EQ(sa.noise_sigma, sb.noise_sigma);
    EXPECT_EQ(sa.rng_seed, sb.rng_seed);
    EXPECT_EQ(sa.resample, sb.resample);
  }
}

TEST(SampleSpec, KernelSizesAreUniform) {
  std::mt19937_64 rng(2024);
  std::array<int, 8> counts{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_spec(rng, 4);
    ASSERT_EQ(s.kernel.size % 2, 1u);
    ASSERT_GE(s.kernel.size, 7u);
    ASSERT_LE(s.kernel.size, 21u);
    ++counts[(s.kernel.size - 7) / 2];
  }
  double chi2 = 0.0;
  const double expected = n / 8.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // Upper 1% point of chi-squared with 7 degrees of freedom.
  EXPECT_LT(chi2, 18.475);
}

TEST(SampleSpec, RangesHold) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10000; ++i) {
    const auto s = sample_spec(rng, 8);
    EXPECT_EQ(s.scale, 8u);
    EXPECT_LE(s.noise_sigma, 25.0 / 255.0);
    EXPECT_GE(s.noise_sigma, 0.0);
    if (s.kernel.kind == KernelKind::isotropic) {
      EXPECT_GE(s.kernel.sigma_x, 0.1);
      EXPECT_LE(s.kernel.sigma_x, 2.4);
    } else {
      const double longer = std::max(s.kernel.sigma_x, s.kernel.sigma_y);
      EXPECT_GE(longer, 0.5);
      EXPECT_LE(longer, 6.0);
      EXPECT_GE(s.kernel.angle, 0.0);
      EXPECT_LT(s.kernel.angle, std::numbers::pi);
    }
  }
}

TEST(DegradeProperty, KernelsAreNormalizedAndNonnegative) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100000; ++i) {
    const auto s = sample_spec(rng, 4);
    double total = 0.0;
    for (double w : s.kernel.weights) {
      ASSERT_GE(w, 0.0);
      total += w;
    }
    ASSERT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(DegradeProperty, DeterministicGivenSpec) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const Image hq = random_image(16, 16, rng);
    const auto spec = sample_spec(rng, 4);
    EXPECT_EQ(degrade(hq, spec), degrade(hq, spec));
  }
}

TEST(DegradeProperty, LinearInIntensityWithoutNoise) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 30; ++i) {
    // Mid-range, smooth-ish inputs keep bicubic overshoot away from the clip bounds.
    const Image hq = random_image(16, 16, rng, 0.4, 0.6);
    auto spec = sample_spec(rng, 2);
    spec.noise_sigma = 0.0;
    const double alpha = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
    Image scaled = hq;
    for (auto& v : scaled.pixels) v *= alpha;
    const Image a = degrade(scaled, spec), b = degrade(hq, spec);
    for (std::size_t k = 0; k < a.pixels.size(); ++k) EXPECT_NEAR(a.pixels[k], alpha * b.pixels[k], 1e-12);
  }
}

TEST(UpsampleTo, IdentityAtTargetSize) {
  std::mt19937_64 rng(8);
  const Image img = random_image(6, 5, rng);
  const Image out = upsample_to(img, 6, 5);
  for (std::size_t k = 0; k < img.pixels.size(); ++k) EXPECT_NEAR(out.pixels[k], img.pixels[k], 1e-12);
}

TEST(UpsampleTo, ConstantStaysConstant) {
  const Image out = upsample_to(Image(3, 4, 3, 0.3), 12, 16);
  for (double v : out.pixels) EXPECT_NEAR(v, 0.3, 1e-12);
}

TEST(UpsampleTo, MatchesReferenceBicubic) {
  Image ramp(2, 2, 1);
  ramp.pixels = {0.1, 0.4, 0.5, 0.8};
  const Image out = upsample_to(ramp, 4, 4);
  const std::vector<std::pair<std::size_t, std::size_t>> probes{{0, 0}, {0, 1}, {1, 1}, {1, 2},
                                                                {2, 0}, {2, 3}, {3, 2}, {3, 3}};
  for (auto [y, x] : probes) {
    const double ref = std::clamp(bicubic_probe(ramp.pixels, 2, 2, 4, 4, y, x), 0.0, 1.0);
    EXPECT_NEAR(out.at(y, x, 0), ref, 1e-9) << y << "," << x;
  }
}

TEST(UpsampleTo, RejectsBadInput) {
  EXPECT_THROW(upsample_to(Image(), 4, 4), ParameterError);
  EXPECT_THROW(upsample_to(Image(4, 4, 3), 2, 4), ParameterError);
}

TEST(DegradationJson, RoundTrips) {
  std::mt19937_64 rng(10);
  const auto spec = sample_spec(rng, 8);
  const nlohmann::json j = spec;
  const auto back = j.get<DegradationSpec>();
  EXPECT_EQ(back.kernel.kind, spec.kernel.kind);
  EXPECT_EQ(back.kernel.size, spec.kernel.size);
  EXPECT_EQ(back.kernel.weights, spec.kernel.weights);
  EXPECT_EQ(back.scale, spec.scale);
  EXPECT_EQ(back.resample, spec.resample);
  EXPECT_EQ(back.noise_sigma, spec.noise_sigma);
  EXPECT_EQ(back.rng_seed, spec.rng_seed);
}

}  // namespace
}  // namespace hicd
