#include <gtest/gtest.h>

#include <cmath>

#include "fra/benchmark.hpp"
#include "fra/defenses.hpp"
#include "oracles.hpp"

using namespace fra;

namespace {

double high_band_energy(const Image& img) {
  double e = 0.0;
  for (std::size_t c = 0; c < img.channels(); ++c) {
    const Matrix spec = dct2(img.plane(c));
    for (std::size_t u = 0; u < spec.rows(); ++u)
      for (std::size_t v = 0; v < spec.cols(); ++v)
        if (radial_distance(u, v, spec.rows(), spec.cols()) > 0.5) e += spec(u, v) * spec(u, v);
  }
  return e;
}

}  // namespace

TEST(Defense, DefaultsMatchDocumentedValues) {
  const DefenseSpec d;
  EXPECT_EQ(d.quality, 75);
  EXPECT_EQ(d.kernel, 5u);
  EXPECT_EQ(d.sigma, 0.5);
  EXPECT_EQ(d.ratio, 0.9);
}

TEST(Defense, GaussianKeepsConstantImage) {
  const Image img(20, 13, 3, 0.37);
  const Image out = defend(img, DefenseSpec::gaussian());
  for (double v : out.data()) EXPECT_NEAR(v, 0.37, 1e-15);
}

TEST(Defense, GaussianKernelSumsToOne) {
  for (std::size_t k : {1u, 3u, 5u, 9u})
    for (double s : {0.3, 0.5, 2.0}) {
      const Matrix g = gaussian_kernel(k, s);
      double sum = 0.0;
      for (double v : g.data()) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Defense, CenterCropFullRatioIsIdentity) {
  const Image img = oracle::random_image(3, 17, 24, 3);
  const Image out = defend(img, DefenseSpec::center_crop(1.0));
  EXPECT_LT(max_abs_diff(out.data(), img.data()), 1e-10);
}

TEST(Defense, CenterCropSamplesCentralWindow) {
  // ratio 0.5 on 8x8: window rows/cols 2..5, output pixel 0 maps to window coord clamp(-0.25) = 0
  Image img(8, 8, 1);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) img(y, x, 0) = 0.1 * static_cast<double>(x);
  const Image out = defend(img, DefenseSpec::center_crop(0.5));
  EXPECT_NEAR(out(0, 0, 0), 0.2, 1e-15);
  EXPECT_NEAR(out(0, 7, 0), 0.5, 1e-15);
  // dst 3 -> (3.5 * 4 / 8) - 0.5 = 1.25 -> 0.2 + 0.125
  EXPECT_NEAR(out(4, 3, 0), 0.325, 1e-15);
}

TEST(Defense, JpegOnFlatMidGrayStaysWithinOneDcStep) {
  const Image img(16, 24, 3, 0.5);
  const Image out = defend(img, DefenseSpec::jpeg(75));
  const int q_dc = scaled_quant_table(75)[0];
  EXPECT_EQ(q_dc, 8);
  // a DC step of q changes every pixel of the block by q / 8 levels
  for (double v : out.data()) EXPECT_LE(std::abs(v - 0.5), q_dc / 8.0 / 255.0 + 1e-12);
}

TEST(Defense, QuantTableScaling) {
  const auto t50 = scaled_quant_table(50);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(t50[i], kJpegLuminanceTable[i]);
  const auto t100 = scaled_quant_table(100);
  for (int v : t100) EXPECT_EQ(v, 1);
  const auto t75 = scaled_quant_table(75);
  EXPECT_EQ(t75[1], 6);   // (11 * 50 + 50) / 100
  EXPECT_EQ(t75[63], 50);  // (99 * 50 + 50) / 100
  EXPECT_EQ(scaled_quant_table(10)[0], 80);
}

TEST(Defense, JpegHandlesNonMultipleOfEightSizes) {
  const Image img = oracle::random_image(5, 13, 11, 3);
  const Image out = defend(img, DefenseSpec::jpeg());
  EXPECT_TRUE(out.same_shape(img));
  EXPECT_LT(max_abs_diff(out.data(), img.data()), 0.5);
}

TEST(Defense, RejectsInvalidSpecs) {
  const Image img(8, 8, 3, 0.5);
  EXPECT_THROW(defend(img, DefenseSpec::center_crop(0.0)), DomainError);
  EXPECT_THROW(defend(img, DefenseSpec::center_crop(1.2)), DomainError);
  EXPECT_THROW(defend(img, DefenseSpec::gaussian(4, 0.5)), DomainError);
  EXPECT_THROW(defend(img, DefenseSpec::gaussian(5, 0.0)), DomainError);
  EXPECT_THROW(defend(img, DefenseSpec::jpeg(0)), DomainError);
  EXPECT_THROW(parse_defense_kind("median"), DomainError);
}

TEST(Defense, ShapeAndRangeForEveryKind) {
  for (int seed = 0; seed < 10; ++seed) {
    const Image img = oracle::random_image(100 + seed, 32, 32, 3);
    for (const auto& spec : {DefenseSpec::jpeg(), DefenseSpec::gaussian(), DefenseSpec::center_crop(),
                             DefenseSpec::jpeg(10), DefenseSpec::center_crop(0.3)}) {
      const Image out = defend(img, spec);
      ASSERT_TRUE(out.same_shape(img)) << spec.label();
      for (double v : out.data()) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
      }
    }
  }
}

TEST(Defense, GaussianDoesNotRaiseHighBandEnergy) {
  for (int seed = 0; seed < 20; ++seed) {
    const Image img = seed % 2 ? oracle::random_image(200 + seed, 32, 32, 3) : synthetic_image(300 + seed);
    const Image out = defend(img, DefenseSpec::gaussian());
    EXPECT_LE(high_band_energy(out), high_band_energy(img)) << "seed " << seed;
  }
}
