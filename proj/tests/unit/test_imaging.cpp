#include <gtest/gtest.h>

#include <limits>

#include "biastransfer/errors.hpp"
#include "biastransfer/image_io.hpp"
#include "biastransfer/imaging.hpp"
#include "test_support.hpp"

using namespace bt;
using bt::testing::max_abs_diff;
using bt::testing::random_image;

namespace {

int reflect101(int i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

// Full 5x5 binomial kernel applied directly (no separability).
double filtered(const Image& img, int y, int x, int c) {
  static const double k[5] = {1, 4, 6, 4, 1};
  double s = 0.0;
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -2; dx <= 2; ++dx) {
      s += k[dy + 2] * k[dx + 2] *
           img.at(reflect101(y + dy, img.height()), reflect101(x + dx, img.width()), c);
    }
  }
  return s / 256.0;
}

Image halve_oracle(const Image& img) {
  Image out(img.height() / 2, img.width() / 2, img.channels(), img.range());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x)
        out.at(y, x, c) = static_cast<float>(filtered(img, 2 * y, 2 * x, c));
  return out;
}

Image expand_oracle(const Image& img) {
  Image up(img.height() * 2, img.width() * 2, img.channels(), img.range(), 0.0f);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) up.at(2 * y, 2 * x, c) = img.at(y, x, c);
  Image out(up.height(), up.width(), up.channels(), up.range());
  for (int c = 0; c < up.channels(); ++c)
    for (int y = 0; y < up.height(); ++y)
      for (int x = 0; x < up.width(); ++x)
        out.at(y, x, c) = static_cast<float>(4.0 * filtered(up, y, x, c));
  return out;
}

}  // namespace

TEST(Image, ValidateEnforcesInvariants) {
  EXPECT_NO_THROW(Image(8, 8, 3).validate());
  EXPECT_THROW(Image(4, 8, 3).validate(), DimensionError);
  EXPECT_THROW(Image(8, 8, 2).validate(), ChannelError);
  Image nan(8, 8, 1);
  nan.at(0, 0, 0) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(nan.validate(), NumericError);
  Image over(8, 8, 1);
  over.at(3, 3, 0) = 1.01f;
  EXPECT_THROW(over.validate(), NumericError);
  Image sym(8, 8, 1, Range::symmetric, -1.0f);
  EXPECT_NO_THROW(sym.validate());
}

TEST(ConvertRange, EndpointsAndMidpoint) {
  Image img(8, 8, 1);
  img.at(0, 0, 0) = 0.5f;
  img.at(0, 1, 0) = 0.0f;
  img.at(0, 2, 0) = 1.0f;
  const Image s = convert_range(img, Range::symmetric);
  EXPECT_EQ(s.range(), Range::symmetric);
  EXPECT_FLOAT_EQ(s.at(0, 0, 0), 0.0f);
  EXPECT_FLOAT_EQ(s.at(0, 1, 0), -1.0f);
  EXPECT_FLOAT_EQ(s.at(0, 2, 0), 1.0f);
}

TEST(ConvertRange, RoundTripIsIdentity) {
  const Image img = random_image(32, 24, 3, 5);
  const Image back = convert_range(convert_range(img, Range::symmetric), Range::unit);
  EXPECT_LE(max_abs_diff(img, back), 1e-7);
  EXPECT_EQ(max_abs_diff(convert_range(img, Range::unit), img), 0.0);
}

TEST(GaussianHalve, ConstantStaysConstant) {
  const Image out = gaussian_halve(Image(24, 16, 3, Range::unit, 0.37f));
  ASSERT_EQ(out.height(), 12);
  ASSERT_EQ(out.width(), 8);
  for (float v : out.values()) EXPECT_NEAR(v, 0.37f, 1e-6);
}

TEST(GaussianHalve, ImpulseMatchesDirectConvolution) {
  Image img(8, 8, 1);
  img.at(0, 0, 0) = 1.0f;
  const Image out = gaussian_halve(img);
  const Image expected = halve_oracle(img);
  ASSERT_EQ(out.height(), 4);
  EXPECT_LE(max_abs_diff(out, expected), 1e-7);
  // Reflect-101 keeps the impulse at the corner: 6 * 6 / 256.
  EXPECT_NEAR(out.at(0, 0, 0), 36.0 / 256.0, 1e-7);
}

TEST(GaussianHalve, RandomImageMatchesDirectConvolution) {
  const Image img = random_image(20, 12, 3, 17);
  EXPECT_LE(max_abs_diff(gaussian_halve(img), halve_oracle(img)), 1e-6);
}

TEST(GaussianHalve, ShapeContractAndOddSides) {
  const Image out = gaussian_halve(Image(512, 512, 3));
  EXPECT_EQ(out.height(), 256);
  EXPECT_EQ(out.width(), 256);
  EXPECT_THROW(gaussian_halve(Image(9, 8, 1)), DimensionError);
}

TEST(GaussianHalve, PreservesMeanIntensity) {
  for (int side : {32, 64, 128}) {
    const Image img = random_image(side, side, 3, static_cast<std::uint64_t>(side));
    const Image out = gaussian_halve(img);
    double a = 0, b = 0;
    for (float v : img.values()) a += v;
    for (float v : out.values()) b += v;
    EXPECT_NEAR(a / img.size(), b / out.size(), 1e-3);
  }
}

TEST(PyramidExpand, MatchesZeroInsertionOracle) {
  const Image img = random_image(8, 12, 2 + 1, 23);
  EXPECT_LE(max_abs_diff(pyramid_expand(img), expand_oracle(img)), 1e-6);
}

TEST(Pyramid, LevelCountsAndShapes) {
  const auto p1024 = build_pyramid(Image(1024, 1024, 3), 256);
  EXPECT_EQ(p1024.levels(), 2);
  EXPECT_EQ(p1024.base.height(), 256);
  EXPECT_EQ(p1024.bands[0].height(), 1024);
  EXPECT_EQ(p1024.bands[1].height(), 512);

  const auto p2048 = build_pyramid(Image(2048, 2048, 1), 256);
  EXPECT_EQ(p2048.levels(), 3);

  const Image img = random_image(256, 256, 3, 1);
  const auto p256 = build_pyramid(img, 256);
  EXPECT_EQ(p256.levels(), 0);
  EXPECT_EQ(max_abs_diff(p256.base, img), 0.0);
}

TEST(Pyramid, RejectsNonSquareAndNonPowerOfTwo) {
  EXPECT_THROW(build_pyramid(Image(512, 256, 3), 256), DimensionError);
  EXPECT_THROW(build_pyramid(Image(768, 768, 3), 256), DimensionError);
  EXPECT_EQ(pyramid_depth(1024, 256), 2);
  EXPECT_EQ(pyramid_depth(768, 256), -1);
}

TEST(Pyramid, BandsAreLevelMinusExpandedNextLevel) {
  const Image img = random_image(64, 64, 1, 8);
  const auto p = build_pyramid(img, 16);
  const Image l1 = gaussian_halve(img);
  const Image band0 = subtract(img, pyramid_expand(l1));
  EXPECT_LE(max_abs_diff(p.bands[0], band0), 1e-6);
}

TEST(Pyramid, RoundTripWithOwnBase) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Image img = random_image(128, 128, 3, seed);
    const auto p = build_pyramid(img, 32);
    EXPECT_LE(max_abs_diff(collapse_pyramid(p, p.base), img), 1e-5);
  }
}

TEST(Pyramid, ConstantShiftOfBaseShiftsOutput) {
  Image img = random_image(64, 64, 3, 4);
  for (float& v : img.values()) v = 0.2f + 0.6f * v;  // headroom for +0.1
  const auto p = build_pyramid(img, 16);
  Image shifted = p.base;
  for (float& v : shifted.values()) v += 0.1f;
  const Image out = collapse_pyramid(p, shifted);
  for (std::size_t i = 0; i < img.size(); ++i) {
    EXPECT_NEAR(out.values()[i], img.values()[i] + 0.1f, 1e-5);
  }
}

TEST(Pyramid, ZeroBandsGiveUpsampleChain) {
  Image base = random_image(8, 8, 3, 12);
  for (float& v : base.values()) v = 0.25f + 0.5f * v;
  LaplacianPyramid p;
  p.base = base;
  p.bands = {Image(32, 32, 3, Range::unit, 0.0f), Image(16, 16, 3, Range::unit, 0.0f)};
  const Image expected = expand_oracle(expand_oracle(base));
  EXPECT_LE(max_abs_diff(collapse_pyramid(p, base), clip_to_range(expected)), 1e-6);
}

TEST(Pyramid, CollapseRejectsShapeMismatch) {
  const auto p = build_pyramid(random_image(64, 64, 3, 2), 16);
  EXPECT_THROW(collapse_pyramid(p, Image(8, 8, 3)), DimensionError);
}

TEST(Pyramid, CollapseClipsOnlyTheOutput) {
  const auto p = build_pyramid(random_image(32, 32, 1, 3), 8);
  Image bright = p.base;
  for (float& v : bright.values()) v += 5.0f;
  const Image out = collapse_pyramid(p, bright);
  for (float v : out.values()) EXPECT_EQ(v, 1.0f);
}

TEST(Pyramid, Deterministic) {
  const Image img = random_image(128, 128, 3, 99);
  const auto a = build_pyramid(img, 32);
  const auto b = build_pyramid(img, 32);
  const Image ca = collapse_pyramid(a, a.base), cb = collapse_pyramid(b, b.base);
  EXPECT_TRUE(std::equal(ca.values().begin(), ca.values().end(), cb.values().begin()));
}

TEST(ImageIo, SixteenBitRoundTrip) {
  bt::testing::TempDir dir("io");
  const Image img = random_image(16, 16, 3, 6);
  for (const char* name : {"a.png", "a.tif"}) {
    write_image(dir.path() / name, img, BitDepth::sixteen);
    const Image back = read_image(dir.path() / name);
    ASSERT_TRUE(back.same_shape(img));
    EXPECT_LE(max_abs_diff(back, img), 0.5 / 65535.0 + 1e-7) << name;
  }
  write_image(dir.path() / "b.png", img, BitDepth::eight);
  EXPECT_LE(max_abs_diff(read_image(dir.path() / "b.png"), img), 0.5 / 255.0 + 1e-7);
}

TEST(ImageIo, MaskRoundTripAndMissingFile) {
  bt::testing::TempDir dir("mask");
  SegMask m(9, 11);
  m.at(2, 3) = 7;
  m.at(8, 10) = 300;
  write_mask(dir.path() / "m.png", m);
  const SegMask back = read_mask(dir.path() / "m.png");
  EXPECT_EQ(back.at(2, 3), 7);
  EXPECT_EQ(back.at(8, 10), 300);
  EXPECT_THROW(read_image(dir.path() / "missing.png"), IoError);
}
