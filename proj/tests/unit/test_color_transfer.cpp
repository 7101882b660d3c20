#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "biastransfer/color_transfer.hpp"
#include "biastransfer/errors.hpp"
#include "test_support.hpp"

using namespace bt;
using bt::testing::max_abs_diff;
using bt::testing::random_image;

namespace {

// Reinhard RGB -> LMS, log10, then the orthogonal l-alpha-beta rotation,
// evaluated element by element.
std::array<double, 3> lab_oracle(double r, double g, double b) {
  const double l = 0.3811 * r + 0.5783 * g + 0.0402 * b;
  const double m = 0.1967 * r + 0.7244 * g + 0.0782 * b;
  const double s = 0.0241 * r + 0.1288 * g + 0.8444 * b;
  const double L = std::log10(l), M = std::log10(m), S = std::log10(s);
  return {(L + M + S) / std::sqrt(3.0), (L + M - 2 * S) / std::sqrt(6.0),
          (L - M) / std::sqrt(2.0)};
}

Image gray_ramp(int side) {
  Image img(side, side, 3);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = 0.1f + 0.6f * (x + y) / (2.0f * side);
  return img;
}

double channel_mean(const Image& img, int c) {
  double s = 0;
  for (float v : img.plane(c)) s += v;
  return s / img.plane_size();
}

}  // namespace

TEST(Decorrelated, GrayIsAchromatic) {
  const Image lab = rgb_to_decorrelated(Image(8, 8, 3, Range::unit, 0.5f));
  EXPECT_NEAR(lab.at(0, 0, 1), 0.0, 1e-3);
  EXPECT_NEAR(lab.at(0, 0, 2), 0.0, 1e-3);
}

TEST(Decorrelated, PureRedMatchesMatrixChain) {
  Image img(8, 8, 3, Range::unit, 0.0f);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) img.at(y, x, 0) = 1.0f;
  const Image lab = rgb_to_decorrelated(img);
  const auto expected = lab_oracle(1.0, 0.0, 0.0);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(lab.at(4, 4, c), expected[c], 1e-5);
}

TEST(Decorrelated, RoundTrip) {
  Image img = random_image(32, 32, 3, 3);
  for (float& v : img.values()) v = 0.01f + 0.98f * v;
  EXPECT_LE(max_abs_diff(decorrelated_to_rgb(rgb_to_decorrelated(img)), img), 1e-4);
}

TEST(Decorrelated, RejectsSingleChannel) {
  EXPECT_THROW(rgb_to_decorrelated(Image(8, 8, 1)), ChannelError);
}

TEST(HistogramMatch, SelfMatchIsIdentity) {
  const Image img = random_image(16, 16, 1, 9);
  const auto out = histogram_match_channel(img.plane(0), img.plane(0));
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], img.plane(0)[i], 1e-6);
}

TEST(HistogramMatch, ConstantSourceMapsToReferenceMedian) {
  const std::vector<float> src(37, 0.4f);
  for (std::size_t m : {std::size_t{9}, std::size_t{10}}) {
    std::vector<float> ref(m);
    for (std::size_t i = 0; i < m; ++i) ref[i] = static_cast<float>((i * 7) % m) * 0.1f;
    std::vector<float> sorted = ref;
    std::sort(sorted.begin(), sorted.end());
    const double median =
        m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + static_cast<double>(sorted[m / 2]));
    for (float v : histogram_match_channel(src, ref)) EXPECT_NEAR(v, median, 1e-6);
  }
}

TEST(HistogramMatch, UniformOntoUniformIsAffine) {
  const int n = 2000;
  Rng rng(4);
  std::vector<float> src(n), ref(n);
  for (int i = 0; i < n; ++i) {
    src[i] = static_cast<float>(rng.uniform());
    ref[i] = static_cast<float>(0.2 + 0.5 * (i + 0.5) / n);
  }
  const auto out = histogram_match_channel(src, ref);
  // Closed-form composition: F_ref^-1(F_src(s)) = 0.2 + 0.5 * s, with the
  // empirical src CDF deviating from s by the sampling error.
  std::vector<float> sorted = src;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < n; ++i) {
    const auto rank = std::lower_bound(sorted.begin(), sorted.end(), src[i]) - sorted.begin();
    const double expected = 0.2 + 0.5 * (rank + 0.5) / n;
    EXPECT_LE(std::abs(out[i] - expected), 2.0 / n);
  }
}

TEST(HistogramMatch, PreservesRankOrder) {
  const Image a = random_image(20, 20, 1, 1), b = random_image(15, 15, 1, 2);
  std::vector<float> src(a.plane(0).begin(), a.plane(0).end());
  for (std::size_t i = 0; i < src.size(); i += 7) src[i] = 0.5f;  // ties
  const auto out = histogram_match_channel(src, b.plane(0));
  for (std::size_t i = 0; i < src.size(); ++i)
    for (std::size_t j = 0; j < src.size(); ++j)
      if (src[i] < src[j]) ASSERT_LE(out[i], out[j]);
}

TEST(HistogramMatch, OutputEcdfTracksReference) {
  // Sizes differ so the quantile interpolation is exercised.
  const int ns = 900, nr = 611;
  Rng rng(9);
  std::vector<float> src(ns), ref(nr);
  for (float& v : src) v = static_cast<float>(rng.normal());
  for (float& v : ref) v = static_cast<float>(std::pow(rng.uniform(), 3.0));
  auto out = histogram_match_channel(src, ref);
  std::sort(out.begin(), out.end());
  std::sort(ref.begin(), ref.end());
  // Two-sample KS statistic, evaluated at every sample of both sets.
  double ks = 0.0;
  auto ecdf = [](const std::vector<float>& s, float t) {
    return static_cast<double>(std::upper_bound(s.begin(), s.end(), t) - s.begin()) / s.size();
  };
  for (const auto* set : {&out, &ref})
    for (float t : *set) ks = std::max(ks, std::abs(ecdf(out, t) - ecdf(ref, t)));
  EXPECT_LE(ks, 2.0 / std::min(ns, nr) + 1e-3);
}

TEST(ColorTransfer, SelfTransferIsIdentity) {
  Image img = random_image(32, 32, 3, 11);
  for (float& v : img.values()) v = 0.05f + 0.9f * v;
  EXPECT_LE(max_abs_diff(color_transfer(img, img), img), 1e-3);
}

TEST(ColorTransfer, AcquiresRedCast) {
  const Image src = gray_ramp(64);
  Image ref = src;
  for (float& v : ref.plane(0)) v = std::min(1.0f, v + 0.2f);
  const Image out = color_transfer(src, ref);
  EXPECT_GT(channel_mean(out, 0), channel_mean(src, 0) + 0.1);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(channel_mean(out, c), channel_mean(ref, c), 0.02);
}

TEST(ColorTransfer, DeterministicAndClipped) {
  const Image src = random_image(24, 24, 3, 5), ref = random_image(24, 24, 3, 6);
  const Image a = color_transfer(src, ref), b = color_transfer(src, ref);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  for (float v : a.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(ColorTransfer, ChannelMismatch) {
  EXPECT_THROW(color_transfer(Image(8, 8, 3), Image(8, 8, 1)), ChannelError);
}

TEST(PickReference, SeededUniformChoice) {
  const std::vector<std::string> ids = {"a", "b", "c", "d"};
  EXPECT_EQ(pick_reference(ids, 3).reference_image_id, pick_reference(ids, 3).reference_image_id);
  EXPECT_EQ(pick_reference(ids, 3).rng_seed, 3u);
  std::set<std::string> seen;
  for (std::uint64_t s = 0; s < 64; ++s) seen.insert(pick_reference(ids, s).reference_image_id);
  EXPECT_EQ(seen.size(), ids.size());
  EXPECT_THROW(pick_reference({}, 1), DataError);
}
