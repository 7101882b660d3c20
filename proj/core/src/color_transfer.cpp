#include "biastransfer/color_transfer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "biastransfer/errors.hpp"
#include "biastransfer/rng.hpp"

namespace bt {

namespace {

const Eigen::Matrix3d& rgb_to_lms() {
  static const Eigen::Matrix3d m = (Eigen::Matrix3d() << 0.3811, 0.5783, 0.0402,  //
                                    0.1967, 0.7244, 0.0782,                       //
                                    0.0241, 0.1288, 0.8444)
                                       .finished();
  return m;
}

const Eigen::Matrix3d& lms_to_rgb() {
  static const Eigen::Matrix3d m = rgb_to_lms().inverse();
  return m;
}

const Eigen::Matrix3d& log_lms_to_lab() {
  static const Eigen::Matrix3d m = [] {
    Eigen::Matrix3d scale = Eigen::Vector3d(1.0 / std::sqrt(3.0), 1.0 / std::sqrt(6.0),
                                            1.0 / std::sqrt(2.0))
                                .asDiagonal();
    Eigen::Matrix3d mix;
    mix << 1, 1, 1,  //
        1, 1, -2,    //
        1, -1, 0;
    return Eigen::Matrix3d(scale * mix);
  }();
  return m;
}

const Eigen::Matrix3d& lab_to_log_lms() {
  static const Eigen::Matrix3d m = log_lms_to_lab().inverse();
  return m;
}

void require_rgb(const Image& img, const char* what) {
  if (img.channels() != 3) {
    throw ChannelError(std::string(what) + " requires a 3-channel image");
  }
}

}  // namespace

ColorTransferSpec pick_reference(std::span<const std::string> target_train_ids,
                                 std::uint64_t seed) {
  if (target_train_ids.empty()) throw DataError("target training split is empty");
  Rng rng(seed);
  return {target_train_ids[rng.index(target_train_ids.size())], seed};
}

Image rgb_to_decorrelated(const Image& img) {
  require_rgb(img, "rgb_to_decorrelated");
  const Image unit = convert_range(img, Range::unit);
  Image out(img.height(), img.width(), 3, Range::unit);
  const auto& a = rgb_to_lms();
  const auto& b = log_lms_to_lab();
  const std::size_t n = unit.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d rgb(unit.plane(0)[i], unit.plane(1)[i], unit.plane(2)[i]);
    Eigen::Vector3d lms = a * rgb;
    for (int k = 0; k < 3; ++k) lms[k] = std::log10(std::max(lms[k], kLogFloor));
    const Eigen::Vector3d lab = b * lms;
    for (int k = 0; k < 3; ++k) out.plane(k)[i] = static_cast<float>(lab[k]);
  }
  return out;
}

Image decorrelated_to_rgb(const Image& lab) {
  require_rgb(lab, "decorrelated_to_rgb");
  Image out(lab.height(), lab.width(), 3, Range::unit);
  const auto& a = lab_to_log_lms();
  const auto& b = lms_to_rgb();
  const std::size_t n = lab.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d v(lab.plane(0)[i], lab.plane(1)[i], lab.plane(2)[i]);
    Eigen::Vector3d lms = a * v;
    for (int k = 0; k < 3; ++k) lms[k] = std::pow(10.0, lms[k]);
    const Eigen::Vector3d rgb = b * lms;
    for (int k = 0; k < 3; ++k) out.plane(k)[i] = static_cast<float>(rgb[k]);
  }
  return out;
}

std::vector<float> histogram_match_channel(std::span<const float> src,
                                           std::span<const float> ref) {
  if (src.empty()) return {};
  if (ref.empty()) throw DataError("histogram_match_channel: empty reference");
  for (float v : src) {
    if (!std::isfinite(v)) throw NumericError("histogram_match_channel: non-finite source");
  }
  std::vector<float> sorted_ref(ref.begin(), ref.end());
  for (float v : sorted_ref) {
    if (!std::isfinite(v)) throw NumericError("histogram_match_channel: non-finite reference");
  }
  std::sort(sorted_ref.begin(), sorted_ref.end());

  const std::size_t n = src.size();
  const std::size_t m = sorted_ref.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return src[l] < src[r]; });

  // Reference quantile at probability q with linear interpolation between
  // order statistics placed at (i + 0.5) / m.
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(m) - 0.5;
    if (pos <= 0.0) return static_cast<double>(sorted_ref.front());
    if (pos >= static_cast<double>(m - 1)) return static_cast<double>(sorted_ref.back());
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double t = pos - static_cast<double>(lo);
    return (1.0 - t) * sorted_ref[lo] + t * sorted_ref[lo + 1];
  };

  std::vector<float> out(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && src[order[j + 1]] == src[order[i]]) ++j;
    // Ties share the quantile of their mid-rank.
    const double mid_rank = 0.5 * static_cast<double>(i + j);
    const auto value = static_cast<float>(quantile((mid_rank + 0.5) / static_cast<double>(n)));
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = value;
    i = j + 1;
  }
  return out;
}

Image color_transfer(const Image& src, const Image& ref) {
  require_rgb(src, "color_transfer");
  require_rgb(ref, "color_transfer");
  const Image src_lab = rgb_to_decorrelated(src);
  const Image ref_lab = rgb_to_decorrelated(ref);
  Image matched(src.height(), src.width(), 3, Range::unit);
  for (int c = 0; c < 3; ++c) {
    const auto values = histogram_match_channel(src_lab.plane(c), ref_lab.plane(c));
    std::copy(values.begin(), values.end(), matched.plane(c).begin());
  }
  return clip_to_range(decorrelated_to_rgb(matched));
}

}  // namespace bt
