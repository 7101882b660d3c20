#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "biastransfer/imaging.hpp"

namespace bt {

/// Floor applied to LMS responses before log10.
inline constexpr double kLogFloor = 1e-6;

/// Which target-domain image serves as the single colour reference.
struct ColorTransferSpec {
  std::string reference_image_id;
  std::uint64_t rng_seed = 0;
};

/// Uniformly draws one id from the target training split.
ColorTransferSpec pick_reference(std::span<const std::string> target_train_ids,
                                 std::uint64_t seed);

/// RGB (unit range, 3 channels) to the decorrelated l-alpha-beta space:
/// RGB -> LMS, log10 with floor, fixed orthogonal decorrelation.
Image rgb_to_decorrelated(const Image& img);
/// Exact inverse of rgb_to_decorrelated up to the log floor. Output is not
/// clipped.
Image decorrelated_to_rgb(const Image& lab);

/// Rank-based quantile mapping of src onto the empirical distribution of
/// ref. Equal src values map to the same output; rank order is preserved.
std::vector<float> histogram_match_channel(std::span<const float> src,
                                           std::span<const float> ref);

/// Histogram matching of each decorrelated channel of src to ref, converted
/// back to RGB and clipped to [0,1].
Image color_transfer(const Image& src, const Image& ref);

}  // namespace bt
