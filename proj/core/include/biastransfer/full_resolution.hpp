#pragma once

#include <functional>

#include "biastransfer/imaging.hpp"
#include "biastransfer/networks.hpp"

namespace bt {

/// Maps a symmetric-range base image to a translated one of equal shape.
using BaseTransform = std::function<Image(const Image&)>;

/// Decomposes img (square, side = base_side * 2^k) into a Laplacian pyramid,
/// translates the symmetric-range base and collapses the pyramid with the
/// translated base. The output has the input's shape and range.
Image transform_full_resolution(const BaseTransform& base_transform, const Image& img, int base_side);

/// Same with a generator at its model resolution; target_domain is passed
/// to conditional generators.
Image transform_full_resolution(const Generator& generator, const Image& img, int target_domain = -1);

}  // namespace bt
