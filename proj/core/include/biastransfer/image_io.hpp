#pragma once

#include <filesystem>

#include "biastransfer/imaging.hpp"
#include "biastransfer/segmentation.hpp"

namespace bt {

enum class BitDepth { eight = 8, sixteen = 16 };

/// Reads PNG or TIFF (8 or 16 bit) into a unit-range image. 16-bit samples
/// are divided by 65535. Alpha channels are dropped.
Image read_image(const std::filesystem::path& path);

/// Writes PNG or TIFF, chosen by extension. Symmetric images are converted
/// to unit range first; values are clipped and rounded.
void write_image(const std::filesystem::path& path, const Image& img,
                 BitDepth depth = BitDepth::eight);

/// Label masks are stored as single-channel 16-bit PNG.
SegMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const SegMask& mask);

/// True for extensions read_image understands (.png, .tif, .tiff).
bool is_image_file(const std::filesystem::path& path);

}  // namespace bt
