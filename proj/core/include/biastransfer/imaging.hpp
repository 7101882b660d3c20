#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bt {

/// Declared value range of an image.
enum class Range {
  unit,       ///< [0, 1]
  symmetric,  ///< [-1, 1]
};

constexpr float range_min(Range r) { return r == Range::unit ? 0.0f : -1.0f; }
constexpr float range_max(Range) { return 1.0f; }

/// H x W x C float image, stored channel-planar.
///
/// Band-pass pyramid layers reuse this type and may leave the declared
/// range; validate() is the check applied at pipeline boundaries.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, Range range = Range::unit, float fill = 0.0f);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  Range range() const { return range_; }
  void set_range(Range r) { range_ = r; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }

  float& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  float at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<float> plane(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const float> plane(int c) const {
    return {data_.data() + c * plane_size(), plane_size()};
  }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  /// Throws unless the image satisfies the full invariant set: sides >= 8,
  /// channels in {1, 3}, all values finite and inside the declared range
  /// (1e-6 slack).
  void validate() const;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  Range range_ = Range::unit;
  std::vector<float> data_;
};

/// Affine map between [0,1] and [-1,1]. Converting to the current range is a
/// no-op.
Image convert_range(const Image& img, Range target);

/// Clamp every value into the declared range of the image.
Image clip_to_range(Image img);

/// Elementwise a - b and a + b; shapes must match.
Image subtract(const Image& a, const Image& b);
Image add(const Image& a, const Image& b);

/// Separable 5-tap binomial low-pass ([1,4,6,4,1]/16, reflect-101 borders)
/// followed by 2x decimation. Both sides must be even.
Image gaussian_halve(const Image& img);

/// Zero insertion to twice the size followed by the same binomial filter
/// scaled by 4. Inverse partner of gaussian_halve in the pyramid.
Image pyramid_expand(const Image& img);

/// Low-pass base plus band-pass layers, finest first.
struct LaplacianPyramid {
  Image base;
  std::vector<Image> bands;

  int levels() const { return static_cast<int>(bands.size()); }
};

/// Requires a square image whose side is base_side * 2^k.
LaplacianPyramid build_pyramid(const Image& img, int base_side);

/// Upsample-and-add every band onto replacement_base, then clip to the
/// range of the base. Clipping is applied only to the final output.
Image collapse_pyramid(const LaplacianPyramid& pyr, const Image& replacement_base);

/// Number of halvings from side to base_side, or -1 when side is not
/// base_side * 2^k.
int pyramid_depth(int side, int base_side);

}  // namespace bt
