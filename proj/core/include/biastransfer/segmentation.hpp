#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace bt {

/// Integer label image, 0 is background.
class SegMask {
 public:
  SegMask() = default;
  SegMask(int height, int width, std::int32_t fill = 0);

  int height() const { return height_; }
  int width() const { return width_; }
  std::int32_t& at(int y, int x) { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::int32_t at(int y, int x) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<std::int32_t> labels() { return labels_; }
  std::span<const std::int32_t> labels() const { return labels_; }
  bool same_shape(const SegMask& o) const { return height_ == o.height_ && width_ == o.width_; }

  /// Number of distinct non-zero labels.
  int object_count() const;
  /// Non-zero labels collapse to 1.
  SegMask binarized() const;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::int32_t> labels_;
};

/// 8-connected component labelling of the non-zero pixels; labels are
/// assigned 1..n in raster order of each component's first pixel.
SegMask label_components(const SegMask& mask);

/// 2|A n B| / (|A| + |B|) over binarized masks; both empty gives 1.
double dice_pixel(const SegMask& a, const SegMask& b);

/// Object-wise Dice: components are matched one-to-one, greedily by
/// descending IoU, and a match counts only when IoU > 0.5. Returns
/// 2 * matches / (objects_a + objects_b); both empty gives 1.
double dice_object(const SegMask& a, const SegMask& b);

}  // namespace bt
