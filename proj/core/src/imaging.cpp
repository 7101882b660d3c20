#include "biastransfer/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "biastransfer/errors.hpp"

namespace bt {

namespace {

constexpr std::array<float, 5> kBinomial = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};

inline int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

std::string shape_string(const Image& img) {
  return std::to_string(img.height()) + "x" + std::to_string(img.width()) + "x" +
         std::to_string(img.channels());
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " +
                         shape_string(b));
  }
}

}  // namespace

Image::Image(int height, int width, int channels, Range range, float fill)
    : height_(height), width_(width), channels_(channels), range_(range) {
  if (height < 1 || width < 1) {
    throw DimensionError("image sides must be positive, got " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
  if (channels != 1 && channels != 3) {
    throw ChannelError("image channels must be 1 or 3, got " + std::to_string(channels));
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

void Image::validate() const {
  if (height_ < 8 || width_ < 8) {
    throw DimensionError("image sides must be >= 8, got " + shape_string(*this));
  }
  if (channels_ != 1 && channels_ != 3) {
    throw ChannelError("image channels must be 1 or 3");
  }
  const float lo = range_min(range_) - 1e-6f;
  const float hi = range_max(range_) + 1e-6f;
  for (float v : data_) {
    if (!std::isfinite(v)) throw NumericError("image contains non-finite values");
    if (v < lo || v > hi) throw NumericError("image value outside declared range");
  }
}

Image convert_range(const Image& img, Range target) {
  if (img.range() == target) return img;
  Image out = img;
  out.set_range(target);
  if (target == Range::symmetric) {
    for (float& v : out.values()) v = 2.0f * v - 1.0f;
  } else {
    for (float& v : out.values()) v = (v + 1.0f) * 0.5f;
  }
  return out;
}

Image clip_to_range(Image img) {
  const float lo = range_min(img.range());
  const float hi = range_max(img.range());
  for (float& v : img.values()) v = std::clamp(v, lo, hi);
  return img;
}

Image subtract(const Image& a, const Image& b) {
  require_same_shape(a, b, "subtract");
  Image out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return out;
}

Image add(const Image& a, const Image& b) {
  require_same_shape(a, b, "add");
  Image out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return out;
}

Image gaussian_halve(const Image& img) {
  const int h = img.height();
  const int w = img.width();
  if (h % 2 != 0 || w % 2 != 0) {
    throw DimensionError("gaussian_halve requires even sides, got " + shape_string(img));
  }
  const int oh = h / 2;
  const int ow = w / 2;
  Image out(oh, ow, img.channels(), img.range());
  std::vector<float> tmp(static_cast<std::size_t>(h) * ow);
  for (int c = 0; c < img.channels(); ++c) {
    auto src = img.plane(c);
    for (int y = 0; y < h; ++y) {
      const float* row = src.data() + static_cast<std::size_t>(y) * w;
      for (int j = 0; j < ow; ++j) {
        float acc = 0.0f;
        for (int k = 0; k < 5; ++k) acc += kBinomial[k] * row[reflect101(2 * j + k - 2, w)];
        tmp[static_cast<std::size_t>(y) * ow + j] = acc;
      }
    }
    auto dst = out.plane(c);
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        float acc = 0.0f;
        for (int k = 0; k < 5; ++k) {
          acc += kBinomial[k] * tmp[static_cast<std::size_t>(reflect101(2 * i + k - 2, h)) * ow + j];
        }
        dst[static_cast<std::size_t>(i) * ow + j] = acc;
      }
    }
  }
  return out;
}

Image pyramid_expand(const Image& img) {
  const int h = img.height();
  const int w = img.width();
  const int oh = 2 * h;
  const int ow = 2 * w;
  Image out(oh, ow, img.channels(), img.range());
  std::vector<float> tmp(static_cast<std::size_t>(h) * ow);
  for (int c = 0; c < img.channels(); ++c) {
    auto src = img.plane(c);
    // Horizontal pass over the zero-inserted row: only even taps are non-zero.
    for (int y = 0; y < h; ++y) {
      const float* row = src.data() + static_cast<std::size_t>(y) * w;
      for (int x = 0; x < ow; ++x) {
        float acc = 0.0f;
        for (int k = 0; k < 5; ++k) {
          const int m = reflect101(x + k - 2, ow);
          if ((m & 1) == 0) acc += kBinomial[k] * row[m / 2];
        }
        tmp[static_cast<std::size_t>(y) * ow + x] = 2.0f * acc;
      }
    }
    auto dst = out.plane(c);
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        float acc = 0.0f;
        for (int k = 0; k < 5; ++k) {
          const int m = reflect101(y + k - 2, oh);
          if ((m & 1) == 0) acc += kBinomial[k] * tmp[static_cast<std::size_t>(m / 2) * ow + x];
        }
        dst[static_cast<std::size_t>(y) * ow + x] = 2.0f * acc;
      }
    }
  }
  return out;
}

int pyramid_depth(int side, int base_side) {
  if (base_side < 1 || side < base_side) return -1;
  int depth = 0;
  int s = side;
  while (s > base_side) {
    if (s % 2 != 0) return -1;
    s /= 2;
    ++depth;
  }
  return s == base_side ? depth : -1;
}

LaplacianPyramid build_pyramid(const Image& img, int base_side) {
  if (img.height() != img.width()) {
    throw DimensionError("build_pyramid requires a square image, got " + shape_string(img));
  }
  const int depth = pyramid_depth(img.height(), base_side);
  if (depth < 0) {
    throw DimensionError("image side " + std::to_string(img.height()) +
                         " is not base_side * 2^k for base_side " + std::to_string(base_side));
  }
  LaplacianPyramid pyr;
  Image level = img;
  for (int k = 0; k < depth; ++k) {
    Image next = gaussian_halve(level);
    pyr.bands.push_back(subtract(level, pyramid_expand(next)));
    level = std::move(next);
  }
  pyr.base = std::move(level);
  return pyr;
}

Image collapse_pyramid(const LaplacianPyramid& pyr, const Image& replacement_base) {
  require_same_shape(pyr.base, replacement_base, "collapse_pyramid");
  if (pyr.base.range() != replacement_base.range()) {
    throw DimensionError("collapse_pyramid: replacement base has a different range tag");
  }
  Image current = replacement_base;
  for (auto it = pyr.bands.rbegin(); it != pyr.bands.rend(); ++it) {
    current = add(pyramid_expand(current), *it);
  }
  current.set_range(replacement_base.range());
  return clip_to_range(std::move(current));
}

}  // namespace bt
