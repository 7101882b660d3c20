#include "biastransfer/full_resolution.hpp"

#include "biastransfer/errors.hpp"

namespace bt {

Image transform_full_resolution(const BaseTransform& base_transform, const Image& img,
                                int base_side) {
  const LaplacianPyramid pyr = build_pyramid(img, base_side);
  const Image base_sym = convert_range(pyr.base, Range::symmetric);
  Image out = base_transform(base_sym);
  if (!out.same_shape(base_sym)) throw DimensionError("base transform changed the image shape");
  out.set_range(Range::symmetric);
  return collapse_pyramid(pyr, convert_range(clip_to_range(std::move(out)), pyr.base.range()));
}

Image transform_full_resolution(const Generator& generator, const Image& img, int target_domain) {
  return transform_full_resolution(
      [&](const Image& base) {
        const Tensor y = generator.forward(Tensor::from_image(base), nullptr, target_domain);
        return y.to_image(Range::symmetric);
      },
      img, generator.spec().image_size);
}

}  // namespace bt
