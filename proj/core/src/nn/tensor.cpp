#include "biastransfer/nn/tensor.hpp"

#include <algorithm>
#include <numeric>

#include "biastransfer/errors.hpp"

namespace bt::nn {

Tensor::Tensor(int channels, int height, int width, float fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 1 || height < 1 || width < 1) {
    throw DimensionError("tensor dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& o) {
  if (!same_shape(o)) {
    throw DimensionError("tensor add: " + shape_string() + " vs " + o.shape_string());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(float s) {
  for (float& v : data_) v *= s;
  return *this;
}

Tensor Tensor::from_image(const Image& img) {
  Tensor t(img.channels(), img.height(), img.width());
  auto v = img.values();
  std::copy(v.begin(), v.end(), t.data_.begin());
  return t;
}

Image Tensor::to_image(Range range) const {
  Image img(height_, width_, channels_, range);
  std::copy(data_.begin(), data_.end(), img.values().begin());
  return img;
}

std::string Tensor::shape_string() const {
  return std::to_string(channels_) + "x" + std::to_string(height_) + "x" + std::to_string(width_);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw DimensionError("concat: spatial mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  Tensor out(a.channels() + b.channels(), a.height(), a.width());
  std::copy(a.values().begin(), a.values().end(), out.data());
  std::copy(b.values().begin(), b.values().end(), out.data() + a.size());
  return out;
}

Tensor slice_channels(const Tensor& t, int begin, int count) {
  if (begin < 0 || count < 1 || begin + count > t.channels()) {
    throw DimensionError("slice_channels out of range");
  }
  Tensor out(count, t.height(), t.width());
  const auto offset = static_cast<std::size_t>(begin) * t.plane_size();
  std::copy_n(t.data() + offset, out.size(), out.data());
  return out;
}

Parameter::Parameter(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
  const std::size_t count =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                      [](std::size_t acc, int d) { return acc * static_cast<std::size_t>(d); });
  value.assign(count, 0.0f);
  grad.assign(count, 0.0f);
  adam_m.assign(count, 0.0f);
  adam_v.assign(count, 0.0f);
}

void Parameter::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }

void zero_grad(const ParameterRefs& params) {
  for (auto* p : params) p->zero_grad();
}

void set_requires_grad(const ParameterRefs& params, bool enabled) {
  for (auto* p : params) p->requires_grad = enabled;
}

std::size_t count_parameters(const ParameterRefs& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->size();
  return n;
}

}  // namespace bt::nn
