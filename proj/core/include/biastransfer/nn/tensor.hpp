#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "biastransfer/imaging.hpp"

namespace bt::nn {

/// Single-sample activation in CHW layout. Training runs at batch size one,
/// so there is no batch axis.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, int height, int width, float fill = 0.0f);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Tensor& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  float& at(int c, int y, int x) { return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x]; }
  float at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  void fill(float v);
  Tensor& operator+=(const Tensor& o);
  Tensor& operator*=(float s);

  /// Copies pixel values without range conversion.
  static Tensor from_image(const Image& img);
  Image to_image(Range range) const;

  std::string shape_string() const;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

/// Channel concatenation [a; b].
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Channels [begin, begin + count).
Tensor slice_channels(const Tensor& t, int begin, int count);

/// Trainable tensor with its gradient and Adam moments.
struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<float> value;
  std::vector<float> grad;
  std::vector<float> adam_m;
  std::vector<float> adam_v;
  bool requires_grad = true;

  Parameter() = default;
  Parameter(std::string n, std::vector<int> s);
  std::size_t size() const { return value.size(); }
  void zero_grad();
};

using ParameterRefs = std::vector<Parameter*>;

void zero_grad(const ParameterRefs& params);
void set_requires_grad(const ParameterRefs& params, bool enabled);
std::size_t count_parameters(const ParameterRefs& params);

}  // namespace bt::nn
