#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "biastransfer/nn/tensor.hpp"
#include "biastransfer/rng.hpp"

namespace bt::nn {

/// Saved activations of one layer call.
struct Cache {
  std::vector<Tensor> tensors;
  std::vector<std::vector<float>> buffers;
  std::vector<int> ints;
};

/// LIFO record of layer caches for one forward pass. Layers push in forward
/// order and pop in reverse during backward, so the same network can be
/// applied several times before any backward pass as long as each call has
/// its own Trace.
class Trace {
 public:
  void push(Cache c) { stack_.push_back(std::move(c)); }
  Cache pop();
  bool empty() const { return stack_.empty(); }
  std::size_t depth() const { return stack_.size(); }

 private:
  std::vector<Cache> stack_;
};

class Layer {
 public:
  virtual ~Layer() = default;
  /// A null trace runs in inference mode and records nothing.
  virtual Tensor forward(const Tensor& x, Trace* trace) const = 0;
  /// Returns d(loss)/d(input); accumulates parameter gradients for
  /// parameters with requires_grad set.
  virtual Tensor backward(Trace& trace, const Tensor& grad_out) = 0;
  virtual void collect_parameters(ParameterRefs&) {}
};

using LayerPtr = std::unique_ptr<Layer>;

enum class PadMode { zero, reflect };

class Conv2d final : public Layer {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding,
         PadMode pad_mode, bool bias = true);

  Tensor forward(const Tensor& x, Trace* trace) const override;
  Tensor backward(Trace& trace, const Tensor& grad_out) override;
  void collect_parameters(ParameterRefs& out) override;

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  int out_size(int in) const { return (in + 2 * padding_ - kernel_) / stride_ + 1; }

 private:
  int in_, out_, kernel_, stride_, padding_;
  PadMode pad_mode_;
  bool has_bias_;
  Parameter weight_;  // out x (in * k * k)
  Parameter bias_;
};

class ConvTranspose2d final : public Layer {
 public:
  ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int padding,
                  int output_padding, bool bias = true);

  Tensor forward(const Tensor& x, Trace* trace) const override;
  Tensor backward(Trace& trace, const Tensor& grad_out) override;
  void collect_parameters(ParameterRefs& out) override;

  int out_size(int in) const {
    return (in - 1) * stride_ - 2 * padding_ + kernel_ + output_padding_;
  }

 private:
  int in_, out_, kernel_, stride_, padding_, output_padding_;
  bool has_bias_;
  Parameter weight_;  // in x (out * k * k)
  Parameter bias_;
};

/// Per-channel normalisation over the spatial axes, no affine part.
class InstanceNorm final : public Layer {
 public:
  explicit InstanceNorm(float eps = 1e-5f) : eps_(eps) {}
  Tensor forward(const Tensor& x, Trace* trace) const override;
  Tensor backward(Trace& trace, const Tensor& grad_out) override;

 private:
  float eps_;
};

/// slope 0 gives ReLU.
class LeakyRelu final : public Layer {
 public:
  explicit LeakyRelu(float slope) : slope_(slope) {}
  Tensor forward(const Tensor& x, Trace* trace) const override;
  Tensor backward(Trace& trace, const Tensor& grad_out) override;

 private:
  float slope_;
};

class Tanh final : public Layer {
 public:
  Tensor forward(const Tensor& x, Trace* trace) const override;
  Tensor backward(Trace& trace, const Tensor& grad_out) override;
};

/// (C, H, W) -> (C, 1, 1).
class GlobalAvgPool final : public Layer {
 public:
  Tensor forward(const Tensor& x, Trace* trace) const override;
  Tensor backward(Trace& trace, const Tensor& grad_out) override;
};

class Sequential final : public Layer {
 public:
  Sequential() = default;
  Sequential& add(LayerPtr layer) {
    layers_.push_back(std::move(layer));
    return *this;
  }
  template <typename L, typename... Args>
  Sequential& emplace(Args&&... args) {
    return add(std::make_unique<L>(std::forward<Args>(args)...));
  }

  Tensor forward(const Tensor& x, Trace* trace) const override;
  Tensor backward(Trace& trace, const Tensor& grad_out) override;
  void collect_parameters(ParameterRefs& out) override;
  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<LayerPtr> layers_;
};

/// y = x + body(x).
class ResidualBlock final : public Layer {
 public:
  explicit ResidualBlock(Sequential body) : body_(std::move(body)) {}
  Tensor forward(const Tensor& x, Trace* trace) const override;
  Tensor backward(Trace& trace, const Tensor& grad_out) override;
  void collect_parameters(ParameterRefs& out) override { body_.collect_parameters(out); }

 private:
  Sequential body_;
};

/// Fills every weight with N(0, stddev) and every bias with zero, in
/// parameter order.
void init_normal(const ParameterRefs& params, Rng& rng, double stddev);

}  // namespace bt::nn
