#include "biastransfer/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "biastransfer/errors.hpp"

namespace bt::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

// Source index along one axis for every (kernel tap, output position), or -1
// for zero padding.
std::vector<int> tap_table(int in, int out, int kernel, int stride, int padding, PadMode mode) {
  std::vector<int> table(static_cast<std::size_t>(kernel) * out);
  for (int k = 0; k < kernel; ++k) {
    for (int o = 0; o < out; ++o) {
      int i = o * stride + k - padding;
      if (i < 0 || i >= in) i = mode == PadMode::reflect ? reflect101(i, in) : -1;
      table[static_cast<std::size_t>(k) * out + o] = i;
    }
  }
  return table;
}

struct Geometry {
  int channels, in_h, in_w, out_h, out_w, kernel, stride, padding;
  PadMode mode;
};

void im2col(const float* x, const Geometry& g, float* col) {
  const auto rows = tap_table(g.in_h, g.out_h, g.kernel, g.stride, g.padding, g.mode);
  const auto cols = tap_table(g.in_w, g.out_w, g.kernel, g.stride, g.padding, g.mode);
  const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    const float* src = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        float* dst = col + (static_cast<std::size_t>(c) * g.kernel * g.kernel + ky * g.kernel + kx) * plane;
        const int* rt = rows.data() + static_cast<std::size_t>(ky) * g.out_h;
        const int* ct = cols.data() + static_cast<std::size_t>(kx) * g.out_w;
        for (int oy = 0; oy < g.out_h; ++oy) {
          float* d = dst + static_cast<std::size_t>(oy) * g.out_w;
          const int iy = rt[oy];
          if (iy < 0) {
            std::fill(d, d + g.out_w, 0.0f);
            continue;
          }
          const float* srow = src + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ct[ox];
            d[ox] = ix < 0 ? 0.0f : srow[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates columns back onto the (zeroed) image.
void col2im(const float* col, const Geometry& g, float* x) {
  const auto rows = tap_table(g.in_h, g.out_h, g.kernel, g.stride, g.padding, g.mode);
  const auto cols = tap_table(g.in_w, g.out_w, g.kernel, g.stride, g.padding, g.mode);
  const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
  std::fill(x, x + static_cast<std::size_t>(g.channels) * g.in_h * g.in_w, 0.0f);
  for (int c = 0; c < g.channels; ++c) {
    float* dst = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const float* src =
            col + (static_cast<std::size_t>(c) * g.kernel * g.kernel + ky * g.kernel + kx) * plane;
        const int* rt = rows.data() + static_cast<std::size_t>(ky) * g.out_h;
        const int* ct = cols.data() + static_cast<std::size_t>(kx) * g.out_w;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = rt[oy];
          if (iy < 0) continue;
          const float* s = src + static_cast<std::size_t>(oy) * g.out_w;
          float* drow = dst + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ct[ox];
            if (ix >= 0) drow[ix] += s[ox];
          }
        }
      }
    }
  }
}

void add_bias(Tensor& y, const Parameter& bias) {
  const std::size_t plane = y.plane_size();
  for (int c = 0; c < y.channels(); ++c) {
    float* p = y.data() + c * plane;
    const float b = bias.value[c];
    for (std::size_t i = 0; i < plane; ++i) p[i] += b;
  }
}

void accumulate_bias_grad(const Tensor& dy, Parameter& bias) {
  const std::size_t plane = dy.plane_size();
  for (int c = 0; c < dy.channels(); ++c) {
    const float* p = dy.data() + c * plane;
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += p[i];
    bias.grad[c] += static_cast<float>(s);
  }
}

}  // namespace

Cache Trace::pop() {
  if (stack_.empty()) throw ContractError("backward called with an exhausted trace");
  Cache c = std::move(stack_.back());
  stack_.pop_back();
  return c;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding,
               PadMode pad_mode, bool bias)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      pad_mode_(pad_mode),
      has_bias_(bias),
      weight_("weight", {out_channels, in_channels, kernel, kernel}),
      bias_("bias", {bias ? out_channels : 0}) {}

Tensor Conv2d::forward(const Tensor& x, Trace* trace) const {
  if (x.channels() != in_) {
    throw DimensionError("conv2d expects " + std::to_string(in_) + " channels, got " +
                         x.shape_string());
  }
  const int oh = out_size(x.height());
  const int ow = out_size(x.width());
  if (oh < 1 || ow < 1) throw DimensionError("conv2d input too small: " + x.shape_string());
  if (pad_mode_ == PadMode::reflect && (padding_ >= x.height() || padding_ >= x.width())) {
    throw DimensionError("reflect padding larger than input: " + x.shape_string());
  }
  const Geometry g{in_, x.height(), x.width(), oh, ow, kernel_, stride_, padding_, pad_mode_};
  const std::size_t kk = static_cast<std::size_t>(in_) * kernel_ * kernel_;
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  std::vector<float> col(kk * plane);
  im2col(x.data(), g, col.data());

  Tensor y(out_, oh, ow);
  MatMap(y.data(), out_, static_cast<Eigen::Index>(plane)).noalias() =
      ConstMatMap(weight_.value.data(), out_, static_cast<Eigen::Index>(kk)) *
      ConstMatMap(col.data(), static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(plane));
  if (has_bias_) add_bias(y, bias_);

  if (trace) {
    Cache c;
    c.buffers.push_back(std::move(col));
    c.ints = {x.height(), x.width()};
    trace->push(std::move(c));
  }
  return y;
}

Tensor Conv2d::backward(Trace& trace, const Tensor& grad_out) {
  Cache c = trace.pop();
  const int ih = c.ints[0];
  const int iw = c.ints[1];
  const int oh = grad_out.height();
  const int ow = grad_out.width();
  const Geometry g{in_, ih, iw, oh, ow, kernel_, stride_, padding_, pad_mode_};
  const auto kk = static_cast<Eigen::Index>(in_) * kernel_ * kernel_;
  const auto plane = static_cast<Eigen::Index>(oh) * ow;
  const std::vector<float>& col = c.buffers[0];
  ConstMatMap dy(grad_out.data(), out_, plane);

  if (weight_.requires_grad) {
    MatMap(weight_.grad.data(), out_, kk).noalias() += dy * ConstMatMap(col.data(), kk, plane).transpose();
    if (has_bias_) accumulate_bias_grad(grad_out, bias_);
  }
  std::vector<float> dcol(static_cast<std::size_t>(kk * plane));
  MatMap(dcol.data(), kk, plane).noalias() =
      ConstMatMap(weight_.value.data(), out_, kk).transpose() * dy;
  Tensor dx(in_, ih, iw);
  col2im(dcol.data(), g, dx.data());
  return dx;
}

void Conv2d::collect_parameters(ParameterRefs& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride,
                                 int padding, int output_padding, bool bias)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      output_padding_(output_padding),
      has_bias_(bias),
      weight_("weight", {in_channels, out_channels, kernel, kernel}),
      bias_("bias", {bias ? out_channels : 0}) {}

Tensor ConvTranspose2d::forward(const Tensor& x, Trace* trace) const {
  if (x.channels() != in_) {
    throw DimensionError("conv_transpose2d expects " + std::to_string(in_) + " channels, got " +
                         x.shape_string());
  }
  const int oh = out_size(x.height());
  const int ow = out_size(x.width());
  // The output grid is the "input image" of the adjoint convolution.
  const Geometry g{out_, oh, ow, x.height(), x.width(), kernel_, stride_, padding_, PadMode::zero};
  const auto kk = static_cast<Eigen::Index>(out_) * kernel_ * kernel_;
  const auto plane = static_cast<Eigen::Index>(x.height()) * x.width();
  std::vector<float> col(static_cast<std::size_t>(kk * plane));
  MatMap(col.data(), kk, plane).noalias() =
      ConstMatMap(weight_.value.data(), in_, kk).transpose() * ConstMatMap(x.data(), in_, plane);
  Tensor y(out_, oh, ow);
  col2im(col.data(), g, y.data());
  if (has_bias_) add_bias(y, bias_);
  if (trace) {
    Cache c;
    c.tensors.push_back(x);
    trace->push(std::move(c));
  }
  return y;
}

Tensor ConvTranspose2d::backward(Trace& trace, const Tensor& grad_out) {
  Cache c = trace.pop();
  const Tensor& x = c.tensors[0];
  const Geometry g{out_, grad_out.height(), grad_out.width(), x.height(), x.width(),
                   kernel_, stride_, padding_, PadMode::zero};
  const auto kk = static_cast<Eigen::Index>(out_) * kernel_ * kernel_;
  const auto plane = static_cast<Eigen::Index>(x.height()) * x.width();
  std::vector<float> col(static_cast<std::size_t>(kk * plane));
  im2col(grad_out.data(), g, col.data());
  ConstMatMap dcol(col.data(), kk, plane);
  if (weight_.requires_grad) {
    MatMap(weight_.grad.data(), in_, kk).noalias() +=
        ConstMatMap(x.data(), in_, plane) * dcol.transpose();
    if (has_bias_) accumulate_bias_grad(grad_out, bias_);
  }
  Tensor dx(in_, x.height(), x.width());
  MatMap(dx.data(), in_, plane).noalias() = ConstMatMap(weight_.value.data(), in_, kk) * dcol;
  return dx;
}

void ConvTranspose2d::collect_parameters(ParameterRefs& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

// ---------------------------------------------------------- InstanceNorm

Tensor InstanceNorm::forward(const Tensor& x, Trace* trace) const {
  Tensor y(x.channels(), x.height(), x.width());
  std::vector<float> inv_std(static_cast<std::size_t>(x.channels()));
  const std::size_t plane = x.plane_size();
  for (int c = 0; c < x.channels(); ++c) {
    const float* p = x.data() + c * plane;
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += p[i];
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double d = p[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(plane);
    const double is = 1.0 / std::sqrt(var + eps_);
    inv_std[c] = static_cast<float>(is);
    float* q = y.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) q[i] = static_cast<float>((p[i] - mean) * is);
  }
  if (trace) {
    Cache cache;
    cache.tensors.push_back(y);
    cache.buffers.push_back(std::move(inv_std));
    trace->push(std::move(cache));
  }
  return y;
}

Tensor InstanceNorm::backward(Trace& trace, const Tensor& grad_out) {
  Cache cache = trace.pop();
  const Tensor& y = cache.tensors[0];
  const auto& inv_std = cache.buffers[0];
  Tensor dx(y.channels(), y.height(), y.width());
  const std::size_t plane = y.plane_size();
  const double n = static_cast<double>(plane);
  for (int c = 0; c < y.channels(); ++c) {
    const float* dy = grad_out.data() + c * plane;
    const float* yy = y.data() + c * plane;
    double mean_dy = 0.0, mean_dy_y = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      mean_dy += dy[i];
      mean_dy_y += static_cast<double>(dy[i]) * yy[i];
    }
    mean_dy /= n;
    mean_dy_y /= n;
    float* out = dx.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      out[i] = static_cast<float>(inv_std[c] * (dy[i] - mean_dy - yy[i] * mean_dy_y));
    }
  }
  return dx;
}

// ------------------------------------------------------------ activations

Tensor LeakyRelu::forward(const Tensor& x, Trace* trace) const {
  Tensor y = x;
  for (float& v : y.values()) v = v > 0.0f ? v : slope_ * v;
  if (trace) {
    Cache c;
    c.tensors.push_back(x);
    trace->push(std::move(c));
  }
  return y;
}

Tensor LeakyRelu::backward(Trace& trace, const Tensor& grad_out) {
  Cache c = trace.pop();
  const Tensor& x = c.tensors[0];
  Tensor dx = grad_out;
  auto xv = x.values();
  auto d = dx.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(xv[i] > 0.0f)) d[i] *= slope_;
  }
  return dx;
}

Tensor Tanh::forward(const Tensor& x, Trace* trace) const {
  Tensor y = x;
  for (float& v : y.values()) v = std::tanh(v);
  if (trace) {
    Cache c;
    c.tensors.push_back(y);
    trace->push(std::move(c));
  }
  return y;
}

Tensor Tanh::backward(Trace& trace, const Tensor& grad_out) {
  Cache c = trace.pop();
  const Tensor& y = c.tensors[0];
  Tensor dx = grad_out;
  auto yv = y.values();
  auto d = dx.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0f - yv[i] * yv[i];
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, Trace* trace) const {
  Tensor y(x.channels(), 1, 1);
  const std::size_t plane = x.plane_size();
  for (int c = 0; c < x.channels(); ++c) {
    const float* p = x.data() + c * plane;
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += p[i];
    y.at(c, 0, 0) = static_cast<float>(s / static_cast<double>(plane));
  }
  if (trace) {
    Cache c;
    c.ints = {x.height(), x.width()};
    trace->push(std::move(c));
  }
  return y;
}

Tensor GlobalAvgPool::backward(Trace& trace, const Tensor& grad_out) {
  Cache c = trace.pop();
  Tensor dx(grad_out.channels(), c.ints[0], c.ints[1]);
  const std::size_t plane = dx.plane_size();
  for (int ch = 0; ch < dx.channels(); ++ch) {
    const float v = grad_out.at(ch, 0, 0) / static_cast<float>(plane);
    std::fill_n(dx.data() + ch * plane, plane, v);
  }
  return dx;
}

// ------------------------------------------------------------ composites

Tensor Sequential::forward(const Tensor& x, Trace* trace) const {
  Tensor h = x;
  for (const auto& layer : layers_) h = layer->forward(h, trace);
  return h;
}

Tensor Sequential::backward(Trace& trace, const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(trace, g);
  return g;
}

void Sequential::collect_parameters(ParameterRefs& out) {
  for (auto& layer : layers_) layer->collect_parameters(out);
}

Tensor ResidualBlock::forward(const Tensor& x, Trace* trace) const {
  Tensor y = body_.forward(x, trace);
  y += x;
  return y;
}

Tensor ResidualBlock::backward(Trace& trace, const Tensor& grad_out) {
  Tensor dx = body_.backward(trace, grad_out);
  dx += grad_out;
  return dx;
}

void init_normal(const ParameterRefs& params, Rng& rng, double stddev) {
  for (auto* p : params) {
    if (p->shape.size() <= 1) {
      std::fill(p->value.begin(), p->value.end(), 0.0f);
    } else {
      for (float& v : p->value) v = static_cast<float>(rng.normal(0.0, stddev));
    }
  }
}

}  // namespace bt::nn
