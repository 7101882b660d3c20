#include <gtest/gtest.h>

#include <cmath>

#include "biastransfer/errors.hpp"
#include "biastransfer/nn/adam.hpp"
#include "biastransfer/nn/layers.hpp"
#include "test_support.hpp"

using namespace bt;
using namespace bt::nn;

namespace {

Tensor random_tensor(int c, int h, int w, std::uint64_t seed, double scale = 1.0) {
  Tensor t(c, h, w);
  Rng rng(seed);
  for (float& v : t.values()) v = static_cast<float>(scale * rng.normal());
  return t;
}

double weighted_sum(const Tensor& out, const Tensor& r) {
  double s = 0;
  for (std::size_t i = 0; i < out.size(); ++i) s += static_cast<double>(out.values()[i]) * r.values()[i];
  return s;
}

// Checks input and parameter gradients of loss = <R, layer(x)> against
// central differences.
void check_layer(Layer& layer, const Tensor& x, double tol = 5e-3, float h = 1e-2f) {
  ParameterRefs params;
  layer.collect_parameters(params);
  Rng rng(77);
  for (auto* p : params)
    for (float& v : p->value)
      if (v == 0.0f) v = static_cast<float>(0.1 * rng.normal());
  const Tensor probe = layer.forward(x, nullptr);
  const Tensor r = random_tensor(probe.channels(), probe.height(), probe.width(), 5);

  zero_grad(params);
  Trace trace;
  const Tensor out = layer.forward(x, &trace);
  const Tensor gx = layer.backward(trace, r);
  EXPECT_TRUE(trace.empty());

  std::vector<double> analytic, numeric;
  Tensor xv = x;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const float keep = xv.values()[i];
    xv.values()[i] = keep + h;
    const double up = weighted_sum(layer.forward(xv, nullptr), r);
    xv.values()[i] = keep - h;
    const double down = weighted_sum(layer.forward(xv, nullptr), r);
    xv.values()[i] = keep;
    numeric.push_back((up - down) / (2 * h));
    analytic.push_back(gx.values()[i]);
  }
  EXPECT_LT(bt::testing::relative_error(analytic, numeric), tol) << "input gradient";

  for (auto* p : params) {
    analytic.clear();
    numeric.clear();
    for (std::size_t i = 0; i < p->size(); ++i) {
      const float keep = p->value[i];
      p->value[i] = keep + h;
      const double up = weighted_sum(layer.forward(x, nullptr), r);
      p->value[i] = keep - h;
      const double down = weighted_sum(layer.forward(x, nullptr), r);
      p->value[i] = keep;
      numeric.push_back((up - down) / (2 * h));
      analytic.push_back(p->grad[i]);
    }
    // A bias feeding a normalisation has a vanishing gradient, so the
    // error is measured against the layer's output scale.
    EXPECT_LT(bt::testing::relative_error(analytic, numeric, 1e-2), tol) << p->name;
  }
}

}  // namespace

TEST(Conv2d, ForwardMatchesDirectSum) {
  Conv2d conv(2, 3, 3, 2, 1, PadMode::zero);
  Rng rng(1);
  init_normal({&conv.weight(), &conv.bias()}, rng, 0.5);
  for (float& b : conv.bias().value) b = static_cast<float>(rng.normal());
  const Tensor x = random_tensor(2, 7, 6, 2);
  const Tensor y = conv.forward(x, nullptr);
  ASSERT_EQ(y.height(), conv.out_size(7));
  ASSERT_EQ(y.width(), conv.out_size(6));
  for (int o = 0; o < 3; ++o)
    for (int oy = 0; oy < y.height(); ++oy)
      for (int ox = 0; ox < y.width(); ++ox) {
        double s = conv.bias().value[o];
        for (int c = 0; c < 2; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
              if (iy < 0 || iy >= 7 || ix < 0 || ix >= 6) continue;
              s += conv.weight().value[o * 18 + c * 9 + ky * 3 + kx] * x.at(c, iy, ix);
            }
        EXPECT_NEAR(y.at(o, oy, ox), s, 1e-5);
      }
}

TEST(Conv2d, ReflectPaddingMirrorsWithoutEdgeRepeat) {
  Conv2d conv(1, 1, 3, 1, 1, PadMode::reflect, false);
  std::fill(conv.weight().value.begin(), conv.weight().value.end(), 0.0f);
  conv.weight().value[0] = 1.0f;  // picks x[y-1][x-1]
  Tensor x(1, 3, 3);
  for (int i = 0; i < 9; ++i) x.values()[i] = static_cast<float>(i);
  const Tensor y = conv.forward(x, nullptr);
  EXPECT_EQ(y.at(0, 0, 0), x.at(0, 1, 1));  // reflect-101: index -1 -> 1
  EXPECT_THROW(conv.forward(Tensor(1, 1, 1), nullptr), DimensionError);
}

TEST(Gradients, Conv2dZeroPad) {
  Conv2d conv(2, 3, 4, 2, 1, PadMode::zero);
  check_layer(conv, random_tensor(2, 6, 6, 3));
}

TEST(Gradients, Conv2dReflectPad) {
  Conv2d conv(3, 2, 3, 1, 1, PadMode::reflect);
  check_layer(conv, random_tensor(3, 5, 5, 4));
}

TEST(Gradients, ConvTranspose) {
  ConvTranspose2d up(2, 3, 3, 2, 1, 1);
  const Tensor x = random_tensor(2, 3, 3, 6);
  EXPECT_EQ(up.forward(x, nullptr).height(), 6);
  check_layer(up, x);
  ConvTranspose2d up4(2, 1, 4, 2, 1, 0);
  check_layer(up4, random_tensor(2, 3, 4, 7));
}

TEST(Gradients, InstanceNorm) {
  InstanceNorm norm;
  const Tensor x = random_tensor(3, 4, 4, 8);
  const Tensor y = norm.forward(x, nullptr);
  double mean = 0, var = 0;
  for (std::size_t i = 0; i < 16; ++i) mean += y.values()[i];
  for (std::size_t i = 0; i < 16; ++i) var += y.values()[i] * y.values()[i];
  EXPECT_NEAR(mean / 16, 0.0, 1e-5);
  EXPECT_NEAR(var / 16, 1.0, 1e-3);
  check_layer(norm, x, 1e-2);
}

TEST(Gradients, Activations) {
  LeakyRelu lrelu(0.2f);
  check_layer(lrelu, random_tensor(2, 3, 3, 9), 5e-3, 1e-3f);
  Tanh tanh_layer;
  check_layer(tanh_layer, random_tensor(2, 3, 3, 10));
  GlobalAvgPool gap;
  check_layer(gap, random_tensor(3, 4, 5, 11));
}

TEST(Gradients, ResidualSequential) {
  Sequential body;
  body.emplace<Conv2d>(2, 2, 3, 1, 1, PadMode::reflect);
  body.emplace<InstanceNorm>();
  body.emplace<LeakyRelu>(0.0f);
  body.emplace<Conv2d>(2, 2, 3, 1, 1, PadMode::reflect);
  ResidualBlock block(std::move(body));
  check_layer(block, random_tensor(2, 5, 5, 12), 1e-2, 1e-3f);
}

TEST(Parameters, RequiresGradSkipsWeightGradients) {
  Conv2d conv(1, 1, 3, 1, 1, PadMode::zero);
  ParameterRefs params;
  conv.collect_parameters(params);
  set_requires_grad(params, false);
  zero_grad(params);
  Trace t;
  const Tensor x = random_tensor(1, 4, 4, 13);
  const Tensor y = conv.forward(x, &t);
  conv.backward(t, Tensor(1, 4, 4, 1.0f));
  for (auto* p : params)
    for (float g : p->grad) EXPECT_EQ(g, 0.0f);
  EXPECT_EQ(count_parameters(params), 10u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter p("w", {2});
  p.value = {1.0f, -1.0f};
  p.grad = {0.3f, -2.0f};
  Adam adam({&p}, {0.1, 0.5, 0.999, 1e-8});
  adam.step();
  // Bias-corrected first step: m_hat = g, v_hat = g^2, update lr * sign(g).
  EXPECT_NEAR(p.value[0], 0.9f, 1e-5);
  EXPECT_NEAR(p.value[1], -0.9f, 1e-5);
  EXPECT_EQ(adam.steps(), 1);
}

TEST(Adam, SecondStepMatchesRecurrence) {
  Parameter p("w", {1});
  p.value = {0.0f};
  Adam adam({&p}, {0.01, 0.5, 0.999, 1e-8});
  const double g1 = 1.0, g2 = -0.5;
  p.grad = {static_cast<float>(g1)};
  adam.step();
  p.grad = {static_cast<float>(g2)};
  adam.step();
  const double m = 0.5 * (0.5 * g1) + 0.5 * g2;
  const double v = 0.999 * (0.001 * g1 * g1) + 0.001 * g2 * g2;
  const double m_hat = m / (1 - 0.25), v_hat = v / (1 - 0.999 * 0.999);
  const double expected = -0.01 - 0.01 * m_hat / (std::sqrt(v_hat) + 1e-8);
  EXPECT_NEAR(p.value[0], expected, 1e-6);
}

TEST(Tensor, ConcatAndSlice) {
  const Tensor a = random_tensor(2, 3, 3, 14), b = random_tensor(1, 3, 3, 15);
  const Tensor c = concat_channels(a, b);
  EXPECT_EQ(c.channels(), 3);
  EXPECT_EQ(c.at(2, 1, 1), b.at(0, 1, 1));
  const Tensor s = slice_channels(c, 0, 2);
  EXPECT_TRUE(std::equal(s.values().begin(), s.values().end(), a.values().begin()));
  EXPECT_THROW(concat_channels(a, Tensor(1, 2, 3)), DimensionError);
}
