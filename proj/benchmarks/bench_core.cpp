#include <benchmark/benchmark.h>

#include "biastransfer/color_transfer.hpp"
#include "biastransfer/fid.hpp"
#include "biastransfer/imaging.hpp"
#include "biastransfer/losses.hpp"
#include "biastransfer/networks.hpp"
#include "biastransfer/rng.hpp"
#include "biastransfer/similarity.hpp"

namespace {

bt::Image noise_image(int side, std::uint64_t seed) {
  bt::Image img(side, side, 3);
  bt::Rng rng(seed);
  for (float& v : img.values()) v = static_cast<float>(rng.uniform());
  return img;
}

bt::Tensor noise_tensor(int c, int side, std::uint64_t seed) {
  bt::Tensor t(c, side, side);
  bt::Rng rng(seed);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

void BM_Conv3x3(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  bt::nn::Conv2d conv(32, 32, 3, 1, 1, bt::nn::PadMode::reflect);
  bt::nn::ParameterRefs params;
  conv.collect_parameters(params);
  bt::Rng rng(1);
  bt::nn::init_normal(params, rng, 0.02);
  const bt::Tensor x = noise_tensor(32, side, 2);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, nullptr));
  state.SetItemsProcessed(state.iterations() * 32LL * 32 * 9 * side * side);
}
BENCHMARK(BM_Conv3x3)->Arg(32)->Arg(64)->Arg(128);

void BM_GeneratorForward(benchmark::State& state) {
  const auto arch = static_cast<bt::Architecture>(state.range(0));
  const bt::BundleSpec spec = bt::default_bundle_spec(arch, 64, 32);
  const bt::Generator g(spec.generator, 1);
  const bt::Tensor x = noise_tensor(3, 64, 3);
  const int label = arch == bt::Architecture::fpg ? 1 : -1;
  for (auto _ : state) benchmark::DoNotOptimize(g.forward(x, nullptr, label));
}
BENCHMARK(BM_GeneratorForward)
    ->Arg(static_cast<int>(bt::Architecture::cyclegan))
    ->Arg(static_cast<int>(bt::Architecture::unet_cyclegan))
    ->Arg(static_cast<int>(bt::Architecture::fpg))
    ->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const bt::Image a = noise_image(side, 4), b = noise_image(side, 5);
  for (auto _ : state) benchmark::DoNotOptimize(bt::ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_MsSsimLossWithGradient(benchmark::State& state) {
  const bt::Tensor x = noise_tensor(3, 64, 6), y = noise_tensor(3, 64, 7);
  bt::Tensor g;
  for (auto _ : state) benchmark::DoNotOptimize(bt::ms_ssim_loss(x, y, {}, 0, &g));
}
BENCHMARK(BM_MsSsimLossWithGradient)->Unit(benchmark::kMillisecond);

void BM_Pyramid(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const bt::Image img = noise_image(side, 8);
  for (auto _ : state) {
    const bt::LaplacianPyramid p = bt::build_pyramid(img, 64);
    benchmark::DoNotOptimize(bt::collapse_pyramid(p, p.base));
  }
}
BENCHMARK(BM_Pyramid)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_FrechetDistance(benchmark::State& state) {
  std::vector<bt::Image> a, b;
  for (int i = 0; i < 32; ++i) {
    a.push_back(noise_image(64, 100 + i));
    b.push_back(noise_image(64, 200 + i));
  }
  const bt::FeatureEmbedding fa = bt::extract_features(a), fb = bt::extract_features(b);
  for (auto _ : state) benchmark::DoNotOptimize(bt::frechet_distance(fa, fb));
}
BENCHMARK(BM_FrechetDistance)->Unit(benchmark::kMillisecond);

void BM_ColorTransfer(benchmark::State& state) {
  const bt::Image src = noise_image(128, 9), ref = noise_image(128, 10);
  for (auto _ : state) benchmark::DoNotOptimize(bt::color_transfer(src, ref));
}
BENCHMARK(BM_ColorTransfer)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
