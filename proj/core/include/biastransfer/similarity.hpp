#pragma once

#include <array>
#include <span>
#include <vector>

#include "biastransfer/imaging.hpp"

namespace bt {

/// Gaussian-window SSIM parameters. Local statistics are taken over the
/// valid region only (no padding), so both sides must be >= window.
struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;

  void validate() const;
  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  double c3() const { return c2() / 2.0; }
};

inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

/// Channel-planar double data, the working format of the similarity
/// kernels. data.size() must equal channels * height * width.
struct PlanarView {
  std::span<const double> data;
  int channels = 0;
  int height = 0;
  int width = 0;
};

/// Largest scale count (<= 5) for which min_side >= 2^(scales-1) * window;
/// 0 when even one scale does not fit.
int max_ms_ssim_scales(int min_side, const SsimConfig& cfg);

/// First `scales` MS-SSIM exponents; renormalised to sum to the full
/// five-scale total when fewer than five scales are used.
std::vector<double> ms_ssim_weights(int scales);

// Kernels. When grad_y is non-empty it receives d(score)/d(y) and must have
// the size of y.data. Multi-channel scores are the mean of per-channel
// scores.
double ssim_planar(PlanarView x, PlanarView y, const SsimConfig& cfg,
                   std::span<double> grad_y = {});
double ms_ssim_planar(PlanarView x, PlanarView y, const SsimConfig& cfg, int scales,
                      std::span<double> grad_y = {});
double structure_planar(PlanarView x, PlanarView y, const SsimConfig& cfg,
                        std::span<double> grad_y = {});

/// Image-level scores; images are compared in unit range.
double ssim(const Image& x, const Image& y, const SsimConfig& cfg = {});
double ms_ssim(const Image& x, const Image& y, const SsimConfig& cfg = {}, int scales = 5);
double structure_similarity(const Image& x, const Image& y, const SsimConfig& cfg = {});

/// Unit-range image as double planar storage.
std::vector<double> to_planar_double(const Image& img);

}  // namespace bt
