#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "biastransfer/imaging.hpp"
#include "biastransfer/rng.hpp"
#include "biastransfer/similarity.hpp"

namespace bt::testing {

inline Image random_image(int h, int w, int c, std::uint64_t seed, Range range = Range::unit) {
  Image img(h, w, c, range);
  Rng rng(seed);
  for (float& v : img.values()) v = static_cast<float>(rng.uniform(range_min(range), 1.0));
  return img;
}

/// Smooth random image (sum of a few low-frequency waves) in unit range.
inline Image smooth_image(int h, int w, int c, std::uint64_t seed) {
  Image img(h, w, c);
  Rng rng(seed);
  for (int ch = 0; ch < c; ++ch) {
    const double fx = rng.uniform(0.5, 3.0), fy = rng.uniform(0.5, 3.0);
    const double px = rng.uniform(0.0, 6.28), py = rng.uniform(0.0, 6.28);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double v = 0.5 + 0.2 * std::sin(6.28318 * fx * x / w + px) +
                         0.2 * std::cos(6.28318 * fy * y / h + py);
        img.at(y, x, ch) = static_cast<float>(v);
      }
    }
  }
  return img;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.values()[i]) - b.values()[i]));
  }
  return m;
}

/// Direct sliding-window SSIM family oracle on one channel: for every valid
/// window position the weighted moments are summed over the full 2-D
/// Gaussian window. kind 0 = ssim, 1 = contrast-structure, 2 = structure.
inline double windowed_oracle(const std::vector<double>& x, const std::vector<double>& y, int h,
                              int w, const SsimConfig& cfg, int kind) {
  const int r = cfg.window / 2;
  std::vector<double> g1(cfg.window);
  double s = 0.0;
  for (int i = 0; i < cfg.window; ++i) {
    g1[i] = std::exp(-0.5 * (i - r) * (i - r) / (cfg.sigma * cfg.sigma));
    s += g1[i];
  }
  for (double& v : g1) v /= s;
  double total = 0.0;
  int count = 0;
  for (int cy = r; cy < h - r; ++cy) {
    for (int cx = r; cx < w - r; ++cx) {
      double mx = 0, my = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const double wt = g1[dy + r] * g1[dx + r];
          mx += wt * x[(cy + dy) * w + cx + dx];
          my += wt * y[(cy + dy) * w + cx + dx];
        }
      }
      double vx = 0, vy = 0, cxy = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const double wt = g1[dy + r] * g1[dx + r];
          const double a = x[(cy + dy) * w + cx + dx] - mx;
          const double b = y[(cy + dy) * w + cx + dx] - my;
          vx += wt * a * a;
          vy += wt * b * b;
          cxy += wt * a * b;
        }
      }
      double v;
      if (kind == 2) {
        v = (cxy + cfg.c3()) / (std::sqrt(vx) * std::sqrt(vy) + cfg.c3());
      } else {
        const double cs = (2 * cxy + cfg.c2()) / (vx + vy + cfg.c2());
        v = kind == 1 ? cs : cs * (2 * mx * my + cfg.c1()) / (mx * mx + my * my + cfg.c1());
      }
      total += v;
      ++count;
    }
  }
  return total / count;
}

inline std::vector<double> channel(const Image& img, int c) {
  std::vector<double> out(img.plane_size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.plane(c)[i];
  return out;
}

/// Central finite-difference gradient of f at v.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> v, double h) {
  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double keep = v[i];
    v[i] = keep + h;
    const double up = f(v);
    v[i] = keep - h;
    const double down = f(v);
    v[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(max_i |b_i|, floor).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b,
                             double floor = 1e-8) {
  double num = 0.0, den = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / den;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("bt_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace bt::testing
