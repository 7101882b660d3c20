#include "biastransfer/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "biastransfer/errors.hpp"

namespace bt {

namespace {

std::vector<double> gaussian_kernel(const SsimConfig& cfg) {
  std::vector<double> g(static_cast<std::size_t>(cfg.window));
  const int half = cfg.window / 2;
  double sum = 0.0;
  for (int i = 0; i < cfg.window; ++i) {
    const double d = i - half;
    g[i] = std::exp(-d * d / (2.0 * cfg.sigma * cfg.sigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Valid-region separable filtering of an h x w plane.
void filter_valid(const double* in, int h, int w, const std::vector<double>& g, double* out) {
  const int k = static_cast<int>(g.size());
  const int oh = h - k + 1;
  const int ow = w - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    const double* row = in + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += g[t] * row[x + t];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += g[t] * tmp[static_cast<std::size_t>(y + t) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
}

// Adjoint of filter_valid: scatters an oh x ow map back onto h x w.
void filter_valid_adjoint(const double* map, int h, int w, const std::vector<double>& g,
                          double* out) {
  const int k = static_cast<int>(g.size());
  const int oh = h - k + 1;
  const int ow = w - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double v = map[static_cast<std::size_t>(y) * ow + x];
      for (int t = 0; t < k; ++t) tmp[static_cast<std::size_t>(y + t) * ow + x] += g[t] * v;
    }
  }
  std::fill(out, out + static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double v = tmp[static_cast<std::size_t>(y) * ow + x];
      double* row = out + static_cast<std::size_t>(y) * w;
      for (int t = 0; t < k; ++t) row[x + t] += g[t] * v;
    }
  }
}

struct LocalStats {
  int h = 0;  // valid map size
  int w = 0;
  std::vector<double> mx, my, sxx, syy, sxy;
};

LocalStats local_stats(const double* x, const double* y, int h, int w,
                       const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  if (h < k || w < k) {
    throw DimensionError("image " + std::to_string(h) + "x" + std::to_string(w) +
                         " is smaller than the SSIM window " + std::to_string(k));
  }
  LocalStats s;
  s.h = h - k + 1;
  s.w = w - k + 1;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const std::size_t m = static_cast<std::size_t>(s.h) * s.w;
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  s.mx.resize(m);
  s.my.resize(m);
  s.sxx.resize(m);
  s.syy.resize(m);
  s.sxy.resize(m);
  filter_valid(x, h, w, g, s.mx.data());
  filter_valid(y, h, w, g, s.my.data());
  filter_valid(xx.data(), h, w, g, s.sxx.data());
  filter_valid(yy.data(), h, w, g, s.syy.data());
  filter_valid(xy.data(), h, w, g, s.sxy.data());
  for (std::size_t i = 0; i < m; ++i) {
    s.sxx[i] -= s.mx[i] * s.mx[i];
    s.syy[i] -= s.my[i] * s.my[i];
    s.sxy[i] -= s.mx[i] * s.my[i];
  }
  return s;
}

// Partial derivatives of a map-mean score with respect to the local
// statistics of y, per map pixel.
struct StatPartials {
  std::vector<double> d_my, d_syy, d_sxy;
  explicit StatPartials(std::size_t m) : d_my(m, 0.0), d_syy(m, 0.0), d_sxy(m, 0.0) {}
};

// Chains statistic partials down to pixel gradients of y (accumulated, scaled).
void backprop_stats(const LocalStats& s, const StatPartials& p, const double* x,
                    const double* y, int h, int w, const std::vector<double>& g, double scale,
                    double* grad_y) {
  const std::size_t m = static_cast<std::size_t>(s.h) * s.w;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> a(m), b(m), c(m);
  for (std::size_t i = 0; i < m; ++i) {
    a[i] = p.d_my[i] - 2.0 * s.my[i] * p.d_syy[i] - s.mx[i] * p.d_sxy[i];
    b[i] = p.d_syy[i];
    c[i] = p.d_sxy[i];
  }
  std::vector<double> ga(n), gb(n), gc(n);
  filter_valid_adjoint(a.data(), h, w, g, ga.data());
  filter_valid_adjoint(b.data(), h, w, g, gb.data());
  filter_valid_adjoint(c.data(), h, w, g, gc.data());
  for (std::size_t i = 0; i < n; ++i) {
    grad_y[i] += scale * (ga[i] + 2.0 * y[i] * gb[i] + x[i] * gc[i]);
  }
}

enum class MapKind { ssim, cs, structure };

// Mean of the requested map; fills partials (already divided by map size)
// when requested.
double map_mean(const LocalStats& s, const SsimConfig& cfg, MapKind kind, StatPartials* p) {
  const double c1 = cfg.c1();
  const double c2 = cfg.c2();
  const double c3 = cfg.c3();
  const std::size_t m = static_cast<std::size_t>(s.h) * s.w;
  const double inv_m = 1.0 / static_cast<double>(m);
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double mx = s.mx[i], my = s.my[i];
    const double sxx = s.sxx[i], syy = s.syy[i], sxy = s.sxy[i];
    if (kind == MapKind::structure) {
      const double sdx = std::sqrt(std::max(sxx, 0.0));
      const double sdy = std::sqrt(std::max(syy, 0.0));
      const double num = sxy + c3;
      const double den = sdx * sdy + c3;
      sum += num / den;
      if (p) {
        p->d_sxy[i] = inv_m / den;
        if (syy > 1e-12) {
          const double d_sdy = 0.5 / sdy;
          p->d_syy[i] = -inv_m * num / (den * den) * sdx * d_sdy;
        }
      }
      continue;
    }
    const double cs_num = 2.0 * sxy + c2;
    const double cs_den = sxx + syy + c2;
    const double cs = cs_num / cs_den;
    if (kind == MapKind::cs) {
      sum += cs;
      if (p) {
        p->d_sxy[i] = inv_m * 2.0 / cs_den;
        p->d_syy[i] = -inv_m * cs_num / (cs_den * cs_den);
      }
      continue;
    }
    const double l_num = 2.0 * mx * my + c1;
    const double l_den = mx * mx + my * my + c1;
    const double l = l_num / l_den;
    sum += l * cs;
    if (p) {
      const double dl_dmy = (2.0 * mx * l_den - l_num * 2.0 * my) / (l_den * l_den);
      p->d_my[i] = inv_m * cs * dl_dmy;
      p->d_sxy[i] = inv_m * l * 2.0 / cs_den;
      p->d_syy[i] = -inv_m * l * cs_num / (cs_den * cs_den);
    }
  }
  return sum * inv_m;
}

void check_views(PlanarView x, PlanarView y, std::span<double> grad_y) {
  if (x.channels != y.channels || x.height != y.height || x.width != y.width) {
    throw DimensionError("similarity: shape mismatch");
  }
  const auto n = static_cast<std::size_t>(x.channels) * x.height * x.width;
  if (x.data.size() != n || y.data.size() != n) {
    throw DimensionError("similarity: data size does not match the declared shape");
  }
  if (!grad_y.empty() && grad_y.size() != n) {
    throw DimensionError("similarity: gradient buffer has the wrong size");
  }
}

double single_scale(PlanarView x, PlanarView y, const SsimConfig& cfg, MapKind kind,
                    std::span<double> grad_y) {
  cfg.validate();
  check_views(x, y, grad_y);
  const auto g = gaussian_kernel(cfg);
  const std::size_t n = static_cast<std::size_t>(x.height) * x.width;
  if (!grad_y.empty()) std::fill(grad_y.begin(), grad_y.end(), 0.0);
  double total = 0.0;
  for (int c = 0; c < x.channels; ++c) {
    const double* xp = x.data.data() + c * n;
    const double* yp = y.data.data() + c * n;
    const auto stats = local_stats(xp, yp, x.height, x.width, g);
    if (grad_y.empty()) {
      total += map_mean(stats, cfg, kind, nullptr);
    } else {
      StatPartials p(stats.mx.size());
      total += map_mean(stats, cfg, kind, &p);
      backprop_stats(stats, p, xp, yp, x.height, x.width, g, 1.0 / x.channels,
                     grad_y.data() + c * n);
    }
  }
  return total / x.channels;
}

// 2x2 average pooling, odd trailing rows/columns dropped.
std::vector<double> avg_pool2(const std::vector<double>& in, int h, int w) {
  const int oh = h / 2;
  const int ow = w / 2;
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const std::size_t r0 = static_cast<std::size_t>(2 * y) * w + 2 * x;
      const std::size_t r1 = r0 + w;
      out[static_cast<std::size_t>(y) * ow + x] = 0.25 * (in[r0] + in[r0 + 1] + in[r1] + in[r1 + 1]);
    }
  }
  return out;
}

}  // namespace

void SsimConfig::validate() const {
  if (window < 3 || window % 2 == 0) throw ConfigError("SSIM window must be odd and >= 3");
  if (!(k1 > 0.0) || !(k2 > 0.0)) throw ConfigError("SSIM constants K1, K2 must be positive");
  if (!(sigma > 0.0)) throw ConfigError("SSIM sigma must be positive");
  if (!(dynamic_range > 0.0)) throw ConfigError("SSIM dynamic range must be positive");
}

int max_ms_ssim_scales(int min_side, const SsimConfig& cfg) {
  int scales = 0;
  while (scales < 5 && min_side >= (1 << scales) * cfg.window) ++scales;
  return scales;
}

std::vector<double> ms_ssim_weights(int scales) {
  if (scales < 1 || scales > 5) throw ConfigError("MS-SSIM scale count must be in [1, 5]");
  std::vector<double> w(kMsSsimWeights.begin(), kMsSsimWeights.begin() + scales);
  if (scales < 5) {
    const double full = std::accumulate(kMsSsimWeights.begin(), kMsSsimWeights.end(), 0.0);
    const double part = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v *= full / part;
  }
  return w;
}

double ssim_planar(PlanarView x, PlanarView y, const SsimConfig& cfg, std::span<double> grad_y) {
  return single_scale(x, y, cfg, MapKind::ssim, grad_y);
}

double structure_planar(PlanarView x, PlanarView y, const SsimConfig& cfg,
                        std::span<double> grad_y) {
  return single_scale(x, y, cfg, MapKind::structure, grad_y);
}

double ms_ssim_planar(PlanarView x, PlanarView y, const SsimConfig& cfg, int scales,
                      std::span<double> grad_y) {
  cfg.validate();
  check_views(x, y, grad_y);
  const auto weights = ms_ssim_weights(scales);
  const int min_side = std::min(x.height, x.width);
  if (min_side < (1 << (scales - 1)) * cfg.window) {
    throw DimensionError("image side " + std::to_string(min_side) + " too small for " +
                         std::to_string(scales) + " MS-SSIM scales with window " +
                         std::to_string(cfg.window));
  }
  const auto g = gaussian_kernel(cfg);
  const std::size_t n = static_cast<std::size_t>(x.height) * x.width;
  if (!grad_y.empty()) std::fill(grad_y.begin(), grad_y.end(), 0.0);

  double total = 0.0;
  for (int c = 0; c < x.channels; ++c) {
    std::vector<std::vector<double>> xs(scales), ys(scales);
    std::vector<int> hs(scales), ws(scales);
    xs[0].assign(x.data.begin() + c * n, x.data.begin() + (c + 1) * n);
    ys[0].assign(y.data.begin() + c * n, y.data.begin() + (c + 1) * n);
    hs[0] = x.height;
    ws[0] = x.width;
    for (int s = 1; s < scales; ++s) {
      xs[s] = avg_pool2(xs[s - 1], hs[s - 1], ws[s - 1]);
      ys[s] = avg_pool2(ys[s - 1], hs[s - 1], ws[s - 1]);
      hs[s] = hs[s - 1] / 2;
      ws[s] = ws[s - 1] / 2;
    }
    std::vector<LocalStats> stats(scales);
    std::vector<double> values(scales);
    std::vector<StatPartials> partials;
    for (int s = 0; s < scales; ++s) {
      stats[s] = local_stats(xs[s].data(), ys[s].data(), hs[s], ws[s], g);
      const MapKind kind = s + 1 < scales ? MapKind::cs : MapKind::ssim;
      if (grad_y.empty()) {
        values[s] = map_mean(stats[s], cfg, kind, nullptr);
      } else {
        partials.emplace_back(stats[s].mx.size());
        values[s] = map_mean(stats[s], cfg, kind, &partials.back());
      }
    }
    double score = 1.0;
    for (int s = 0; s < scales; ++s) score *= std::pow(std::max(values[s], 0.0), weights[s]);
    total += score;

    if (!grad_y.empty() && score > 0.0) {
      // Gradient at each scale, then pushed back through the pooling chain.
      std::vector<double> carry;
      for (int s = scales - 1; s >= 0; --s) {
        std::vector<double> gs(static_cast<std::size_t>(hs[s]) * ws[s], 0.0);
        const double d_value = weights[s] * score / values[s];
        backprop_stats(stats[s], partials[s], xs[s].data(), ys[s].data(), hs[s], ws[s], g,
                       d_value / x.channels, gs.data());
        if (!carry.empty()) {
          const int ch = hs[s + 1];
          const int cw = ws[s + 1];
          for (int yy = 0; yy < ch; ++yy) {
            for (int xx = 0; xx < cw; ++xx) {
              const double v = 0.25 * carry[static_cast<std::size_t>(yy) * cw + xx];
              const std::size_t r0 = static_cast<std::size_t>(2 * yy) * ws[s] + 2 * xx;
              gs[r0] += v;
              gs[r0 + 1] += v;
              gs[r0 + ws[s]] += v;
              gs[r0 + ws[s] + 1] += v;
            }
          }
        }
        carry = std::move(gs);
      }
      double* out = grad_y.data() + c * n;
      for (std::size_t i = 0; i < n; ++i) out[i] += carry[i];
    }
  }
  return total / x.channels;
}

std::vector<double> to_planar_double(const Image& img) {
  const Image unit = convert_range(img, Range::unit);
  auto v = unit.values();
  return {v.begin(), v.end()};
}

namespace {

template <typename Fn>
double image_score(const Image& x, const Image& y, Fn&& fn) {
  if (!x.same_shape(y)) throw DimensionError("similarity: image shape mismatch");
  const auto xd = to_planar_double(x);
  const auto yd = to_planar_double(y);
  const PlanarView xv{xd, x.channels(), x.height(), x.width()};
  const PlanarView yv{yd, y.channels(), y.height(), y.width()};
  return fn(xv, yv);
}

}  // namespace

double ssim(const Image& x, const Image& y, const SsimConfig& cfg) {
  return image_score(x, y, [&](PlanarView a, PlanarView b) { return ssim_planar(a, b, cfg); });
}

double ms_ssim(const Image& x, const Image& y, const SsimConfig& cfg, int scales) {
  return image_score(x, y,
                     [&](PlanarView a, PlanarView b) { return ms_ssim_planar(a, b, cfg, scales); });
}

double structure_similarity(const Image& x, const Image& y, const SsimConfig& cfg) {
  return image_score(x, y,
                     [&](PlanarView a, PlanarView b) { return structure_planar(a, b, cfg); });
}

}  // namespace bt
