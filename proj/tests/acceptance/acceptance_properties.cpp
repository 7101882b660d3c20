// Property acceptance suite: criteria 1-6. Prints one PASS/FAIL line per
// criterion and exits non-zero when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <queue>
#include <string>
#include <vector>

#include "biastransfer/color_transfer.hpp"
#include "biastransfer/fid.hpp"
#include "biastransfer/imaging.hpp"
#include "biastransfer/losses.hpp"
#include "biastransfer/networks.hpp"
#include "biastransfer/schedule.hpp"
#include "biastransfer/segmentation.hpp"
#include "biastransfer/similarity.hpp"
#include "test_support.hpp"

using namespace bt;
using bt::testing::max_abs_diff;
using bt::testing::numeric_gradient;
using bt::testing::random_image;
using bt::testing::relative_error;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome pyramid_round_trip() {
  Outcome o;
  const int sides[] = {256, 512, 1024};
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int side = sides[i % 3];
    const Image img = random_image(side, side, 3, 1000 + i);
    const LaplacianPyramid p = build_pyramid(img, 32);
    worst = std::max(worst, max_abs_diff(collapse_pyramid(p, p.base), img));
  }
  o.require(worst <= 1e-5, "max error " + fmt("%.3g", worst));
  o.detail = o.pass ? "max error " + fmt("%.3g", worst) : o.detail;
  return o;
}

// ---------------------------------------------------------------- 2

// 8-connected flood fill, labels in discovery order.
std::vector<int> components_oracle(unsigned bits) {
  std::vector<int> lab(9, 0);
  int next = 0;
  for (int s = 0; s < 9; ++s) {
    if (!((bits >> s) & 1u) || lab[s]) continue;
    lab[s] = ++next;
    std::queue<int> q;
    q.push(s);
    while (!q.empty()) {
      const int p = q.front();
      q.pop();
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int y = p / 3 + dy, x = p % 3 + dx;
          if (y < 0 || y > 2 || x < 0 || x > 2) continue;
          const int n = y * 3 + x;
          if (((bits >> n) & 1u) && !lab[n]) {
            lab[n] = next;
            q.push(n);
          }
        }
      }
    }
  }
  return lab;
}

// With IoU > 0.5 every object has at most one partner, so the matching is
// the set of pairs above the threshold.
double dice_object_oracle(unsigned a, unsigned b) {
  const auto la = components_oracle(a), lb = components_oracle(b);
  const int na = *std::max_element(la.begin(), la.end());
  const int nb = *std::max_element(lb.begin(), lb.end());
  if (na + nb == 0) return 1.0;
  int matches = 0;
  for (int i = 1; i <= na; ++i) {
    for (int j = 1; j <= nb; ++j) {
      int inter = 0, uni = 0;
      for (int p = 0; p < 9; ++p) {
        inter += la[p] == i && lb[p] == j;
        uni += la[p] == i || lb[p] == j;
      }
      if (2 * inter > uni) ++matches;
    }
  }
  return 2.0 * matches / (na + nb);
}

SegMask mask3x3(unsigned bits) {
  SegMask m(3, 3);
  for (int i = 0; i < 9; ++i) m.at(i / 3, i % 3) = (bits >> i) & 1u;
  return m;
}

Outcome metric_identities() {
  Outcome o;
  for (int i = 0; i < 5; ++i) {
    const Image x = random_image(256, 256, 3, 50 + i);
    const double s = ssim(x, x);
    o.require(std::abs(s - 1.0) <= 1e-9, "ssim(x,x) = " + fmt("%.12f", s));
    const double ms = ms_ssim(x, x);
    o.require(std::abs(ms - 1.0) <= 1e-6, "ms_ssim(x,x) = " + fmt("%.12f", ms));
    for (auto [a, b] : {std::pair{0.5f, 0.2f}, std::pair{0.25f, 0.7f}, std::pair{0.9f, 0.05f}}) {
      Image y = x;
      for (float& v : y.values()) v = a * v + b;
      const double st = structure_similarity(x, y);
      o.require(std::abs(st - 1.0) <= 1e-6, "structure under affine map = " + fmt("%.9f", st));
    }
  }
  std::vector<Image> set;
  for (int i = 0; i < 20; ++i) set.push_back(bt::testing::smooth_image(64, 64, 3, 70 + i));
  const FeatureEmbedding f = extract_features(set);
  const double fid = frechet_distance(f, f);
  o.require(fid <= 1e-4, "fid(A,A) = " + fmt("%.3g", fid));

  std::vector<SegMask> masks, labelled;
  for (unsigned m = 0; m < 512; ++m) {
    masks.push_back(mask3x3(m));
    labelled.push_back(label_components(masks.back()));
  }
  for (unsigned a = 0; a < 512 && o.pass; ++a) {
    for (unsigned b = 0; b < 512; ++b) {
      const int na = __builtin_popcount(a), nb = __builtin_popcount(b);
      const double pix = na + nb == 0 ? 1.0 : 2.0 * __builtin_popcount(a & b) / (na + nb);
      if (dice_pixel(masks[a], masks[b]) != pix) {
        o.require(false, "dice_pixel mismatch at " + std::to_string(a) + "," + std::to_string(b));
        break;
      }
      if (dice_object(labelled[a], labelled[b]) != dice_object_oracle(a, b)) {
        o.require(false, "dice_object mismatch at " + std::to_string(a) + "," + std::to_string(b));
        break;
      }
    }
  }
  if (o.pass) o.detail = "ssim, ms_ssim, structure, fid " + fmt("%.2g", fid) + ", 2x262144 dice pairs";
  return o;
}

// ---------------------------------------------------------------- 3

std::vector<double> values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// D(x) = a * sum(x) + b * sum(x^2) / 2 with two trainable scalars.
struct QuadraticCritic {
  double a = 0.0, b = 0.0, ga = 0.0, gb = 0.0;
  double input_gradient(std::span<const double> x, std::span<double> g) {
    double d = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      g[i] = a + b * x[i];
      d += a * x[i] + 0.5 * b * x[i] * x[i];
    }
    return d;
  }
  void accumulate_parameter_gradient(std::span<const double> x, double s) {
    for (double v : x) {
      ga += s * v;
      gb += s * 0.5 * v * v;
    }
  }
};

Outcome loss_gradients() {
  Outcome o;
  constexpr double h = 1e-4, tol = 1e-3;
  double worst = 0.0;
  auto check = [&](const std::string& name, const std::vector<double>& analytic,
                   const std::vector<double>& numeric) {
    const double e = relative_error(analytic, numeric);
    worst = std::max(worst, e);
    o.require(e < tol, name + " relative error " + fmt("%.3g", e));
  };
  using Fn = std::function<double(const std::vector<double>&)>;
  auto fd = [&](const Fn& f, const std::vector<double>& at) { return numeric_gradient(f, at, h); };

  const auto x = values(16, 1), y = values(16, 2);
  std::vector<double> g(16), g2(16);

  l1_loss(x, y, g);
  check("l1", g, fd([&](const auto& v) { return l1_loss(x, v); }, y));

  lsgan_discriminator_loss(x, y, g, g2);
  check("lsgan D real", g, fd([&](const auto& v) { return lsgan_discriminator_loss(v, y); }, x));
  check("lsgan D fake", g2, fd([&](const auto& v) { return lsgan_discriminator_loss(x, v); }, y));
  lsgan_generator_loss(y, g);
  check("lsgan G", g, fd([&](const auto& v) { return lsgan_generator_loss(v); }, y));

  wgan_critic_loss(x, y, g, g2);
  check("wgan critic real", g, fd([&](const auto& v) { return wgan_critic_loss(v, y); }, x));
  check("wgan critic fake", g2, fd([&](const auto& v) { return wgan_critic_loss(x, v); }, y));
  wgan_generator_loss(y, g);
  check("wgan G", g, fd([&](const auto& v) { return wgan_generator_loss(v); }, y));

  const std::vector<double> z(x.begin(), x.begin() + 4);
  std::vector<double> gz(4);
  cross_entropy_loss(z, 2, gz);
  check("domain cross entropy", gz, fd([&](const auto& v) { return cross_entropy_loss(v, 2); }, z));

  SsimConfig cfg;
  cfg.window = 3;
  cfg.sigma = 1.0;
  ms_ssim_loss(PlanarView{x, 1, 4, 4}, PlanarView{y, 1, 4, 4}, cfg, 1, g);
  check("ms-ssim", g, fd([&](const auto& v) {
          return ms_ssim_loss(PlanarView{x, 1, 4, 4}, PlanarView{v, 1, 4, 4}, cfg, 1);
        }, y));
  structure_loss(PlanarView{x, 1, 4, 4}, PlanarView{y, 1, 4, 4}, cfg, g);
  check("structure", g, fd([&](const auto& v) {
          return structure_loss(PlanarView{x, 1, 4, 4}, PlanarView{v, 1, 4, 4}, cfg);
        }, y));

  // Penalty: parameter gradient against differences of the exact penalty.
  const double a = 0.7, b = -0.4;
  Rng rng(3), replay(3);
  const double u = replay.uniform();
  std::vector<double> x_hat(16);
  for (int i = 0; i < 16; ++i) x_hat[i] = u * x[i] + (1 - u) * y[i];
  auto exact = [&](const std::vector<double>& p) {
    double sq = 0;
    for (double v : x_hat) sq += (p[0] + p[1] * v) * (p[0] + p[1] * v);
    return (std::sqrt(sq) - 1) * (std::sqrt(sq) - 1);
  };
  QuadraticCritic c{a, b};
  gradient_penalty<double>(c, std::span<const double>(x), std::span<const double>(y), rng, 1.0, 1e-4);
  check("gradient penalty", {c.ga, c.gb}, fd(exact, {a, b}));

  if (o.pass) o.detail = "11 checks on 4x4 inputs, worst relative error " + fmt("%.3g", worst);
  return o;
}

// ---------------------------------------------------------------- 4

Outcome schedules() {
  Outcome o;
  const TrainConfig c = default_train_config(Architecture::unet_cyclegan);
  for (int e = 0; e <= 99; ++e) {
    o.require(lr_schedule(e, c) == 0.0005, "lr at epoch " + std::to_string(e));
  }
  o.require(std::abs(lr_schedule(150, c) - 0.00025) <= 1e-12, "lr at 150 = " + fmt("%.6g", lr_schedule(150, c)));
  o.require(std::abs(lr_schedule(200, c)) <= 1e-12, "lr at 200 = " + fmt("%.3g", lr_schedule(200, c)));
  o.require(additional_identity_weight(0) == 5.0, "identity weight at 0");
  o.require(std::abs(additional_identity_weight(10) - 2.5) <= 1e-12, "identity weight at 10");
  for (int e = 20; e <= 200; ++e) {
    o.require(additional_identity_weight(e) == 0.0, "identity weight at " + std::to_string(e));
  }
  if (o.pass) o.detail = "lr 5e-4 / 2.5e-4 / 0, identity 5 / 2.5 / 0";
  return o;
}

// ---------------------------------------------------------------- 5

Outcome architecture_contracts() {
  Outcome o;
  DiscriminatorSpec ps;
  ps.base_width = 8;
  const Discriminator patch(ps, 1);
  const Tensor x256(3, 256, 256, 0.1f);
  const auto out = patch.forward(x256, nullptr);
  o.require(out.patch.channels() == 1 && out.patch.height() == 16 && out.patch.width() == 16,
            "patch map " + out.patch.shape_string());
  o.require(out.domain_logits.size() == 0, "patch kind emits domain logits");

  DiscriminatorSpec ds = ps;
  ds.kind = DiscriminatorKind::dualhead;
  ds.num_domains = 2;
  const auto two = Discriminator(ds, 2).forward(x256, nullptr);
  o.require(two.patch.height() == 16 && two.patch.width() == 16, "dualhead patch " + two.patch.shape_string());
  o.require(two.domain_logits.size() == 2, "dualhead logits " + two.domain_logits.shape_string());

  GeneratorSpec gs;
  gs.kind = GeneratorKind::conditional;
  gs.num_domains = 2;
  gs.base_width = 8;
  gs.n_resblocks = 2;
  gs.image_size = 64;
  const Generator g(gs, 3);
  Tensor img(3, 64, 64);
  Rng rng(4);
  for (float& v : img.values()) v = static_cast<float>(rng.uniform(-1, 1));
  const Tensor a = g.forward(img, nullptr, 0), b = g.forward(img, nullptr, 1);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(double(a.values()[i]) - b.values()[i]));
  o.require(diff > 1e-3, "label changes output by only " + fmt("%.3g", diff));
  if (o.pass) o.detail = "16x16 patch map, dualhead 16x16 + 2 logits, label effect " + fmt("%.3g", diff);
  return o;
}

// ---------------------------------------------------------------- 6

double ks_distance(std::vector<float> a, std::vector<float> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double worst = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    const float t = j == b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    worst = std::max(worst, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return worst;
}

Outcome baseline_properties() {
  Outcome o;
  for (int t = 0; t < 10; ++t) {
    const Image src = random_image(40 + 4 * t, 40 + 4 * t, 3, 200 + t);
    Image ref = bt::testing::smooth_image(32 + 8 * t, 32 + 8 * t, 3, 300 + t);
    const Image out = color_transfer(src, ref);
    o.require(max_abs_diff(out, color_transfer(src, ref)) == 0.0, "colour transfer not deterministic");

    const Image ls = rgb_to_decorrelated(src), lr = rgb_to_decorrelated(ref);
    for (int c = 0; c < 3; ++c) {
      const std::vector<float> s(ls.plane(c).begin(), ls.plane(c).end());
      const std::vector<float> r(lr.plane(c).begin(), lr.plane(c).end());
      const std::vector<float> m = histogram_match_channel(s, r);
      std::vector<std::size_t> order(s.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](auto p, auto q) { return s[p] < s[q]; });
      for (std::size_t k = 1; k < order.size(); ++k) {
        if (s[order[k - 1]] < s[order[k]] && m[order[k - 1]] > m[order[k]]) {
          o.require(false, "rank order broken in channel " + std::to_string(c));
          break;
        }
      }
      const double ks = ks_distance(m, r);
      const double bound = 2.0 / static_cast<double>(std::min(s.size(), r.size())) + 1e-3;
      o.require(ks <= bound, "KS " + fmt("%.4g", ks) + " above bound " + fmt("%.4g", bound));
    }
  }
  if (o.pass) o.detail = "10 pairs x 3 channels, deterministic, rank-preserving, KS within bound";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "pyramid round trip", pyramid_round_trip},
      {2, "metric identities", metric_identities},
      {3, "loss gradient checks", loss_gradients},
      {4, "schedules", schedules},
      {5, "architecture contracts", architecture_contracts},
      {6, "colour transfer baseline", baseline_properties},
  };
  const auto t0 = std::chrono::steady_clock::now();
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("criterion %2d %s: %s (%s)\n", c.id, o.pass ? "PASS" : "FAIL", c.title, o.detail.c_str());
    std::fflush(stdout);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("property suite runtime %.1f s (budget 120 s)\n", secs);
  if (secs >= 120.0) {
    std::printf("property suite exceeded its runtime budget\n");
    ++failed;
  }
  return failed == 0 ? 0 : 1;
}
