#include "biastransfer/losses.hpp"

#include <algorithm>
#include <cmath>

#include "biastransfer/errors.hpp"

namespace bt {

void LossWeights::validate() const {
  for (double v : {lambda_adv, lambda_cyc, lambda_id, lambda_gp, lambda_domain, lambda_id_fpg,
                   lambda_extra}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weights must be non-negative");
  }
}

std::string to_string(ExtraMode m) {
  switch (m) {
    case ExtraMode::none: return "none";
    case ExtraMode::ms_ssim: return "ms_ssim";
    case ExtraMode::structure: return "structure";
    case ExtraMode::combined: return "combined";
  }
  return "?";
}

ExtraMode parse_extra_mode(const std::string& s) {
  if (s == "none") return ExtraMode::none;
  if (s == "ms_ssim") return ExtraMode::ms_ssim;
  if (s == "structure") return ExtraMode::structure;
  if (s == "combined") return ExtraMode::combined;
  if (s.find("structure") != std::string::npos) {
    throw ConfigError("the structure loss cannot be combined with other extra losses ('" + s + "')");
  }
  throw ConfigError("unknown extra loss mode '" + s + "' (none, ms_ssim, structure, combined)");
}

namespace {

void check_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": size " + std::to_string(a) + " vs " +
                         std::to_string(b));
  }
}

void check_grad(std::span<double> g, std::size_t n) {
  if (!g.empty() && g.size() != n) throw DimensionError("gradient buffer has the wrong size");
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double l1_loss(std::span<const double> a, std::span<const double> b, std::span<double> grad_b) {
  check_same(a.size(), b.size(), "l1_loss");
  check_grad(grad_b, b.size());
  if (a.empty()) throw DimensionError("l1_loss on empty input");
  const double inv = 1.0 / static_cast<double>(a.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = b[i] - a[i];
    s += std::abs(d);
    if (!grad_b.empty()) grad_b[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
  }
  return s * inv;
}

double lsgan_discriminator_loss(std::span<const double> real, std::span<const double> fake,
                                std::span<double> grad_real, std::span<double> grad_fake) {
  check_grad(grad_real, real.size());
  check_grad(grad_fake, fake.size());
  double r = 0.0, f = 0.0;
  for (std::size_t i = 0; i < real.size(); ++i) {
    r += (real[i] - 1.0) * (real[i] - 1.0);
    if (!grad_real.empty()) grad_real[i] = (real[i] - 1.0) / static_cast<double>(real.size());
  }
  for (std::size_t i = 0; i < fake.size(); ++i) {
    f += fake[i] * fake[i];
    if (!grad_fake.empty()) grad_fake[i] = fake[i] / static_cast<double>(fake.size());
  }
  return 0.5 * (r / static_cast<double>(real.size()) + f / static_cast<double>(fake.size()));
}

double lsgan_generator_loss(std::span<const double> fake, std::span<double> grad_fake) {
  check_grad(grad_fake, fake.size());
  double f = 0.0;
  const double inv = 1.0 / static_cast<double>(fake.size());
  for (std::size_t i = 0; i < fake.size(); ++i) {
    f += (fake[i] - 1.0) * (fake[i] - 1.0);
    if (!grad_fake.empty()) grad_fake[i] = 2.0 * (fake[i] - 1.0) * inv;
  }
  return f * inv;
}

double wgan_critic_loss(std::span<const double> real, std::span<const double> fake,
                        std::span<double> grad_real, std::span<double> grad_fake) {
  check_grad(grad_real, real.size());
  check_grad(grad_fake, fake.size());
  std::fill(grad_real.begin(), grad_real.end(), -1.0 / static_cast<double>(real.size()));
  std::fill(grad_fake.begin(), grad_fake.end(), 1.0 / static_cast<double>(fake.size()));
  return mean_of(fake) - mean_of(real);
}

double wgan_generator_loss(std::span<const double> fake, std::span<double> grad_fake) {
  check_grad(grad_fake, fake.size());
  std::fill(grad_fake.begin(), grad_fake.end(), -1.0 / static_cast<double>(fake.size()));
  return -mean_of(fake);
}

double cross_entropy_loss(std::span<const double> logits, int target, std::span<double> grad) {
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
    throw ContractError("domain index " + std::to_string(target) + " out of range for " +
                        std::to_string(logits.size()) + " logits");
  }
  check_grad(grad, logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double log_z = m + std::log(z);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    grad[i] = std::exp(logits[i] - log_z) - (static_cast<int>(i) == target ? 1.0 : 0.0);
  }
  return log_z - logits[static_cast<std::size_t>(target)];
}

int effective_ms_ssim_scales(int side, const SsimConfig& cfg) {
  return std::min(5, max_ms_ssim_scales(side, cfg));
}

namespace {

std::vector<double> to_unit(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = 0.5 * (v[i] + 1.0);
  return out;
}

template <class Kernel>
double similarity_loss(PlanarView x, PlanarView y, std::span<double> grad_y, Kernel&& kernel) {
  check_same(x.data.size(), y.data.size(), "similarity loss");
  check_grad(grad_y, y.data.size());
  const auto xu = to_unit(x.data);
  const auto yu = to_unit(y.data);
  const PlanarView xv{xu, x.channels, x.height, x.width};
  const PlanarView yv{yu, y.channels, y.height, y.width};
  const double score = kernel(xv, yv, grad_y);
  // d(1 - s)/dy = -ds/du * du/dy with du/dy = 1/2.
  for (double& g : grad_y) g *= -0.5;
  return 1.0 - score;
}

}  // namespace

double ms_ssim_loss(PlanarView x, PlanarView y, const SsimConfig& cfg, int scales,
                    std::span<double> grad_y) {
  if (scales <= 0) scales = effective_ms_ssim_scales(std::min(x.height, x.width), cfg);
  return similarity_loss(x, y, grad_y, [&](PlanarView a, PlanarView b, std::span<double> g) {
    return ms_ssim_planar(a, b, cfg, scales, g);
  });
}

double structure_loss(PlanarView x, PlanarView y, const SsimConfig& cfg, std::span<double> grad_y) {
  return similarity_loss(x, y, grad_y, [&](PlanarView a, PlanarView b, std::span<double> g) {
    return structure_planar(a, b, cfg, g);
  });
}

double additional_identity_weight(int epoch, int decay_epochs, double lambda_extra) {
  if (epoch < 0) throw ContractError("epoch must be non-negative");
  if (decay_epochs <= 0) return 0.0;
  return lambda_extra * std::max(0.0, 1.0 - static_cast<double>(epoch) / decay_epochs);
}

// ------------------------------------------------------ tensor front-ends

std::vector<double> to_double(const Tensor& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

Tensor from_double(std::span<const double> v, const Tensor& like) {
  check_same(v.size(), like.size(), "from_double");
  Tensor t(like.channels(), like.height(), like.width());
  std::transform(v.begin(), v.end(), t.data(), [](double d) { return static_cast<float>(d); });
  return t;
}

namespace {

void check_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": " + a.shape_string() + " vs " + b.shape_string());
  }
}

PlanarView view(const std::vector<double>& d, const Tensor& t) {
  return {d, t.channels(), t.height(), t.width()};
}

template <class F>
double with_grad(const Tensor& like, Tensor* grad, F&& f) {
  std::vector<double> g(grad ? like.size() : 0);
  const double v = f(std::span<double>(g));
  if (grad) *grad = from_double(g, like);
  return v;
}

}  // namespace

double adversarial_loss(const Tensor& real, const Tensor& fake, GanSide side) {
  const auto f = to_double(fake);
  if (side == GanSide::generator) return lsgan_generator_loss(f);
  const auto r = to_double(real);
  return lsgan_discriminator_loss(r, f);
}

double cycle_loss(const Tensor& x, const Tensor& x_cycled, Tensor* grad_cycled) {
  check_shape(x, x_cycled, "cycle_loss");
  const auto a = to_double(x), b = to_double(x_cycled);
  return with_grad(x_cycled, grad_cycled, [&](std::span<double> g) { return l1_loss(a, b, g); });
}

double identity_loss(const Tensor& y, const Tensor& g_y, Tensor* grad_g_y) {
  check_shape(y, g_y, "identity_loss");
  const auto a = to_double(y), b = to_double(g_y);
  return with_grad(g_y, grad_g_y, [&](std::span<double> g) { return l1_loss(a, b, g); });
}

double ms_ssim_loss(const Tensor& x, const Tensor& y, const SsimConfig& cfg, int scales,
                    Tensor* grad_y) {
  check_shape(x, y, "ms_ssim_loss");
  const auto a = to_double(x), b = to_double(y);
  return with_grad(y, grad_y, [&](std::span<double> g) {
    return ms_ssim_loss(view(a, x), view(b, y), cfg, scales, g);
  });
}

double structure_loss(const Tensor& x, const Tensor& y, const SsimConfig& cfg, Tensor* grad_y) {
  check_shape(x, y, "structure_loss");
  const auto a = to_double(x), b = to_double(y);
  return with_grad(y, grad_y, [&](std::span<double> g) {
    return structure_loss(view(a, x), view(b, y), cfg, g);
  });
}

double domain_classification_loss(const Tensor& logits, int target_domain, Tensor* grad) {
  const auto l = to_double(logits);
  return with_grad(logits, grad,
                   [&](std::span<double> g) { return cross_entropy_loss(l, target_domain, g); });
}

double conditional_identity_loss(const Tensor& x, const Tensor& g_x, int label, int source_domain,
                                 Tensor* grad_g_x) {
  if (label != source_domain) {
    throw ContractError("conditional identity loss needs label == source domain (" +
                        std::to_string(label) + " vs " + std::to_string(source_domain) + ")");
  }
  return identity_loss(x, g_x, grad_g_x);
}

TermCoefficients coefficients(Architecture arch, const LossWeights& w, const ExtraLossConfig& extra,
                              int epoch) {
  TermCoefficients c;
  c.adv = w.lambda_adv;
  c.cyc = w.lambda_cyc;
  if (arch == Architecture::fpg) {
    c.id = w.lambda_id_fpg;
    c.domain = w.lambda_domain;
  } else {
    c.id = w.lambda_id;
  }
  if (extra.uses_ms_ssim()) c.ms_ssim = w.lambda_extra;
  if (extra.uses_structure()) c.structure = w.lambda_extra;
  if (extra.uses_additional_identity()) {
    c.extra_identity = additional_identity_weight(epoch, extra.decay_epochs, w.lambda_extra);
  }
  return c;
}

double total_generator_loss(const GeneratorLossTerms& t, const LossWeights& w,
                            const ExtraLossConfig& extra, int epoch, Architecture arch) {
  const TermCoefficients c = coefficients(arch, w, extra, epoch);
  return c.adv * t.adv + c.cyc * t.cyc + c.id * t.id + c.domain * t.domain +
         c.ms_ssim * t.ms_ssim + c.structure * t.structure + c.extra_identity * t.extra_identity;
}

// ------------------------------------------------------ critic adapter

Tensor DiscriminatorCritic::as_tensor(std::span<const float> x) const {
  const int s = d_.spec().image_size;
  Tensor t(3, s, s);
  check_same(x.size(), t.size(), "critic input");
  std::copy(x.begin(), x.end(), t.data());
  return t;
}

float DiscriminatorCritic::input_gradient(std::span<const float> x, std::span<float> grad) {
  Trace trace;
  const auto out = d_.forward(as_tensor(x), &trace);
  const float inv = 1.0f / static_cast<float>(out.patch.size());
  d_.set_requires_grad(false);
  const Tensor g = d_.backward(trace, Tensor(1, out.patch.height(), out.patch.width(), inv));
  d_.set_requires_grad(true);
  std::copy(g.values().begin(), g.values().end(), grad.begin());
  double mean = 0.0;
  for (float v : out.patch.values()) mean += v;
  return static_cast<float>(mean * inv);
}

void DiscriminatorCritic::accumulate_parameter_gradient(std::span<const float> x, float scale) {
  Trace trace;
  const auto out = d_.forward(as_tensor(x), &trace);
  const float g = scale / static_cast<float>(out.patch.size());
  d_.backward(trace, Tensor(1, out.patch.height(), out.patch.width(), g));
}

}  // namespace bt
