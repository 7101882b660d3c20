#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "biastransfer/networks.hpp"
#include "biastransfer/rng.hpp"
#include "biastransfer/similarity.hpp"

namespace bt {

struct LossWeights {
  double lambda_adv = 1.0;
  double lambda_cyc = 10.0;
  double lambda_id = 10.0;
  double lambda_gp = 10.0;
  double lambda_domain = 1.0;
  double lambda_id_fpg = 10.0;
  double lambda_extra = 5.0;

  void validate() const;
};

enum class ExtraMode { none, ms_ssim, structure, combined };
std::string to_string(ExtraMode m);
ExtraMode parse_extra_mode(const std::string& s);

/// combined = MS-SSIM cycle term plus the decaying additional identity term.
struct ExtraLossConfig {
  ExtraMode mode = ExtraMode::none;
  int decay_epochs = 20;

  bool uses_ms_ssim() const { return mode == ExtraMode::ms_ssim || mode == ExtraMode::combined; }
  bool uses_structure() const { return mode == ExtraMode::structure; }
  bool uses_additional_identity() const { return mode == ExtraMode::combined; }
};

// All kernels below work on double data. A non-empty grad span receives
// the derivative with respect to the named argument and must match its size.

/// Mean absolute error; grad is with respect to b.
double l1_loss(std::span<const double> a, std::span<const double> b, std::span<double> grad_b = {});

/// Least-squares critic objective (mean((r-1)^2) + mean(f^2)) / 2.
double lsgan_discriminator_loss(std::span<const double> real, std::span<const double> fake,
                                std::span<double> grad_real = {}, std::span<double> grad_fake = {});
/// mean((f-1)^2).
double lsgan_generator_loss(std::span<const double> fake, std::span<double> grad_fake = {});

/// Wasserstein critic objective mean(f) - mean(r).
double wgan_critic_loss(std::span<const double> real, std::span<const double> fake,
                        std::span<double> grad_real = {}, std::span<double> grad_fake = {});
/// -mean(f).
double wgan_generator_loss(std::span<const double> fake, std::span<double> grad_fake = {});

/// Softmax cross-entropy of logits against the target index.
double cross_entropy_loss(std::span<const double> logits, int target, std::span<double> grad = {});

/// 1 - ms_ssim on symmetric-range planar data (compared in unit range).
/// scales <= 0 selects the largest scale count that fits (at most 5).
double ms_ssim_loss(PlanarView x, PlanarView y, const SsimConfig& cfg = {}, int scales = 0,
                    std::span<double> grad_y = {});
/// 1 - structure similarity on symmetric-range planar data.
double structure_loss(PlanarView x, PlanarView y, const SsimConfig& cfg = {},
                      std::span<double> grad_y = {});

/// Largest usable MS-SSIM scale count for a square side, capped at 5.
int effective_ms_ssim_scales(int side, const SsimConfig& cfg = {});

/// lambda_extra * max(0, 1 - epoch / decay_epochs).
double additional_identity_weight(int epoch, int decay_epochs = 20, double lambda_extra = 5.0);

// ------------------------------------------------------ tensor front-ends

enum class GanSide { generator, discriminator };

std::vector<double> to_double(const Tensor& t);
/// Copies values into a tensor shaped like `like`.
Tensor from_double(std::span<const double> v, const Tensor& like);

/// Least-squares adversarial loss on patch maps; `real` is ignored on the
/// generator side.
double adversarial_loss(const Tensor& real, const Tensor& fake, GanSide side);

double cycle_loss(const Tensor& x, const Tensor& x_cycled, Tensor* grad_cycled = nullptr);
double identity_loss(const Tensor& y, const Tensor& g_y, Tensor* grad_g_y = nullptr);
double ms_ssim_loss(const Tensor& x, const Tensor& y, const SsimConfig& cfg = {}, int scales = 0,
                    Tensor* grad_y = nullptr);
double structure_loss(const Tensor& x, const Tensor& y, const SsimConfig& cfg = {},
                      Tensor* grad_y = nullptr);
double domain_classification_loss(const Tensor& logits, int target_domain, Tensor* grad = nullptr);
/// L1 between x and its translation to its own domain; label must equal
/// source_domain.
double conditional_identity_loss(const Tensor& x, const Tensor& g_x, int label, int source_domain,
                                 Tensor* grad_g_x = nullptr);

/// Raw (unweighted) generator loss terms of one step.
struct GeneratorLossTerms {
  double adv = 0.0;
  double cyc = 0.0;
  double id = 0.0;
  double domain = 0.0;
  double ms_ssim = 0.0;
  double structure = 0.0;
  double extra_identity = 0.0;
};

/// Weight applied to each raw term; identical factors scale the gradients.
struct TermCoefficients {
  double adv = 0.0;
  double cyc = 0.0;
  double id = 0.0;
  double domain = 0.0;
  double ms_ssim = 0.0;
  double structure = 0.0;
  double extra_identity = 0.0;
};

TermCoefficients coefficients(Architecture arch, const LossWeights& w, const ExtraLossConfig& extra,
                              int epoch);

/// Weighted sum of the terms under coefficients(arch, w, extra, epoch).
double total_generator_loss(const GeneratorLossTerms& terms, const LossWeights& w,
                            const ExtraLossConfig& extra, int epoch,
                            Architecture arch = Architecture::cyclegan);

// ------------------------------------------------------ gradient penalty

/// A critic D: R^n -> R (mean patch score) usable by gradient_penalty.
template <class C, class T>
concept Critic = requires(C& c, std::span<const T> x, std::span<T> g, T s) {
  { c.input_gradient(x, g) } -> std::convertible_to<T>;
  c.accumulate_parameter_gradient(x, s);
};

struct PenaltyResult {
  double penalty = 0.0;
  double grad_norm = 0.0;
  double mix = 0.0;
};

/// (||grad_x D(x_hat)|| - 1)^2 at x_hat = u*real + (1-u)*fake, u ~ U[0,1).
/// When weight != 0, adds weight * d(penalty)/d(theta) to the critic's
/// parameter gradients. The mixed second derivative is taken as a central
/// difference of parameter gradients along v = g/||g||:
///   d||g||/d(theta) = (grad_theta D(x_hat + h v) - grad_theta D(x_hat - h v)) / 2h.
template <class T, Critic<T> C>
PenaltyResult gradient_penalty(C& critic, std::span<const T> real, std::span<const T> fake, Rng& rng,
                               T weight, T step) {
  PenaltyResult out;
  const T u = static_cast<T>(rng.uniform());
  out.mix = static_cast<double>(u);
  std::vector<T> x_hat(real.size());
  for (std::size_t i = 0; i < x_hat.size(); ++i) x_hat[i] = u * real[i] + (T(1) - u) * fake[i];
  std::vector<T> g(real.size());
  critic.input_gradient(std::span<const T>(x_hat), std::span<T>(g));
  double sq = 0.0;
  for (T v : g) sq += static_cast<double>(v) * static_cast<double>(v);
  const double norm = std::sqrt(sq);
  out.grad_norm = norm;
  out.penalty = (norm - 1.0) * (norm - 1.0);
  if (weight == T(0) || norm == 0.0) return out;

  const T scale = static_cast<T>(static_cast<double>(weight) * 2.0 * (norm - 1.0) /
                                 (2.0 * static_cast<double>(step)));
  std::vector<T> probe(x_hat.size());
  for (int sign : {1, -1}) {
    for (std::size_t i = 0; i < probe.size(); ++i) {
      probe[i] = x_hat[i] + static_cast<T>(sign * static_cast<double>(step) * g[i] / norm);
    }
    critic.accumulate_parameter_gradient(std::span<const T>(probe), static_cast<T>(sign) * scale);
  }
  return out;
}

/// Adapts a Discriminator to the Critic interface (mean of the patch map).
class DiscriminatorCritic {
 public:
  explicit DiscriminatorCritic(Discriminator& d) : d_(d) {}
  float input_gradient(std::span<const float> x, std::span<float> grad);
  void accumulate_parameter_gradient(std::span<const float> x, float scale);

 private:
  Tensor as_tensor(std::span<const float> x) const;
  Discriminator& d_;
};

}  // namespace bt
