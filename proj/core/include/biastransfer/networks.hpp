#pragma once

#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "biastransfer/nn/layers.hpp"

namespace bt {

using nn::Tensor;
using nn::Trace;

enum class GeneratorKind { resnet, unet, conditional };
enum class DiscriminatorKind { patch, dualhead };
enum class Architecture { cyclegan, unet_cyclegan, fpg };

std::string to_string(GeneratorKind k);
std::string to_string(DiscriminatorKind k);
std::string to_string(Architecture a);
Architecture parse_architecture(const std::string& s);

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::resnet;
  int in_channels = 3;
  int base_width = 64;
  int n_resblocks = 9;  // resnet and conditional
  int n_down = 2;       // stride-2 stages; U-Net needs >= 4
  int num_domains = 0;  // conditional only
  int image_size = 256;

  void validate() const;
  bool operator==(const GeneratorSpec&) const = default;
};

struct DiscriminatorSpec {
  DiscriminatorKind kind = DiscriminatorKind::patch;
  int image_size = 256;
  int patch_grid = 16;
  int base_width = 64;
  int num_domains = 0;  // dualhead only

  /// Number of stride-2 stages, log2(image_size / patch_grid).
  int stages() const;
  void validate() const;
  bool operator==(const DiscriminatorSpec&) const = default;
};

nlohmann::json to_json(const GeneratorSpec& s);
nlohmann::json to_json(const DiscriminatorSpec& s);
GeneratorSpec generator_spec_from_json(const nlohmann::json& j);
DiscriminatorSpec discriminator_spec_from_json(const nlohmann::json& j);

/// Image-to-image generator mapping symmetric-range 3-channel images to
/// symmetric-range images of the same size. The conditional kind also takes
/// a target domain index, broadcast as one-hot planes next to the image.
class Generator {
 public:
  Generator(const GeneratorSpec& spec, std::uint64_t seed);
  ~Generator();
  Generator(Generator&&) noexcept;
  Generator& operator=(Generator&&) noexcept;

  /// target_domain is required (and only accepted) for the conditional kind.
  Tensor forward(const Tensor& x, Trace* trace, int target_domain = -1) const;
  /// Gradient with respect to the image input.
  Tensor backward(Trace& trace, const Tensor& grad_out);

  nn::ParameterRefs parameters();
  std::size_t parameter_count();
  const GeneratorSpec& spec() const { return spec_; }
  void set_requires_grad(bool enabled) { nn::set_requires_grad(parameters(), enabled); }

  /// U-Net only: replace the bottleneck activation by zeros (probe for
  /// information flow through the skip connections).
  void set_zero_bottleneck(bool enabled);

 private:
  GeneratorSpec spec_;
  std::unique_ptr<nn::Layer> body_;
  class UnetBlock* innermost_ = nullptr;
};

struct DiscriminatorOutput {
  Tensor patch;          // 1 x grid x grid
  Tensor domain_logits;  // num_domains x 1 x 1, dualhead only
};

/// PatchGAN-style critic. The dualhead kind adds a domain classification
/// output on the shared trunk.
class Discriminator {
 public:
  Discriminator(const DiscriminatorSpec& spec, std::uint64_t seed);

  DiscriminatorOutput forward(const Tensor& x, Trace* trace) const;
  /// grad_logits may be null (treated as zero); dualhead traces are always
  /// consumed completely.
  Tensor backward(Trace& trace, const Tensor& grad_patch, const Tensor* grad_logits = nullptr);

  nn::ParameterRefs parameters();
  std::size_t parameter_count();
  const DiscriminatorSpec& spec() const { return spec_; }
  void set_requires_grad(bool enabled) { nn::set_requires_grad(parameters(), enabled); }

 private:
  DiscriminatorSpec spec_;
  nn::Sequential trunk_;
  nn::Sequential patch_head_;
  nn::Sequential domain_head_;
};

/// Trainable parameter count of the StarGAN discriminator layout (k4 s2
/// stages doubling from conv_dim, a 3x3 source head and a
/// (image_size / 2^repeat)-sized class head).
std::size_t stargan_discriminator_parameters(int image_size, int conv_dim, int repeat_num,
                                             int num_domains);

struct BundleSpec {
  Architecture architecture = Architecture::unet_cyclegan;
  GeneratorSpec generator;
  DiscriminatorSpec discriminator;
  std::vector<std::string> domain_names = {"NEW", "TAR"};
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const BundleSpec&) const = default;
};

nlohmann::json to_json(const BundleSpec& s);
BundleSpec bundle_spec_from_json(const nlohmann::json& j);

/// Default specs for an architecture at a model resolution.
BundleSpec default_bundle_spec(Architecture arch, int image_size, int base_width,
                               std::vector<std::string> domains = {"NEW", "TAR"});

/// Generators and discriminators of one model. Cycle variants hold
/// {G: domain0 -> domain1, F: domain1 -> domain0} and {D_domain0,
/// D_domain1}; FPG holds a single conditional generator and dualhead
/// discriminator.
struct ModelBundle {
  BundleSpec spec;
  std::vector<Generator> generators;
  std::vector<Discriminator> discriminators;

  nn::ParameterRefs generator_parameters();
  nn::ParameterRefs discriminator_parameters();
  nn::ParameterRefs all_parameters();
};

ModelBundle make_bundle(const BundleSpec& spec);

}  // namespace bt
