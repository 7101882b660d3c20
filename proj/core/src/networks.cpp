#include "biastransfer/networks.hpp"

#include <algorithm>

#include "biastransfer/errors.hpp"
#include "biastransfer/rng.hpp"

namespace bt {

using nn::Conv2d;
using nn::ConvTranspose2d;
using nn::InstanceNorm;
using nn::LeakyRelu;
using nn::PadMode;
using nn::Sequential;

namespace {

constexpr double kInitStd = 0.02;

int log2_exact(int v) {
  if (v < 1) return -1;
  int k = 0;
  while ((1 << k) < v) ++k;
  return (1 << k) == v ? k : -1;
}

Sequential resnet_block(int width) {
  Sequential body;
  body.emplace<Conv2d>(width, width, 3, 1, 1, PadMode::reflect)
      .emplace<InstanceNorm>()
      .emplace<LeakyRelu>(0.0f)
      .emplace<Conv2d>(width, width, 3, 1, 1, PadMode::reflect)
      .emplace<InstanceNorm>();
  return body;
}

std::unique_ptr<nn::Layer> resnet_body(const GeneratorSpec& s, int input_channels) {
  auto seq = std::make_unique<Sequential>();
  const int w = s.base_width;
  seq->emplace<Conv2d>(input_channels, w, 7, 1, 3, PadMode::reflect);
  // Instance norm would subtract the spatially constant contribution of the
  // one-hot label planes, so the conditional kind mixes label and image
  // through the first ReLU before normalising.
  if (s.kind != GeneratorKind::conditional) seq->emplace<InstanceNorm>();
  seq->emplace<LeakyRelu>(0.0f);
  int ch = w;
  for (int i = 0; i < s.n_down; ++i) {
    seq->emplace<Conv2d>(ch, ch * 2, 3, 2, 1, PadMode::reflect)
        .emplace<InstanceNorm>()
        .emplace<LeakyRelu>(0.0f);
    ch *= 2;
  }
  for (int i = 0; i < s.n_resblocks; ++i) seq->emplace<nn::ResidualBlock>(resnet_block(ch));
  for (int i = 0; i < s.n_down; ++i) {
    seq->emplace<ConvTranspose2d>(ch, ch / 2, 3, 2, 1, 1)
        .emplace<InstanceNorm>()
        .emplace<LeakyRelu>(0.0f);
    ch /= 2;
  }
  seq->emplace<Conv2d>(ch, 3, 7, 1, 3, PadMode::reflect).emplace<nn::Tanh>();
  return seq;
}

}  // namespace

/// One level of the U-Net: down path, nested inner level, up path, and the
/// skip concatenation [x, up(inner(down(x)))] on every level but the
/// outermost.
class UnetBlock final : public nn::Layer {
 public:
  UnetBlock(int outer_nc, int inner_nc, int input_nc, std::unique_ptr<UnetBlock> inner,
            bool outermost)
      : inner_(std::move(inner)), outermost_(outermost) {
    const bool innermost = inner_ == nullptr;
    if (!outermost) down_.emplace<LeakyRelu>(0.2f);
    down_.emplace<Conv2d>(input_nc, inner_nc, 4, 2, 1, PadMode::reflect);
    if (!outermost && !innermost) down_.emplace<InstanceNorm>();

    up_.emplace<LeakyRelu>(0.0f);
    up_.emplace<ConvTranspose2d>(innermost ? inner_nc : inner_nc * 2, outer_nc, 4, 2, 1, 0);
    if (outermost) {
      up_.emplace<nn::Tanh>();
    } else {
      up_.emplace<InstanceNorm>();
    }
  }

  UnetBlock* innermost() { return inner_ ? inner_->innermost() : this; }
  void set_zero(bool z) { zero_ = z; }

  Tensor forward(const Tensor& x, Trace* trace) const override {
    Tensor h = down_.forward(x, trace);
    if (inner_) {
      h = inner_->forward(h, trace);
    } else if (zero_) {
      h.fill(0.0f);
    }
    Tensor u = up_.forward(h, trace);
    if (outermost_) return u;
    if (trace) {
      nn::Cache c;
      c.ints = {x.channels()};
      trace->push(std::move(c));
    }
    return nn::concat_channels(x, u);
  }

  Tensor backward(Trace& trace, const Tensor& grad_out) override {
    Tensor du = grad_out;
    Tensor dskip;
    if (!outermost_) {
      const int skip_channels = trace.pop().ints[0];
      dskip = nn::slice_channels(grad_out, 0, skip_channels);
      du = nn::slice_channels(grad_out, skip_channels, grad_out.channels() - skip_channels);
    }
    Tensor dh = up_.backward(trace, du);
    if (inner_) {
      dh = inner_->backward(trace, dh);
    } else if (zero_) {
      dh.fill(0.0f);
    }
    Tensor dx = down_.backward(trace, dh);
    if (!outermost_) dx += dskip;
    return dx;
  }

  void collect_parameters(nn::ParameterRefs& out) override {
    down_.collect_parameters(out);
    if (inner_) inner_->collect_parameters(out);
    up_.collect_parameters(out);
  }

 private:
  Sequential down_;
  Sequential up_;
  std::unique_ptr<UnetBlock> inner_;
  bool outermost_;
  bool zero_ = false;
};

std::string to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::resnet: return "resnet";
    case GeneratorKind::unet: return "unet";
    case GeneratorKind::conditional: return "conditional";
  }
  return "?";
}

std::string to_string(DiscriminatorKind k) {
  return k == DiscriminatorKind::patch ? "patch" : "dualhead";
}

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::cyclegan: return "cyclegan";
    case Architecture::unet_cyclegan: return "unet_cyclegan";
    case Architecture::fpg: return "fpg";
  }
  return "?";
}

Architecture parse_architecture(const std::string& s) {
  if (s == "cyclegan") return Architecture::cyclegan;
  if (s == "unet_cyclegan") return Architecture::unet_cyclegan;
  if (s == "fpg") return Architecture::fpg;
  throw ConfigError("unknown architecture '" + s + "' (cyclegan, unet_cyclegan, fpg)");
}

void GeneratorSpec::validate() const {
  if (in_channels != 3) throw ConfigError("generators take 3-channel images");
  if (base_width < 1) throw ConfigError("generator base_width must be positive");
  if (image_size < 8) throw ConfigError("generator image_size must be >= 8");
  if (kind == GeneratorKind::conditional && num_domains < 2) {
    throw ConfigError("conditional generator needs num_domains >= 2");
  }
  if (kind != GeneratorKind::conditional && num_domains != 0) {
    throw ConfigError("num_domains is only valid for the conditional generator");
  }
  if (kind == GeneratorKind::unet) {
    if (n_down < 4) throw ConfigError("U-Net generator needs n_down >= 4");
  } else {
    if (n_down < 0 || n_resblocks < 0) throw ConfigError("negative generator depth");
  }
  if (n_down >= 31 || image_size % (1 << n_down) != 0 || (image_size >> n_down) < 1) {
    throw DimensionError("image_size " + std::to_string(image_size) + " not divisible by 2^" +
                         std::to_string(n_down));
  }
  if (kind != GeneratorKind::unet && (image_size >> n_down) < 2) {
    throw DimensionError("resnet bottleneck smaller than 2x2");
  }
}

int DiscriminatorSpec::stages() const {
  if (patch_grid < 1 || image_size % patch_grid != 0) return -1;
  return log2_exact(image_size / patch_grid);
}

void DiscriminatorSpec::validate() const {
  const int n = stages();
  if (n < 1 || n > 7) {
    throw DimensionError("invalid patch grid " + std::to_string(patch_grid) + " for input size " +
                         std::to_string(image_size));
  }
  if (base_width < 1) throw ConfigError("discriminator base_width must be positive");
  if (kind == DiscriminatorKind::dualhead && num_domains < 2) {
    throw ConfigError("dualhead discriminator needs num_domains >= 2");
  }
  if (kind == DiscriminatorKind::patch && num_domains != 0) {
    throw ConfigError("num_domains is only valid for the dualhead discriminator");
  }
}

nlohmann::json to_json(const GeneratorSpec& s) {
  return {{"kind", to_string(s.kind)},         {"in_channels", s.in_channels},
          {"base_width", s.base_width},        {"n_resblocks", s.n_resblocks},
          {"n_down", s.n_down},                {"num_domains", s.num_domains},
          {"image_size", s.image_size}};
}

nlohmann::json to_json(const DiscriminatorSpec& s) {
  return {{"kind", to_string(s.kind)},   {"image_size", s.image_size},
          {"patch_grid", s.patch_grid},  {"base_width", s.base_width},
          {"num_domains", s.num_domains}};
}

GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
  GeneratorSpec s;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "resnet") {
    s.kind = GeneratorKind::resnet;
  } else if (kind == "unet") {
    s.kind = GeneratorKind::unet;
  } else if (kind == "conditional") {
    s.kind = GeneratorKind::conditional;
  } else {
    throw ConfigError("unknown generator kind " + kind);
  }
  s.in_channels = j.at("in_channels").get<int>();
  s.base_width = j.at("base_width").get<int>();
  s.n_resblocks = j.at("n_resblocks").get<int>();
  s.n_down = j.at("n_down").get<int>();
  s.num_domains = j.at("num_domains").get<int>();
  s.image_size = j.at("image_size").get<int>();
  return s;
}

DiscriminatorSpec discriminator_spec_from_json(const nlohmann::json& j) {
  DiscriminatorSpec s;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "patch") {
    s.kind = DiscriminatorKind::patch;
  } else if (kind == "dualhead") {
    s.kind = DiscriminatorKind::dualhead;
  } else {
    throw ConfigError("unknown discriminator kind " + kind);
  }
  s.image_size = j.at("image_size").get<int>();
  s.patch_grid = j.at("patch_grid").get<int>();
  s.base_width = j.at("base_width").get<int>();
  s.num_domains = j.at("num_domains").get<int>();
  return s;
}

// ------------------------------------------------------------- Generator

Generator::Generator(const GeneratorSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  if (spec_.kind == GeneratorKind::unet) {
    std::unique_ptr<UnetBlock> block;
    auto width = [&](int level) { return spec_.base_width * (1 << std::min(level, 3)); };
    for (int level = spec_.n_down - 1; level >= 0; --level) {
      const bool outermost = level == 0;
      const int outer_nc = outermost ? 3 : width(level - 1);
      const int input_nc = outermost ? spec_.in_channels : width(level - 1);
      block = std::make_unique<UnetBlock>(outer_nc, width(level), input_nc, std::move(block),
                                          outermost);
    }
    innermost_ = block->innermost();
    body_ = std::move(block);
  } else {
    const int input_channels =
        spec_.in_channels + (spec_.kind == GeneratorKind::conditional ? spec_.num_domains : 0);
    body_ = resnet_body(spec_, input_channels);
  }
  Rng rng(seed);
  nn::init_normal(parameters(), rng, kInitStd);
}

Generator::~Generator() = default;
Generator::Generator(Generator&&) noexcept = default;
Generator& Generator::operator=(Generator&&) noexcept = default;

Tensor Generator::forward(const Tensor& x, Trace* trace, int target_domain) const {
  if (x.channels() != 3 || x.height() != spec_.image_size || x.width() != spec_.image_size) {
    throw DimensionError("generator expects 3x" + std::to_string(spec_.image_size) + "x" +
                         std::to_string(spec_.image_size) + ", got " + x.shape_string());
  }
  if (spec_.kind != GeneratorKind::conditional) {
    if (target_domain != -1) throw ContractError("only the conditional generator takes a label");
    return body_->forward(x, trace);
  }
  if (target_domain < 0 || target_domain >= spec_.num_domains) {
    throw ContractError("target domain " + std::to_string(target_domain) + " out of range");
  }
  Tensor label(spec_.num_domains, x.height(), x.width(), 0.0f);
  std::fill_n(label.data() + label.plane_size() * target_domain, label.plane_size(), 1.0f);
  return body_->forward(nn::concat_channels(x, label), trace);
}

Tensor Generator::backward(Trace& trace, const Tensor& grad_out) {
  Tensor g = body_->backward(trace, grad_out);
  if (spec_.kind == GeneratorKind::conditional) g = nn::slice_channels(g, 0, 3);
  return g;
}

nn::ParameterRefs Generator::parameters() {
  nn::ParameterRefs refs;
  body_->collect_parameters(refs);
  return refs;
}

std::size_t Generator::parameter_count() { return nn::count_parameters(parameters()); }

void Generator::set_zero_bottleneck(bool enabled) {
  if (!innermost_) throw ContractError("bottleneck probe is only available for U-Net generators");
  innermost_->set_zero(enabled);
}

// --------------------------------------------------------- Discriminator

Discriminator::Discriminator(const DiscriminatorSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  const bool dual = spec_.kind == DiscriminatorKind::dualhead;
  int ch = 3;
  for (int i = 0; i < spec_.stages(); ++i) {
    const int next = spec_.base_width * (1 << std::min(i, 3));
    trunk_.emplace<Conv2d>(ch, next, 4, 2, 1, PadMode::zero);
    if (i > 0 && !dual) trunk_.emplace<InstanceNorm>();
    trunk_.emplace<LeakyRelu>(0.2f);
    ch = next;
  }
  patch_head_.emplace<Conv2d>(ch, 1, 3, 1, 1, PadMode::zero);
  if (dual) {
    domain_head_.emplace<Conv2d>(ch, spec_.num_domains, 3, 1, 1, PadMode::zero)
        .emplace<nn::GlobalAvgPool>();
  }
  Rng rng(seed);
  nn::init_normal(parameters(), rng, kInitStd);
}

DiscriminatorOutput Discriminator::forward(const Tensor& x, Trace* trace) const {
  if (x.channels() != 3 || x.height() != spec_.image_size || x.width() != spec_.image_size) {
    throw DimensionError("discriminator expects 3x" + std::to_string(spec_.image_size) + "x" +
                         std::to_string(spec_.image_size) + ", got " + x.shape_string());
  }
  DiscriminatorOutput out;
  const Tensor features = trunk_.forward(x, trace);
  out.patch = patch_head_.forward(features, trace);
  if (spec_.kind == DiscriminatorKind::dualhead) {
    out.domain_logits = domain_head_.forward(features, trace);
  }
  return out;
}

Tensor Discriminator::backward(Trace& trace, const Tensor& grad_patch, const Tensor* grad_logits) {
  Tensor g_features;
  if (spec_.kind == DiscriminatorKind::dualhead) {
    const Tensor zeros(spec_.num_domains, 1, 1, 0.0f);
    g_features = domain_head_.backward(trace, grad_logits ? *grad_logits : zeros);
  } else if (grad_logits) {
    throw ContractError("patch discriminator has no domain output");
  }
  Tensor g_patch = patch_head_.backward(trace, grad_patch);
  if (g_features.empty()) {
    g_features = std::move(g_patch);
  } else {
    g_features += g_patch;
  }
  return trunk_.backward(trace, g_features);
}

nn::ParameterRefs Discriminator::parameters() {
  nn::ParameterRefs refs;
  trunk_.collect_parameters(refs);
  patch_head_.collect_parameters(refs);
  domain_head_.collect_parameters(refs);
  return refs;
}

std::size_t Discriminator::parameter_count() { return nn::count_parameters(parameters()); }

std::size_t stargan_discriminator_parameters(int image_size, int conv_dim, int repeat_num,
                                             int num_domains) {
  std::size_t total = 0;
  std::size_t curr = static_cast<std::size_t>(conv_dim);
  total += 3 * 16 * curr + curr;
  for (int i = 1; i < repeat_num; ++i) {
    total += curr * 16 * (2 * curr) + 2 * curr;
    curr *= 2;
  }
  const std::size_t ks = static_cast<std::size_t>(image_size >> repeat_num);
  total += curr * 9;                                           // source head, no bias
  total += curr * static_cast<std::size_t>(num_domains) * ks * ks;  // class head, no bias
  return total;
}

// ---------------------------------------------------------------- bundle

void BundleSpec::validate() const {
  generator.validate();
  discriminator.validate();
  if (generator.image_size != discriminator.image_size) {
    throw ConfigError("generator and discriminator image sizes differ");
  }
  const auto n = static_cast<int>(domain_names.size());
  switch (architecture) {
    case Architecture::cyclegan:
    case Architecture::unet_cyclegan: {
      if (n != 2) throw ConfigError("cycle architectures need exactly two domains");
      const auto want = architecture == Architecture::cyclegan ? GeneratorKind::resnet
                                                               : GeneratorKind::unet;
      if (generator.kind != want || discriminator.kind != DiscriminatorKind::patch) {
        throw ConfigError("network kinds do not match architecture " + to_string(architecture));
      }
      break;
    }
    case Architecture::fpg:
      if (n < 2) throw ConfigError("fpg needs at least two domains");
      if (generator.kind != GeneratorKind::conditional ||
          discriminator.kind != DiscriminatorKind::dualhead || generator.num_domains != n ||
          discriminator.num_domains != n) {
        throw ConfigError("network kinds or domain counts do not match fpg");
      }
      break;
  }
}

nlohmann::json to_json(const BundleSpec& s) {
  return {{"architecture", to_string(s.architecture)},
          {"generator", to_json(s.generator)},
          {"discriminator", to_json(s.discriminator)},
          {"domain_names", s.domain_names},
          {"seed", s.seed}};
}

BundleSpec bundle_spec_from_json(const nlohmann::json& j) {
  BundleSpec s;
  s.architecture = parse_architecture(j.at("architecture").get<std::string>());
  s.generator = generator_spec_from_json(j.at("generator"));
  s.discriminator = discriminator_spec_from_json(j.at("discriminator"));
  s.domain_names = j.at("domain_names").get<std::vector<std::string>>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

BundleSpec default_bundle_spec(Architecture arch, int image_size, int base_width,
                               std::vector<std::string> domains) {
  BundleSpec s;
  s.architecture = arch;
  s.domain_names = std::move(domains);
  const int n = static_cast<int>(s.domain_names.size());
  s.generator.base_width = base_width;
  s.generator.image_size = image_size;
  s.discriminator.base_width = base_width;
  s.discriminator.image_size = image_size;
  // 16x16 patch map at 256; smaller inputs keep a grid of image_size / 8.
  s.discriminator.patch_grid = image_size >= 256 ? image_size / 16 : std::max(1, image_size / 8);
  switch (arch) {
    case Architecture::cyclegan:
      s.generator.kind = GeneratorKind::resnet;
      break;
    case Architecture::unet_cyclegan: {
      s.generator.kind = GeneratorKind::unet;
      // Down to a 4x4 bottleneck, at least four levels.
      int d = 0;
      while ((image_size >> (d + 1)) >= 4 && d < 8) ++d;
      s.generator.n_down = std::max(4, d);
      break;
    }
    case Architecture::fpg:
      s.generator.kind = GeneratorKind::conditional;
      s.generator.num_domains = n;
      s.discriminator.kind = DiscriminatorKind::dualhead;
      s.discriminator.num_domains = n;
      break;
  }
  return s;
}

namespace {
nn::ParameterRefs concat_refs(nn::ParameterRefs a, const nn::ParameterRefs& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}
}  // namespace

nn::ParameterRefs ModelBundle::generator_parameters() {
  nn::ParameterRefs refs;
  for (auto& g : generators) refs = concat_refs(std::move(refs), g.parameters());
  return refs;
}

nn::ParameterRefs ModelBundle::discriminator_parameters() {
  nn::ParameterRefs refs;
  for (auto& d : discriminators) refs = concat_refs(std::move(refs), d.parameters());
  return refs;
}

nn::ParameterRefs ModelBundle::all_parameters() {
  return concat_refs(generator_parameters(), discriminator_parameters());
}

ModelBundle make_bundle(const BundleSpec& spec) {
  spec.validate();
  ModelBundle b;
  b.spec = spec;
  const int generators = spec.architecture == Architecture::fpg ? 1 : 2;
  for (int i = 0; i < generators; ++i) {
    b.generators.emplace_back(spec.generator, splitmix64(spec.seed * 16 + i));
    b.discriminators.emplace_back(spec.discriminator, splitmix64(spec.seed * 16 + 8 + i));
  }
  return b;
}

}  // namespace bt
