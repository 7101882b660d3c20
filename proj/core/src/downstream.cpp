#include "biastransfer/downstream.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

#include "biastransfer/errors.hpp"
#include "biastransfer/losses.hpp"
#include "biastransfer/nn/adam.hpp"

namespace bt {

namespace {

constexpr char kMagic[8] = {'B', 'T', 'D', 'S', 'M', '0', '0', '1'};

nlohmann::json config_json(const DownstreamConfig& c) {
  return {{"input_size", c.input_size}, {"width", c.width},   {"num_classes", c.num_classes},
          {"epochs", c.epochs},         {"lr", c.lr},         {"augment", c.augment},
          {"min_val_accuracy", c.min_val_accuracy},           {"seed", c.seed}};
}

DownstreamConfig config_from_json(const nlohmann::json& j) {
  DownstreamConfig c;
  c.input_size = j.at("input_size").get<int>();
  c.width = j.at("width").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.lr = j.at("lr").get<double>();
  c.augment = j.at("augment").get<bool>();
  c.min_val_accuracy = j.at("min_val_accuracy").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

/// One of the eight symmetries of the square: bit 0 flips x, bit 1 flips
/// y, bit 2 transposes.
nn::Tensor dihedral(const nn::Tensor& t, int code) {
  nn::Tensor out(t.channels(), t.height(), t.width());
  const int n = t.height();
  for (int c = 0; c < t.channels(); ++c) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        int sy = y, sx = x;
        if (code & 4) std::swap(sy, sx);
        if (code & 1) sx = n - 1 - sx;
        if (code & 2) sy = n - 1 - sy;
        out.at(c, y, x) = t.at(c, sy, sx);
      }
    }
  }
  return out;
}

}  // namespace

DownstreamModel::DownstreamModel(const DownstreamConfig& cfg)
    : cfg_(cfg), net_(std::make_unique<nn::Sequential>()) {
  if (cfg.input_size < 32 || cfg.input_size % 16 != 0) {
    throw ConfigError("downstream input_size must be a multiple of 16, >= 32");
  }
  if (cfg.num_classes < 2 || cfg.width < 1) throw ConfigError("invalid downstream model size");
  int ch = 3;
  for (int i = 0; i < 4; ++i) {
    const int next = cfg.width * (1 << std::min(i, 2));
    net_->emplace<nn::Conv2d>(ch, next, 4, 2, 1, nn::PadMode::zero).emplace<nn::LeakyRelu>(0.2f);
    ch = next;
  }
  net_->emplace<nn::Conv2d>(ch, cfg.num_classes, 1, 1, 0, nn::PadMode::zero)
      .emplace<nn::GlobalAvgPool>();
  Rng rng(cfg.seed);
  nn::init_normal(parameters(), rng, 0.05);
}

DownstreamModel::~DownstreamModel() = default;
DownstreamModel::DownstreamModel(DownstreamModel&&) noexcept = default;
DownstreamModel& DownstreamModel::operator=(DownstreamModel&&) noexcept = default;

nn::ParameterRefs DownstreamModel::parameters() {
  nn::ParameterRefs refs;
  net_->collect_parameters(refs);
  return refs;
}

nn::Tensor DownstreamModel::input(const Image& img) const {
  if (img.channels() != 3) throw ChannelError("downstream model expects RGB images");
  if (img.height() != img.width() || pyramid_depth(img.height(), cfg_.input_size) < 0) {
    throw DimensionError("downstream model expects square images of side " +
                         std::to_string(cfg_.input_size) + " * 2^k");
  }
  Image cur = img;
  while (cur.height() > cfg_.input_size) cur = gaussian_halve(cur);
  return nn::Tensor::from_image(convert_range(cur, Range::symmetric));
}

std::vector<double> DownstreamModel::logits(const Image& img) const {
  const nn::Tensor out = net_->forward(input(img), nullptr);
  return to_double(out);
}

int DownstreamModel::predict(const Image& img) const {
  const auto l = logits(img);
  return static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
}

void DownstreamModel::save(const std::filesystem::path& path) {
  nlohmann::json h = {{"config", config_json(cfg_)}, {"val_accuracy", val_accuracy_}};
  const std::string text = h.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const std::uint64_t len = text.size();
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(len));
  for (const auto* p : parameters()) {
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

DownstreamModel DownstreamModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, 8) != 0 || len > (1u << 20)) {
    throw IoError(path.string() + " is not a downstream model");
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt downstream model header: " + std::string(e.what()));
  }
  DownstreamModel m(config_from_json(h.at("config")));
  m.val_accuracy_ = h.value("val_accuracy", 0.0);
  for (auto* p : m.parameters()) {
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
  if (!in) throw IoError("truncated downstream model " + path.string());
  return m;
}

DownstreamModel train_downstream(const std::vector<Image>& train_images,
                                 const std::vector<int>& train_labels,
                                 const std::vector<Image>& val_images,
                                 const std::vector<int>& val_labels, const DownstreamConfig& cfg) {
  if (train_images.size() != train_labels.size() || val_images.size() != val_labels.size()) {
    throw DimensionError("image and label counts differ");
  }
  if (train_images.empty() || val_images.empty()) throw DataError("downstream training needs data");
  for (int l : train_labels) {
    if (l < 0 || l >= cfg.num_classes) throw DataError("label outside the class range");
  }
  DownstreamModel model(cfg);
  std::vector<nn::Tensor> inputs;
  for (const auto& img : train_images) inputs.push_back(model.input(img));

  auto params = model.parameters();
  nn::Adam opt(params, {cfg.lr, 0.9, 0.999, 1e-8});
  Rng rng = Rng::derive(cfg.seed, 0x6473);
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::vector<float>> best;
  double best_acc = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      const int code = cfg.augment ? static_cast<int>(rng.index(8)) : 0;
      const nn::Tensor x = code ? dihedral(inputs[i], code) : inputs[i];
      nn::Trace trace;
      const nn::Tensor out = model.net_->forward(x, &trace);
      std::vector<double> g(out.size());
      const double loss = cross_entropy_loss(to_double(out), train_labels[i], g);
      if (!std::isfinite(loss)) throw NumericError("non-finite downstream loss");
      opt.zero_grad();
      model.net_->backward(trace, from_double(g, out));
      opt.step();
    }
    const double acc = evaluate_downstream(model, val_images, val_labels).accuracy;
    if (acc >= best_acc) {
      best_acc = acc;
      best.clear();
      for (const auto* p : params) best.push_back(p->value);
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best[k];
  model.val_accuracy_ = best_acc;
  if (best_acc < cfg.min_val_accuracy) {
    throw DataError("downstream model reached only " + std::to_string(best_acc) +
                    " validation accuracy (< " + std::to_string(cfg.min_val_accuracy) +
                    "); the benchmark is invalid");
  }
  return model;
}

ClassificationScores evaluate_downstream(const DownstreamModel& model,
                                         const std::vector<Image>& images,
                                         const std::vector<int>& labels) {
  std::vector<int> preds;
  preds.reserve(images.size());
  for (const auto& img : images) preds.push_back(model.predict(img));
  std::vector<int> classes(static_cast<std::size_t>(model.config().num_classes));
  std::iota(classes.begin(), classes.end(), 0);
  return classification_scores(preds, labels, classes);
}

}  // namespace bt
