#include "biastransfer/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "biastransfer/checkpoint.hpp"
#include "biastransfer/nn/adam.hpp"

namespace bt {

void TrainingData::validate(int image_size) const {
  if (domains() < 2 || static_cast<int>(val.size()) != domains()) {
    throw DataError("training needs train and val sets for at least two domains");
  }
  if (!domain_names.empty() && static_cast<int>(domain_names.size()) != domains()) {
    throw DataError("domain name count does not match the data");
  }
  for (int d = 0; d < domains(); ++d) {
    if (train[d].empty()) throw DataError("empty training set for domain " + std::to_string(d));
    if (val[d].empty()) throw DataError("empty validation set for domain " + std::to_string(d));
    for (const auto* set : {&train[d], &val[d]}) {
      for (const auto& t : *set) {
        if (t.channels() != 3 || t.height() != image_size || t.width() != image_size) {
          throw DimensionError("training tensor " + t.shape_string() + " does not match model size " +
                               std::to_string(image_size));
        }
      }
    }
  }
}

Tensor to_model_input(const Image& img, int side) {
  if (img.channels() != 3) throw ChannelError("model inputs must be RGB");
  if (img.height() != img.width()) throw DimensionError("model inputs must be square");
  if (pyramid_depth(img.height(), side) < 0) {
    throw DimensionError("side " + std::to_string(img.height()) + " is not " + std::to_string(side) +
                         " * 2^k");
  }
  Image cur = img;
  while (cur.height() > side) cur = gaussian_halve(cur);
  return Tensor::from_image(convert_range(cur, Range::symmetric));
}

std::vector<Tensor> to_model_inputs(const std::vector<Image>& images, int side) {
  std::vector<Tensor> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(to_model_input(img, side));
  return out;
}

// ------------------------------------------------------------- manifest

void RunManifest::validate() const {
  if (selected_epoch < 0) return;
  for (const auto& e : history) {
    if (e.epoch == selected_epoch) return;
  }
  throw ContractError("selected epoch " + std::to_string(selected_epoch) + " not in history");
}

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& e : m.history) {
    hist.push_back({{"epoch", e.epoch},
                    {"lr", e.lr},
                    {"generator_loss", e.generator_loss},
                    {"discriminator_loss", e.discriminator_loss},
                    {"val_loss", e.val_loss},
                    {"output_std", e.output_std},
                    {"terms", e.terms},
                    {"checkpointed", e.checkpointed},
                    {"seconds", e.seconds}});
  }
  return {{"architecture", m.architecture},
          {"extra_mode", m.extra_mode},
          {"seed", m.seed},
          {"config_hash", m.config_hash},
          {"config", m.config},
          {"history", hist},
          {"selected_epoch", m.selected_epoch},
          {"selected_val_loss", m.selected_val_loss},
          {"checkpoint", m.checkpoint},
          {"mode_collapse", m.mode_collapse},
          {"collapse_epoch", m.collapse_epoch},
          {"ms_ssim_scales", m.ms_ssim_scales},
          {"replay_buffer", m.replay_buffer},
          {"generator_parameters", m.generator_parameters},
          {"discriminator_parameters", m.discriminator_parameters},
          {"metric_report_ids", m.metric_report_ids},
          {"status", m.status},
          {"diagnostic", m.diagnostic}};
}

RunManifest run_manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.architecture = j.at("architecture").get<std::string>();
    m.extra_mode = j.at("extra_mode").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.config = j.value("config", nlohmann::json::object());
    for (const auto& e : j.at("history")) {
      EpochRecord r;
      r.epoch = e.at("epoch").get<int>();
      r.lr = e.at("lr").get<double>();
      r.generator_loss = e.at("generator_loss").get<double>();
      r.discriminator_loss = e.at("discriminator_loss").get<double>();
      r.val_loss = e.at("val_loss").get<double>();
      r.output_std = e.value("output_std", 0.0);
      r.terms = e.value("terms", std::map<std::string, double>{});
      r.checkpointed = e.value("checkpointed", false);
      r.seconds = e.value("seconds", 0.0);
      m.history.push_back(std::move(r));
    }
    m.selected_epoch = j.at("selected_epoch").get<int>();
    m.selected_val_loss = j.value("selected_val_loss", 0.0);
    m.checkpoint = j.value("checkpoint", std::string());
    m.mode_collapse = j.value("mode_collapse", false);
    m.collapse_epoch = j.value("collapse_epoch", -1);
    m.ms_ssim_scales = j.value("ms_ssim_scales", 0);
    m.replay_buffer = j.value("replay_buffer", false);
    m.generator_parameters = j.value("generator_parameters", std::size_t{0});
    m.discriminator_parameters = j.value("discriminator_parameters", std::size_t{0});
    m.metric_report_ids = j.value("metric_report_ids", std::vector<std::string>{});
    m.status = j.value("status", std::string("completed"));
    m.diagnostic = j.value("diagnostic", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run manifest: ") + e.what());
  }
  m.validate();
  return m;
}

void save_manifest(const std::filesystem::path& path, const RunManifest& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << to_json(m).dump(2) << '\n';
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  try {
    return run_manifest_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
}

nlohmann::json run_config_json(const BundleSpec& spec, const TrainConfig& cfg) {
  return {{"train", to_json(cfg)}, {"bundle", to_json(spec)}};
}

std::string config_hash(const nlohmann::json& j) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ------------------------------------------------------------- helpers

namespace {

using Clock = std::chrono::steady_clock;

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(capacity) {}

  /// cycleGAN image history: while filling, return the input; afterwards
  /// return a stored image (replaced by the input) with probability 1/2.
  Tensor query(const Tensor& t, Rng& rng) {
    if (capacity_ == 0) return t;
    if (static_cast<int>(items_.size()) < capacity_) {
      items_.push_back(t);
      return t;
    }
    if (rng.uniform() < 0.5) {
      const auto i = rng.index(items_.size());
      Tensor old = std::move(items_[i]);
      items_[i] = t;
      return old;
    }
    return t;
  }

 private:
  int capacity_;
  std::vector<Tensor> items_;
};

void add_scaled(Tensor& acc, const Tensor& g, double scale) {
  const float s = static_cast<float>(scale);
  if (acc.empty()) {
    acc = g;
    acc *= s;
    return;
  }
  float* a = acc.data();
  const float* b = g.data();
  for (std::size_t i = 0; i < acc.size(); ++i) a[i] += s * b[i];
}

Tensor scaled(Tensor t, double s) {
  t *= static_cast<float>(s);
  return t;
}

double mean_value(const Tensor& t) {
  double s = 0.0;
  for (float v : t.values()) s += v;
  return s / static_cast<double>(t.size());
}

struct TermSums {
  GeneratorLossTerms terms;
  double g_total = 0.0;
  double d_total = 0.0;
  int g_steps = 0;
  int d_steps = 0;

  void add(const GeneratorLossTerms& t, double total) {
    terms.adv += t.adv;
    terms.cyc += t.cyc;
    terms.id += t.id;
    terms.domain += t.domain;
    terms.ms_ssim += t.ms_ssim;
    terms.structure += t.structure;
    terms.extra_identity += t.extra_identity;
    g_total += total;
    ++g_steps;
  }
};

std::map<std::string, double> term_means(const TermSums& s) {
  const double n = std::max(1, s.g_steps);
  return {{"adv", s.terms.adv / n},
          {"cyc", s.terms.cyc / n},
          {"id", s.terms.id / n},
          {"domain", s.terms.domain / n},
          {"ms_ssim", s.terms.ms_ssim / n},
          {"structure", s.terms.structure / n},
          {"extra_identity", s.terms.extra_identity / n}};
}

/// Adds the extra terms comparing the source x with its reconstruction and
/// translation; accumulates their gradients.
void extra_terms(const Tensor& x, const Tensor& fake, const Tensor& rec, const TermCoefficients& c,
                 const TrainConfig& cfg, int scales, GeneratorLossTerms& t, Tensor& grad_fake,
                 Tensor& grad_rec) {
  Tensor g;
  if (c.ms_ssim > 0.0) {
    t.ms_ssim += ms_ssim_loss(x, rec, cfg.ssim, scales, &g);
    add_scaled(grad_rec, g, c.ms_ssim);
  }
  if (c.structure > 0.0) {
    t.structure += structure_loss(x, fake, cfg.ssim, &g);
    add_scaled(grad_fake, g, c.structure);
  }
  if (c.extra_identity > 0.0) {
    t.extra_identity += identity_loss(x, fake, &g);
    add_scaled(grad_fake, g, c.extra_identity);
  }
}

RunManifest start_manifest(ModelBundle& bundle, const TrainConfig& cfg) {
  RunManifest m;
  m.architecture = to_string(bundle.spec.architecture);
  m.extra_mode = to_string(cfg.extra.mode);
  m.seed = bundle.spec.seed;
  m.config = run_config_json(bundle.spec, cfg);
  m.config_hash = config_hash(m.config);
  m.ms_ssim_scales =
      cfg.extra.uses_ms_ssim() ? effective_ms_ssim_scales(bundle.spec.generator.image_size, cfg.ssim) : 0;
  m.replay_buffer = bundle.spec.architecture != Architecture::fpg && cfg.replay_buffer > 0;
  m.generator_parameters = bundle.generators.front().parameter_count();
  m.discriminator_parameters = bundle.discriminators.front().parameter_count();
  return m;
}

[[noreturn]] void abort_run(RunManifest m, const std::string& why) {
  m.status = "aborted";
  m.diagnostic = why;
  throw TrainingAborted("training aborted: " + why, std::move(m));
}

void check_finite(const RunManifest& m, double v, const char* what, int epoch, int step) {
  if (!std::isfinite(v)) {
    abort_run(m, std::string("non-finite ") + what + " at epoch " + std::to_string(epoch) +
                     " step " + std::to_string(step));
  }
}

void check_terms(const RunManifest& m, const GeneratorLossTerms& t, double total, int epoch,
                 int step) {
  check_finite(m, t.adv, "adversarial loss", epoch, step);
  check_finite(m, t.cyc, "cycle loss", epoch, step);
  check_finite(m, t.id, "identity loss", epoch, step);
  check_finite(m, t.domain, "domain loss", epoch, step);
  check_finite(m, t.ms_ssim, "ms-ssim loss", epoch, step);
  check_finite(m, t.structure, "structure loss", epoch, step);
  check_finite(m, t.extra_identity, "additional identity loss", epoch, step);
  check_finite(m, total, "generator loss", epoch, step);
}

/// Validation, collapse probe, checkpointing and bookkeeping after an epoch.
// Columns are fixed by the first record; later records use the same term set.
void append_loss_log(const std::filesystem::path& path, const EpochRecord& rec) {
  const bool fresh = rec.epoch == 0 || !std::filesystem::exists(path);
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, fresh ? std::ios::trunc : std::ios::app);
  if (!out) throw IoError("cannot write " + path.string());
  if (fresh) {
    out << "epoch,lr,generator_loss,discriminator_loss,val_loss,output_std";
    for (const auto& [name, _] : rec.terms) out << ',' << name;
    out << '\n';
  }
  out << rec.epoch << ',' << rec.lr << ',' << rec.generator_loss << ','
      << rec.discriminator_loss << ',' << rec.val_loss << ',' << rec.output_std;
  for (const auto& [_, v] : rec.terms) out << ',' << v;
  out << '\n';
}

void finish_epoch(ModelBundle& bundle, const TrainingData& data, const TrainConfig& cfg,
                  const TrainOptions& opts, RunManifest& m, EpochRecord rec, const TermSums& sums,
                  Clock::time_point t0) {
  rec.generator_loss = sums.g_total / std::max(1, sums.g_steps);
  rec.discriminator_loss = sums.d_total / std::max(1, sums.d_steps);
  rec.terms = term_means(sums);
  rec.val_loss = validation_loss(bundle, data, cfg);
  check_finite(m, rec.val_loss, "validation loss", rec.epoch, -1);
  rec.output_std = output_spread(bundle, data, cfg);
  if (rec.output_std < cfg.collapse_threshold && !m.mode_collapse) {
    m.mode_collapse = true;
    m.collapse_epoch = rec.epoch;
  }
  if (m.selected_epoch < 0 || rec.val_loss < m.selected_val_loss) {
    m.selected_epoch = rec.epoch;
    m.selected_val_loss = rec.val_loss;
    if (!opts.run_dir.empty()) {
      const std::string name = cfg.keep_all_checkpoints
                                   ? "epoch_" + std::to_string(rec.epoch) + ".ckpt"
                                   : std::string("best.ckpt");
      const auto path = opts.run_dir / name;
      save_checkpoint(path, bundle, rec.epoch, {{"val_loss", rec.val_loss}});
      m.checkpoint = path.string();
      rec.checkpointed = true;
    }
  }
  rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!opts.run_dir.empty()) append_loss_log(opts.run_dir / "losses.csv", rec);
  m.history.push_back(rec);
  if (opts.on_epoch) opts.on_epoch(m, m.history.back());
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(p));
  return p;
}

}  // namespace

// ------------------------------------------------------------- evaluation

Tensor translate(ModelBundle& bundle, const Tensor& x, int target) {
  if (bundle.spec.architecture == Architecture::fpg) {
    return bundle.generators.front().forward(x, nullptr, target);
  }
  if (target != 0 && target != 1) throw ContractError("cycle variants have two domains");
  return bundle.generators[target == 1 ? 0 : 1].forward(x, nullptr);
}

double validation_loss(ModelBundle& bundle, const TrainingData& data, const TrainConfig& cfg) {
  const TermCoefficients c =
      coefficients(bundle.spec.architecture, cfg.weights, cfg.extra, cfg.extra.decay_epochs);
  const int scales = c.ms_ssim > 0.0
                         ? effective_ms_ssim_scales(bundle.spec.generator.image_size, cfg.ssim)
                         : 0;
  const auto& src = data.val[0];
  const auto& tar = data.val[1];
  double total = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Tensor& x = src[i];
    const Tensor& y = tar[i % tar.size()];
    const Tensor fake = translate(bundle, x, 1);
    const Tensor rec = translate(bundle, fake, 0);
    double v = c.cyc * cycle_loss(x, rec) + c.id * identity_loss(y, translate(bundle, y, 1));
    if (c.ms_ssim > 0.0) v += c.ms_ssim * ms_ssim_loss(x, rec, cfg.ssim, scales);
    if (c.structure > 0.0) v += c.structure * structure_loss(x, fake, cfg.ssim);
    total += v;
  }
  return total / static_cast<double>(src.size());
}

double output_spread(ModelBundle& bundle, const TrainingData& data, const TrainConfig& cfg) {
  const auto& src = data.val[0];
  const std::size_t k = std::min<std::size_t>(src.size(), static_cast<std::size_t>(cfg.collapse_samples));
  if (k < 2) return 0.0;
  std::vector<Tensor> outs;
  for (std::size_t i = 0; i < k; ++i) outs.push_back(translate(bundle, src[i], 1));
  const std::size_t n = outs.front().size();
  double acc = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    double mean = 0.0;
    for (const auto& o : outs) mean += o.data()[p];
    mean /= static_cast<double>(k);
    double var = 0.0;
    for (const auto& o : outs) var += (o.data()[p] - mean) * (o.data()[p] - mean);
    acc += std::sqrt(var / static_cast<double>(k));
  }
  return acc / static_cast<double>(n);
}

// ------------------------------------------------------------- cycle variants

RunManifest train_cycle_pair(const TrainingData& data, ModelBundle& bundle, const TrainConfig& cfg,
                             const TrainOptions& opts) {
  cfg.validate();
  const auto arch = bundle.spec.architecture;
  if (arch != Architecture::cyclegan && arch != Architecture::unet_cyclegan) {
    throw ConfigError("train_cycle_pair needs a cycle architecture");
  }
  if (data.domains() != 2) throw DataError("cycle variants train on exactly two domains");
  data.validate(bundle.spec.generator.image_size);

  RunManifest m = start_manifest(bundle, cfg);
  Generator& G = bundle.generators[0];  // A -> B
  Generator& F = bundle.generators[1];  // B -> A
  Discriminator& DA = bundle.discriminators[0];
  Discriminator& DB = bundle.discriminators[1];
  nn::Adam gopt(bundle.generator_parameters(), {cfg.lr_initial, cfg.beta1, cfg.beta2});
  nn::Adam dopt(bundle.discriminator_parameters(), {cfg.lr_initial, cfg.beta1, cfg.beta2});
  Rng rng = Rng::derive(bundle.spec.seed, 0x747261696eull);
  ReplayBuffer pool_a(cfg.replay_buffer), pool_b(cfg.replay_buffer);
  const int scales = m.ms_ssim_scales;

  const auto& A = data.train[0];
  const auto& B = data.train[1];
  const std::size_t steps = std::max(A.size(), B.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = Clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_schedule(epoch, cfg);
    gopt.set_lr(rec.lr);
    dopt.set_lr(rec.lr);
    const TermCoefficients c = coefficients(arch, cfg.weights, cfg.extra, epoch);
    const auto perm_a = permutation(A.size(), rng);
    const auto perm_b = permutation(B.size(), rng);
    TermSums sums;

    for (std::size_t step = 0; step < steps; ++step) {
      const Tensor& x = A[perm_a[step % A.size()]];
      const Tensor& y = B[perm_b[step % B.size()]];
      GeneratorLossTerms t;

      // Generator update; the critics only pass gradients through.
      gopt.zero_grad();
      DA.set_requires_grad(false);
      DB.set_requires_grad(false);
      Trace tg1, tf1, tf2, tg2;
      const Tensor fake_b = G.forward(x, &tg1);
      const Tensor rec_a = F.forward(fake_b, &tf1);
      const Tensor fake_a = F.forward(y, &tf2);
      const Tensor rec_b = G.forward(fake_a, &tg2);

      Tensor grad_fake_b, grad_fake_a, grad_rec_a, grad_rec_b, g;
      for (auto [D, fake, grad] : {std::tuple{&DB, &fake_b, &grad_fake_b},
                                   std::tuple{&DA, &fake_a, &grad_fake_a}}) {
        Trace td;
        const auto out = D->forward(*fake, &td);
        const auto p = to_double(out.patch);
        std::vector<double> gp(p.size());
        t.adv += lsgan_generator_loss(p, gp);
        add_scaled(*grad, D->backward(td, scaled(from_double(gp, out.patch), c.adv)), 1.0);
      }
      t.cyc += cycle_loss(x, rec_a, &g);
      add_scaled(grad_rec_a, g, c.cyc);
      t.cyc += cycle_loss(y, rec_b, &g);
      add_scaled(grad_rec_b, g, c.cyc);
      extra_terms(x, fake_b, rec_a, c, cfg, scales, t, grad_fake_b, grad_rec_a);
      extra_terms(y, fake_a, rec_b, c, cfg, scales, t, grad_fake_a, grad_rec_b);

      add_scaled(grad_fake_b, F.backward(tf1, grad_rec_a), 1.0);
      add_scaled(grad_fake_a, G.backward(tg2, grad_rec_b), 1.0);
      G.backward(tg1, grad_fake_b);
      F.backward(tf2, grad_fake_a);

      if (c.id > 0.0) {
        Trace tg3, tf3;
        t.id += identity_loss(y, G.forward(y, &tg3), &g);
        G.backward(tg3, scaled(g, c.id));
        t.id += identity_loss(x, F.forward(x, &tf3), &g);
        F.backward(tf3, scaled(g, c.id));
      }
      const double g_total = total_generator_loss(t, cfg.weights, cfg.extra, epoch, arch);
      check_terms(m, t, g_total, epoch, static_cast<int>(step));
      gopt.step();
      DA.set_requires_grad(true);
      DB.set_requires_grad(true);
      sums.add(t, g_total);

      // Critic update on real images and replayed translations.
      dopt.zero_grad();
      double d_loss = 0.0;
      for (auto [D, real, fake, pool] :
           {std::tuple{&DA, &x, &fake_a, &pool_a}, std::tuple{&DB, &y, &fake_b, &pool_b}}) {
        const Tensor replay = pool->query(*fake, rng);
        Trace tr, tf;
        const auto out_r = D->forward(*real, &tr);
        const auto out_f = D->forward(replay, &tf);
        const auto r = to_double(out_r.patch), f = to_double(out_f.patch);
        std::vector<double> gr(r.size()), gf(f.size());
        d_loss += lsgan_discriminator_loss(r, f, gr, gf);
        D->backward(tr, from_double(gr, out_r.patch));
        D->backward(tf, from_double(gf, out_f.patch));
      }
      check_finite(m, d_loss, "discriminator loss", epoch, static_cast<int>(step));
      dopt.step();
      sums.d_total += d_loss;
      ++sums.d_steps;
    }
    finish_epoch(bundle, data, cfg, opts, m, rec, sums, t0);
  }
  m.status = "completed";
  return m;
}

// ------------------------------------------------------------- fpg

RunManifest train_fpg(const TrainingData& data, ModelBundle& bundle, const TrainConfig& cfg,
                      const TrainOptions& opts) {
  cfg.validate();
  if (bundle.spec.architecture != Architecture::fpg) throw ConfigError("train_fpg needs an fpg bundle");
  data.validate(bundle.spec.generator.image_size);
  if (data.domains() != bundle.spec.generator.num_domains) {
    throw DataError("domain count differs from the model's");
  }

  RunManifest m = start_manifest(bundle, cfg);
  Generator& G = bundle.generators.front();
  Discriminator& D = bundle.discriminators.front();
  nn::Adam gopt(bundle.generator_parameters(), {cfg.lr_initial, cfg.beta1, cfg.beta2});
  nn::Adam dopt(bundle.discriminator_parameters(), {cfg.lr_initial, cfg.beta1, cfg.beta2});
  Rng rng = Rng::derive(bundle.spec.seed, 0x747261696eull);
  const int scales = m.ms_ssim_scales;
  const int domains = data.domains();
  const auto& w = cfg.weights;

  std::size_t steps = 0;
  for (const auto& d : data.train) steps += d.size();

  int global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = Clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_schedule(epoch, cfg);
    gopt.set_lr(rec.lr);
    dopt.set_lr(rec.lr);
    const TermCoefficients c = coefficients(Architecture::fpg, w, cfg.extra, epoch);
    TermSums sums;

    for (std::size_t step = 0; step < steps; ++step, ++global_step) {
      const int s = static_cast<int>(rng.index(static_cast<std::uint64_t>(domains)));
      const int tgt =
          (s + 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(domains - 1)))) % domains;
      const Tensor& x = data.train[s][rng.index(data.train[s].size())];

      // Critic: Wasserstein terms, domain classification of reals, penalty.
      dopt.zero_grad();
      double d_loss = 0.0;
      {
        Trace tr;
        const auto out_r = D.forward(x, &tr);
        d_loss -= w.lambda_adv * mean_value(out_r.patch);
        Tensor glog;
        d_loss += w.lambda_domain * domain_classification_loss(out_r.domain_logits, s, &glog);
        const Tensor gl = scaled(glog, w.lambda_domain);
        D.backward(tr,
                   Tensor(1, out_r.patch.height(), out_r.patch.width(),
                          static_cast<float>(-w.lambda_adv / out_r.patch.size())),
                   &gl);
      }
      const Tensor fake = G.forward(x, nullptr, tgt);
      {
        Trace tf;
        const auto out_f = D.forward(fake, &tf);
        d_loss += w.lambda_adv * mean_value(out_f.patch);
        D.backward(tf, Tensor(1, out_f.patch.height(), out_f.patch.width(),
                              static_cast<float>(w.lambda_adv / out_f.patch.size())));
      }
      {
        DiscriminatorCritic critic(D);
        const auto pen = gradient_penalty<float>(critic, x.values(), fake.values(), rng,
                                                 static_cast<float>(w.lambda_gp),
                                                 static_cast<float>(cfg.gp_step));
        d_loss += w.lambda_gp * pen.penalty;
      }
      check_finite(m, d_loss, "critic loss", epoch, static_cast<int>(step));
      dopt.step();
      sums.d_total += d_loss;
      ++sums.d_steps;

      if ((global_step + 1) % cfg.n_critic != 0) continue;

      // Generator: adversarial, domain, cycle, conditional identity, extras.
      gopt.zero_grad();
      D.set_requires_grad(false);
      GeneratorLossTerms t;
      Trace tg1, tg2, td;
      const Tensor fk = G.forward(x, &tg1, tgt);
      const auto out = D.forward(fk, &td);
      t.adv = -mean_value(out.patch);
      Tensor glog, g;
      t.domain = domain_classification_loss(out.domain_logits, tgt, &glog);
      const Tensor gl = scaled(glog, c.domain);
      Tensor grad_fake = D.backward(
          td,
          Tensor(1, out.patch.height(), out.patch.width(), static_cast<float>(-c.adv / out.patch.size())),
          &gl);
      const Tensor rc = G.forward(fk, &tg2, s);
      Tensor grad_rec;
      t.cyc = cycle_loss(x, rc, &g);
      add_scaled(grad_rec, g, c.cyc);
      extra_terms(x, fk, rc, c, cfg, scales, t, grad_fake, grad_rec);
      add_scaled(grad_fake, G.backward(tg2, grad_rec), 1.0);
      G.backward(tg1, grad_fake);
      {
        Trace tg3;
        t.id = conditional_identity_loss(x, G.forward(x, &tg3, s), s, s, &g);
        G.backward(tg3, scaled(g, c.id));
      }
      const double g_total = total_generator_loss(t, w, cfg.extra, epoch, Architecture::fpg);
      check_terms(m, t, g_total, epoch, static_cast<int>(step));
      gopt.step();
      D.set_requires_grad(true);
      sums.add(t, g_total);
    }
    finish_epoch(bundle, data, cfg, opts, m, rec, sums, t0);
  }
  m.status = "completed";
  return m;
}

RunManifest train(const TrainingData& data, ModelBundle& bundle, const TrainConfig& cfg,
                  const TrainOptions& opts) {
  if (bundle.spec.architecture == Architecture::fpg) return train_fpg(data, bundle, cfg, opts);
  return train_cycle_pair(data, bundle, cfg, opts);
}

}  // namespace bt
