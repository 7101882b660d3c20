#include "biastransfer/schedule.hpp"

#include "biastransfer/errors.hpp"

namespace bt {

void TrainConfig::validate() const {
  if (batch_size != 1) throw ConfigError("batch_size must be 1");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (lr_steady_epochs < 0 || lr_steady_epochs > epochs) {
    throw ConfigError("lr_steady_epochs must lie in [0, epochs]");
  }
  if (!(lr_initial > 0.0)) throw ConfigError("lr_initial must be positive");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (replay_buffer < 0 || n_critic < 1 || !(gp_step > 0.0) || collapse_samples < 2) {
    throw ConfigError("invalid training option");
  }
  if (extra.decay_epochs < 0) throw ConfigError("decay_epochs must be non-negative");
  weights.validate();
  ssim.validate();
}

TrainConfig default_train_config(Architecture arch) {
  TrainConfig c;
  if (arch == Architecture::fpg) {
    c.lr_initial = 0.0001;
    c.replay_buffer = 0;
  }
  return c;
}

TrainConfig desk_train_config(Architecture arch) {
  TrainConfig c = default_train_config(arch);
  c.epochs = 30;
  c.lr_steady_epochs = 15;
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  const auto& w = c.weights;
  return {
      {"epochs", c.epochs},
      {"lr_initial", c.lr_initial},
      {"lr_steady_epochs", c.lr_steady_epochs},
      {"batch_size", c.batch_size},
      {"seeds", c.seeds},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"extra", {{"mode", to_string(c.extra.mode)}, {"decay_epochs", c.extra.decay_epochs}}},
      {"weights",
       {{"lambda_adv", w.lambda_adv},
        {"lambda_cyc", w.lambda_cyc},
        {"lambda_id", w.lambda_id},
        {"lambda_gp", w.lambda_gp},
        {"lambda_domain", w.lambda_domain},
        {"lambda_id_fpg", w.lambda_id_fpg},
        {"lambda_extra", w.lambda_extra}}},
      {"ssim",
       {{"window", c.ssim.window},
        {"sigma", c.ssim.sigma},
        {"k1", c.ssim.k1},
        {"k2", c.ssim.k2},
        {"dynamic_range", c.ssim.dynamic_range}}},
      {"replay_buffer", c.replay_buffer},
      {"n_critic", c.n_critic},
      {"gp_step", c.gp_step},
      {"collapse_samples", c.collapse_samples},
      {"collapse_threshold", c.collapse_threshold},
      {"keep_all_checkpoints", c.keep_all_checkpoints},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.lr_initial = j.value("lr_initial", c.lr_initial);
    c.lr_steady_epochs = j.value("lr_steady_epochs", c.lr_steady_epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seeds = j.value("seeds", c.seeds);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    if (j.contains("extra")) {
      const auto& e = j.at("extra");
      if (e.is_string()) {
        c.extra.mode = parse_extra_mode(e.get<std::string>());
      } else {
        if (e.contains("mode")) c.extra.mode = parse_extra_mode(e.at("mode").get<std::string>());
        c.extra.decay_epochs = e.value("decay_epochs", c.extra.decay_epochs);
      }
    }
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      auto& o = c.weights;
      o.lambda_adv = w.value("lambda_adv", o.lambda_adv);
      o.lambda_cyc = w.value("lambda_cyc", o.lambda_cyc);
      o.lambda_id = w.value("lambda_id", o.lambda_id);
      o.lambda_gp = w.value("lambda_gp", o.lambda_gp);
      o.lambda_domain = w.value("lambda_domain", o.lambda_domain);
      o.lambda_id_fpg = w.value("lambda_id_fpg", o.lambda_id_fpg);
      o.lambda_extra = w.value("lambda_extra", o.lambda_extra);
    }
    if (j.contains("ssim")) {
      const auto& s = j.at("ssim");
      c.ssim.window = s.value("window", c.ssim.window);
      c.ssim.sigma = s.value("sigma", c.ssim.sigma);
      c.ssim.k1 = s.value("k1", c.ssim.k1);
      c.ssim.k2 = s.value("k2", c.ssim.k2);
      c.ssim.dynamic_range = s.value("dynamic_range", c.ssim.dynamic_range);
    }
    c.replay_buffer = j.value("replay_buffer", c.replay_buffer);
    c.n_critic = j.value("n_critic", c.n_critic);
    c.gp_step = j.value("gp_step", c.gp_step);
    c.collapse_samples = j.value("collapse_samples", c.collapse_samples);
    c.collapse_threshold = j.value("collapse_threshold", c.collapse_threshold);
    c.keep_all_checkpoints = j.value("keep_all_checkpoints", c.keep_all_checkpoints);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid training config: ") + e.what());
  }
  c.validate();
  return c;
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch > cfg.epochs) {
    throw ContractError("epoch " + std::to_string(epoch) + " outside [0, " +
                        std::to_string(cfg.epochs) + "]");
  }
  if (epoch < cfg.lr_steady_epochs) return cfg.lr_initial;
  const int decay = cfg.epochs - cfg.lr_steady_epochs;
  if (decay == 0) return 0.0;
  return cfg.lr_initial *
         (1.0 - static_cast<double>(epoch - cfg.lr_steady_epochs) / static_cast<double>(decay));
}

}  // namespace bt
