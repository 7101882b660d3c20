#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <vector>

#include "biastransfer/losses.hpp"

namespace bt {

struct TrainConfig {
  int epochs = 200;
  double lr_initial = 0.0005;
  int lr_steady_epochs = 100;
  int batch_size = 1;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  double beta1 = 0.5;
  double beta2 = 0.999;
  ExtraLossConfig extra;
  LossWeights weights;
  SsimConfig ssim;
  int replay_buffer = 50;  // cycle variants; 0 disables
  int n_critic = 5;        // fpg: critic steps per generator step
  double gp_step = 1e-2;   // finite-difference step of the penalty's mixed derivative
  int collapse_samples = 8;
  double collapse_threshold = 1e-3;
  bool keep_all_checkpoints = false;

  void validate() const;
};

/// Full-scale (profile "paper") defaults (lr 5e-4 for cycle variants, 1e-4 for fpg).
TrainConfig default_train_config(Architecture arch);
/// 30 epochs, steady for 15.
TrainConfig desk_train_config(Architecture arch);

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep the values of `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base);

/// lr_initial while epoch < lr_steady_epochs, then linear decay reaching
/// 0 at epoch == epochs.
double lr_schedule(int epoch, const TrainConfig& cfg);

}  // namespace bt
