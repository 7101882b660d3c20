#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "biastransfer/errors.hpp"
#include "biastransfer/networks.hpp"
#include "biastransfer/schedule.hpp"

namespace bt {

/// Model-resolution training data in symmetric range, one entry per
/// domain. Domain 0 is the source (NEW) and domain 1 the target (TAR) of
/// the validation direction.
struct TrainingData {
  std::vector<std::string> domain_names;
  std::vector<std::vector<Tensor>> train;
  std::vector<std::vector<Tensor>> val;

  int domains() const { return static_cast<int>(train.size()); }
  void validate(int image_size) const;
};

/// Image at model resolution: repeated Gaussian halving down to `side`
/// (the pyramid base), converted to symmetric range.
Tensor to_model_input(const Image& img, int side);
std::vector<Tensor> to_model_inputs(const std::vector<Image>& images, int side);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double generator_loss = 0.0;      // mean weighted generator objective
  double discriminator_loss = 0.0;  // mean critic objective
  double val_loss = 0.0;
  double output_std = 0.0;          // collapse probe
  std::map<std::string, double> terms;  // mean raw generator terms
  bool checkpointed = false;
  double seconds = 0.0;
};

struct RunManifest {
  std::string architecture;
  std::string extra_mode;
  std::uint64_t seed = 0;
  std::string config_hash;
  nlohmann::json config;
  std::vector<EpochRecord> history;
  int selected_epoch = -1;
  double selected_val_loss = 0.0;
  std::string checkpoint;  // checkpoint of the selected epoch
  bool mode_collapse = false;
  int collapse_epoch = -1;
  int ms_ssim_scales = 0;
  bool replay_buffer = false;
  std::size_t generator_parameters = 0;
  std::size_t discriminator_parameters = 0;
  std::vector<std::string> metric_report_ids;
  std::string status = "running";
  std::string diagnostic;

  /// Throws ContractError if selected_epoch is not in the history.
  void validate() const;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest run_manifest_from_json(const nlohmann::json& j);
void save_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest load_manifest(const std::filesystem::path& path);

/// Configuration recorded in (and hashed for) a run manifest.
nlohmann::json run_config_json(const BundleSpec& spec, const TrainConfig& cfg);

/// Hex FNV-1a digest of the canonical JSON dump.
std::string config_hash(const nlohmann::json& j);

/// Raised when a loss becomes non-finite; carries the run so far.
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, RunManifest manifest)
      : NumericError(what), manifest_(std::move(manifest)) {}
  const RunManifest& manifest() const { return manifest_; }

 private:
  RunManifest manifest_;
};

struct TrainOptions {
  std::filesystem::path run_dir;  // checkpoints; empty disables checkpointing
  std::function<void(const RunManifest&, const EpochRecord&)> on_epoch;
};

/// Generator validation loss NEW -> TAR: weighted cycle and identity terms
/// plus the configured MS-SSIM or structure extra, without adversarial
/// terms and without the epoch-dependent additional identity term.
double validation_loss(ModelBundle& bundle, const TrainingData& data, const TrainConfig& cfg);

/// Mean over pixels of the standard deviation across generator outputs
/// (NEW -> TAR) for the first cfg.collapse_samples validation inputs.
double output_spread(ModelBundle& bundle, const TrainingData& data, const TrainConfig& cfg);

/// Applies the generator producing domain `target` (cycle variants: G for
/// domain 1, F for domain 0; fpg: the conditional generator).
Tensor translate(ModelBundle& bundle, const Tensor& x, int target);

/// Trains a cycle variant with seed bundle.spec.seed.
RunManifest train_cycle_pair(const TrainingData& data, ModelBundle& bundle, const TrainConfig& cfg,
                             const TrainOptions& opts = {});
/// Trains the conditional multi-domain variant.
RunManifest train_fpg(const TrainingData& data, ModelBundle& bundle, const TrainConfig& cfg,
                      const TrainOptions& opts = {});
/// Dispatches on bundle.spec.architecture.
RunManifest train(const TrainingData& data, ModelBundle& bundle, const TrainConfig& cfg,
                  const TrainOptions& opts = {});

}  // namespace bt
