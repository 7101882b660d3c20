#pragma once

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "biastransfer/downstream.hpp"
#include "biastransfer/metrics.hpp"
#include "biastransfer/networks.hpp"
#include "biastransfer/schedule.hpp"
#include "biastransfer/selection.hpp"
#include "biastransfer/synthdata.hpp"
#include "biastransfer/training.hpp"

namespace bt {

/// Environment variable that relocates relative output directories.
inline constexpr const char* kOutputRootEnv = "BIASTRANSFER_OUTPUT_ROOT";

/// Experiment configuration. An empty JSON object yields the full-scale
/// protocol (256 px model input, base width 64, 200 epochs, five seeds);
/// "profile": "desk" selects the 64 px / 30 epoch profile.
struct ExperimentConfig {
  std::string profile = "paper";
  std::filesystem::path output_dir = "biastransfer_out";
  Architecture architecture = Architecture::unet_cyclegan;
  int image_size = 256;
  int base_width = 64;
  std::optional<int> n_resblocks;
  std::optional<int> n_down;
  std::optional<int> patch_grid;
  TrainConfig train;
  std::filesystem::path data_root;  // defaults to output_dir / "data"
  std::string source_domain = "NEW";
  std::string target_domain = "TAR";
  BenchmarkSpec synth;
  std::string fid_extractor = "randconv64";
  std::optional<std::filesystem::path> downstream_model;  // defaults to data_dir / "downstream.bin"
  DownstreamConfig downstream;

  BundleSpec bundle_spec(std::uint64_t seed) const;
  std::filesystem::path data_dir() const;
  nlohmann::json to_json() const;
};

/// Validates against the schema (unknown keys and wrong types raise
/// ConfigError) and resolves the output directory.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
/// Relative paths are placed under $BIASTRANSFER_OUTPUT_ROOT when it is set.
std::filesystem::path resolve_output_path(const std::filesystem::path& p);

/// Images of a flat folder, sorted by file name.
struct ImageFolder {
  std::vector<std::string> ids;  // file stems
  std::vector<std::filesystem::path> paths;
  std::vector<Image> images;
};
ImageFolder read_image_folder(const std::filesystem::path& dir);

/// id -> label from a labels.csv (id,group,split,label,...).
std::map<std::string, int> read_labels_csv(const std::filesystem::path& path);

struct EvaluationResult {
  MetricReport report;     // transformed vs target
  double fid_original = 0.0;  // original vs target
  std::optional<ClassificationScores> downstream_original;
  std::vector<double> ssim_values;
};

/// Content preservation (SSIM, MS-SSIM per pair), domain imitation (FID of
/// transformed and of original images against the target set) and, with a
/// model and labels, downstream impact. Test-split evaluations are refused
/// inside a SelectionScope.
EvaluationResult evaluate_images(const std::vector<std::string>& ids,
                                 const std::vector<Image>& original,
                                 const std::vector<Image>& transformed,
                                 const std::vector<Image>& target, Split split,
                                 const std::string& extractor,
                                 const DownstreamModel* model = nullptr,
                                 const std::vector<int>* labels = nullptr);

nlohmann::json to_json(const EvaluationResult& r);

// ------------------------------------------------------------- commands

/// Generates and writes the synthetic benchmark, then trains and stores the
/// frozen downstream classifier on the target domain; returns the root.
std::filesystem::path cmd_synth(const ExperimentConfig& cfg);

struct TrainSummary {
  std::vector<RunManifest> runs;
  Selection selection;
  std::filesystem::path best_checkpoint;
};

/// Runs every configured seed (runs whose manifest already records the same
/// config hash as completed are loaded instead of retrained), then selects
/// the best run and epoch on validation metrics only.
TrainSummary cmd_train(const ExperimentConfig& cfg);

/// Transforms every image of input_dir at full resolution into output_dir.
/// When cfg is given, the checkpoint's spec must match it.
std::size_t cmd_transform(const std::filesystem::path& checkpoint,
                          const std::filesystem::path& input_dir,
                          const std::filesystem::path& output_dir, int target_domain = 1,
                          const ExperimentConfig* cfg = nullptr);

struct EvaluateArgs {
  std::filesystem::path original;
  std::filesystem::path transformed;
  std::filesystem::path target;
  Split split = Split::val;
  std::filesystem::path output;  // report directory
  std::string name = "evaluation";
  std::optional<std::filesystem::path> downstream_model;
  std::optional<std::filesystem::path> labels;
};
EvaluationResult cmd_evaluate(const ExperimentConfig& cfg, const EvaluateArgs& args);

/// Colour transfer of every input image to one seeded random target image.
std::string cmd_baseline(const std::filesystem::path& input_dir,
                         const std::filesystem::path& target_dir,
                         const std::filesystem::path& output_dir, std::uint64_t seed);

/// Collects evaluation JSON files below dir into summary.md.
std::filesystem::path cmd_report(const std::filesystem::path& dir);

}  // namespace bt
