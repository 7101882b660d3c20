// Command line front-end for the bias transfer pipeline.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "biastransfer/errors.hpp"
#include "biastransfer/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

bt::ExperimentConfig config_from(const std::string& path, const std::string& profile) {
  nlohmann::json j = nlohmann::json::object();
  if (!path.empty()) {
    bt::ExperimentConfig loaded = bt::load_experiment_config(path);
    if (profile.empty()) return loaded;
    std::ifstream in(path);
    j = nlohmann::json::parse(in, nullptr, true, true);
  }
  if (!profile.empty()) j["profile"] = profile;
  return bt::parse_experiment_config(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bias transfer between histology acquisition domains"};
  app.require_subcommand(1);

  std::string config_path, profile;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "Experiment config (JSON)");
    cmd->add_option("--profile", profile, "Override the config profile (paper|desk)");
  };

  auto* synth = app.add_subcommand("synth", "Write the synthetic two-domain benchmark");
  add_config(synth);

  auto* train = app.add_subcommand("train", "Train every configured seed and select the best run");
  add_config(train);

  std::string checkpoint, input, output, target;
  int target_domain = 1;
  auto* transform = app.add_subcommand("transform", "Transform a folder at full resolution");
  add_config(transform);
  transform->add_option("--checkpoint", checkpoint)->required();
  transform->add_option("--input", input)->required();
  transform->add_option("--output", output)->required();
  transform->add_option("--target-domain", target_domain, "Domain index to translate into");

  bt::EvaluateArgs eval;
  std::string original, transformed, split = "val", downstream, labels;
  auto* evaluate = app.add_subcommand("evaluate", "Score a transformed folder");
  add_config(evaluate);
  evaluate->add_option("--original", original)->required();
  evaluate->add_option("--transformed", transformed)->required();
  evaluate->add_option("--target", target)->required();
  evaluate->add_option("--split", split, "val or test");
  evaluate->add_option("--output", output)->required();
  evaluate->add_option("--name", eval.name);
  evaluate->add_option("--downstream-model", downstream);
  evaluate->add_option("--labels", labels, "labels.csv of the original images");

  std::uint64_t seed = 0;
  auto* baseline = app.add_subcommand("baseline", "Colour transfer to one random target image");
  baseline->add_option("--input", input)->required();
  baseline->add_option("--target", target)->required();
  baseline->add_option("--output", output)->required();
  baseline->add_option("--seed", seed);

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Collect evaluation reports into summary.md");
  report->add_option("dir", report_dir)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const auto cfg = config_from(config_path, profile);
      const fs::path root = bt::cmd_synth(cfg);
      std::cout << "benchmark written to " << root.string() << '\n';
    } else if (train->parsed()) {
      const auto cfg = config_from(config_path, profile);
      const auto s = bt::cmd_train(cfg);
      std::cout << "selected seed " << s.selection.seed << " epoch " << s.selection.epoch
                << " (val FID " << s.selection.val_report.fid << ", SSIM "
                << s.selection.val_report.ssim_mean << ")\ncheckpoint "
                << s.best_checkpoint.string() << '\n';
    } else if (transform->parsed()) {
      std::optional<bt::ExperimentConfig> cfg;
      if (!config_path.empty() || !profile.empty()) cfg = config_from(config_path, profile);
      const auto n = bt::cmd_transform(checkpoint, input, bt::resolve_output_path(output),
                                       target_domain, cfg ? &*cfg : nullptr);
      std::cout << n << " images transformed\n";
    } else if (evaluate->parsed()) {
      const auto cfg = config_from(config_path, profile);
      eval.original = original;
      eval.transformed = transformed;
      eval.target = target;
      eval.split = bt::parse_split(split);
      eval.output = bt::resolve_output_path(output);
      if (!downstream.empty()) eval.downstream_model = downstream;
      if (!labels.empty()) eval.labels = labels;
      const auto r = bt::cmd_evaluate(cfg, eval);
      std::cout << "SSIM " << r.report.ssim_mean << " +- " << r.report.ssim_std << ", FID "
                << r.report.fid << " (original " << r.fid_original << ")\n";
    } else if (baseline->parsed()) {
      const auto id = bt::cmd_baseline(input, target, bt::resolve_output_path(output), seed);
      std::cout << "reference image " << id << '\n';
    } else if (report->parsed()) {
      std::cout << bt::cmd_report(report_dir).string() << '\n';
    }
  } catch (const bt::Error& e) {
    std::cerr << "error [" << bt::to_string(e.kind()) << "]: " << e.what() << '\n';
    return bt::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
