#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bt {

struct ClassificationScores {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// Accuracy and macro F1. F1 is averaged over the classes in `classes`
/// that occur in labels or predictions; a class occurring in neither is
/// excluded.
ClassificationScores classification_scores(std::span<const int> preds, std::span<const int> labels,
                                           std::span<const int> classes);

enum class Split { train, val, test };
std::string to_string(Split s);
Split parse_split(const std::string& s);

/// Per-pair similarity row of a report.
struct PairScore {
  std::string image_id;
  double ssim = 0.0;
  double ms_ssim = 0.0;
};

struct MetricReport {
  Split split = Split::val;
  double ssim_mean = 0.0;
  double ssim_std = 0.0;
  double ms_ssim_mean = 0.0;
  int ms_ssim_scales = 5;
  double fid = 0.0;
  std::string fid_extractor;
  std::optional<double> dice_glom_pix;
  std::optional<double> dice_podo_pix;
  std::optional<double> dice_podo_obj;
  std::optional<double> accuracy;
  std::optional<double> macro_f1;
  std::vector<PairScore> pairs;

  /// Throws NumericError when a present score is outside its range.
  void validate() const;
};

nlohmann::json to_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);
/// One CSV row per pair: image_id,ssim,ms_ssim.
void write_pairs_csv(const std::filesystem::path& path, const MetricReport& r);

/// Population mean and standard deviation.
std::pair<double, double> mean_std(std::span<const double> v);

}  // namespace bt
