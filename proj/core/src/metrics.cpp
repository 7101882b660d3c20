#include "biastransfer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>

#include "biastransfer/errors.hpp"

namespace bt {

ClassificationScores classification_scores(std::span<const int> preds, std::span<const int> labels,
                                           std::span<const int> classes) {
  if (preds.size() != labels.size()) {
    throw DimensionError("classification_scores: " + std::to_string(preds.size()) +
                         " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  if (preds.empty()) throw DataError("classification_scores: empty input");
  ClassificationScores out;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
  out.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());

  const std::set<int> present = [&] {
    std::set<int> s(labels.begin(), labels.end());
    s.insert(preds.begin(), preds.end());
    return s;
  }();
  double f1_sum = 0.0;
  int counted = 0;
  for (int c : std::set<int>(classes.begin(), classes.end())) {
    if (!present.contains(c)) continue;
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const bool p = preds[i] == c, l = labels[i] == c;
      tp += p && l;
      fp += p && !l;
      fn += !p && l;
    }
    const double denom = static_cast<double>(2 * tp + fp + fn);
    f1_sum += denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
    ++counted;
  }
  out.macro_f1 = counted > 0 ? f1_sum / counted : 0.0;
  return out;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "'");
}

void MetricReport::validate() const {
  auto unit = [](const char* name, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw NumericError(std::string(name) + " outside [0, 1]");
  };
  if (!(ssim_mean >= -1.0 && ssim_mean <= 1.0)) throw NumericError("ssim_mean outside [-1, 1]");
  if (!(ms_ssim_mean >= 0.0 && ms_ssim_mean <= 1.0)) throw NumericError("ms_ssim_mean outside [0, 1]");
  if (!(ssim_std >= 0.0)) throw NumericError("ssim_std negative");
  if (!(fid >= -1e-3)) throw NumericError("fid negative");
  if (dice_glom_pix) unit("dice_glom_pix", *dice_glom_pix);
  if (dice_podo_pix) unit("dice_podo_pix", *dice_podo_pix);
  if (dice_podo_obj) unit("dice_podo_obj", *dice_podo_obj);
  if (accuracy) unit("accuracy", *accuracy);
  if (macro_f1) unit("macro_f1", *macro_f1);
}

namespace {
template <class T>
void put_optional(nlohmann::json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
std::optional<double> get_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}
}  // namespace

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["split"] = to_string(r.split);
  j["ssim_mean"] = r.ssim_mean;
  j["ssim_std"] = r.ssim_std;
  j["ms_ssim_mean"] = r.ms_ssim_mean;
  j["ms_ssim_scales"] = r.ms_ssim_scales;
  j["fid"] = r.fid;
  j["fid_extractor"] = r.fid_extractor;
  put_optional(j, "dice_glom_pix", r.dice_glom_pix);
  put_optional(j, "dice_podo_pix", r.dice_podo_pix);
  put_optional(j, "dice_podo_obj", r.dice_podo_obj);
  put_optional(j, "accuracy", r.accuracy);
  put_optional(j, "macro_f1", r.macro_f1);
  j["pairs"] = r.pairs.size();
  return j;
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
  MetricReport r;
  try {
    r.split = parse_split(j.at("split").get<std::string>());
    r.ssim_mean = j.at("ssim_mean").get<double>();
    r.ssim_std = j.at("ssim_std").get<double>();
    r.ms_ssim_mean = j.at("ms_ssim_mean").get<double>();
    r.ms_ssim_scales = j.value("ms_ssim_scales", 5);
    r.fid = j.at("fid").get<double>();
    r.fid_extractor = j.value("fid_extractor", std::string());
    r.dice_glom_pix = get_optional(j, "dice_glom_pix");
    r.dice_podo_pix = get_optional(j, "dice_podo_pix");
    r.dice_podo_obj = get_optional(j, "dice_podo_obj");
    r.accuracy = get_optional(j, "accuracy");
    r.macro_f1 = get_optional(j, "macro_f1");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed metric report: ") + e.what());
  }
  return r;
}

void write_pairs_csv(const std::filesystem::path& path, const MetricReport& r) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "image_id,ssim,ms_ssim\n" << std::setprecision(9);
  for (const auto& p : r.pairs) out << p.image_id << ',' << p.ssim << ',' << p.ms_ssim << '\n';
}

std::pair<double, double> mean_std(std::span<const double> v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

}  // namespace bt
