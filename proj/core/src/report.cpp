#include "biastransfer/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <sstream>

#include "biastransfer/errors.hpp"

namespace bt {

BoxStats box_stats(std::vector<double> v) {
  if (v.empty()) throw DataError("box_stats: no values");
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {v.front(), q(0.25), q(0.5), q(0.75), v.back()};
}

void render_boxplot(const std::filesystem::path& path, const std::string& title,
                    const std::vector<BoxSeries>& series) {
  if (series.empty()) throw DataError("render_boxplot: no series");
  constexpr int kBox = 90, kLeft = 70, kTop = 40, kPlot = 300, kBottom = 60;
  const int width = kLeft + kBox * static_cast<int>(series.size()) + 20;
  cv::Mat canvas(kTop + kPlot + kBottom, width, CV_8UC3, cv::Scalar(255, 255, 255));

  double lo = INFINITY, hi = -INFINITY;
  std::vector<BoxStats> stats;
  for (const auto& s : series) {
    stats.push_back(box_stats(s.values));
    lo = std::min(lo, stats.back().min);
    hi = std::max(hi, stats.back().max);
  }
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto ypix = [&](double v) { return kTop + static_cast<int>(std::lround((hi - v) / (hi - lo) * kPlot)); };

  const cv::Scalar black(0, 0, 0), grey(160, 160, 160), fill(230, 200, 170);
  cv::putText(canvas, title, {kLeft, 25}, cv::FONT_HERSHEY_SIMPLEX, 0.55, black, 1, cv::LINE_AA);
  cv::line(canvas, {kLeft - 5, kTop}, {kLeft - 5, kTop + kPlot}, black);
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    std::ostringstream label;
    label << std::setprecision(3) << v;
    cv::line(canvas, {kLeft - 9, ypix(v)}, {kLeft - 5, ypix(v)}, black);
    cv::putText(canvas, label.str(), {4, ypix(v) + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1,
                cv::LINE_AA);
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& b = stats[i];
    const int x0 = kLeft + static_cast<int>(i) * kBox + 15, x1 = x0 + kBox - 30, xm = (x0 + x1) / 2;
    cv::line(canvas, {xm, ypix(b.min)}, {xm, ypix(b.q1)}, grey);
    cv::line(canvas, {xm, ypix(b.q3)}, {xm, ypix(b.max)}, grey);
    cv::line(canvas, {x0 + 10, ypix(b.min)}, {x1 - 10, ypix(b.min)}, black);
    cv::line(canvas, {x0 + 10, ypix(b.max)}, {x1 - 10, ypix(b.max)}, black);
    cv::rectangle(canvas, {x0, ypix(b.q3)}, {x1, ypix(b.q1)}, fill, cv::FILLED);
    cv::rectangle(canvas, {x0, ypix(b.q3)}, {x1, ypix(b.q1)}, black);
    cv::line(canvas, {x0, ypix(b.median)}, {x1, ypix(b.median)}, cv::Scalar(0, 0, 200), 2);
    cv::putText(canvas, series[i].label.substr(0, 12), {x0 - 8, kTop + kPlot + 25},
                cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1, cv::LINE_AA);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), canvas)) throw IoError("cannot write plot " + path.string());
}

std::string render_markdown_summary(const std::vector<nlohmann::json>& reports) {
  std::vector<const nlohmann::json*> order;
  for (const char* split : {"val", "test"}) {
    for (const auto& r : reports) {
      if (r.value("split", std::string()) == split) order.push_back(&r);
    }
  }
  for (const auto& r : reports) {
    const auto s = r.value("split", std::string());
    if (s != "val" && s != "test") order.push_back(&r);
  }
  auto cell = [](const nlohmann::json& r, const char* key) -> std::string {
    if (!r.contains(key) || r.at(key).is_null()) return "-";
    if (r.at(key).is_number()) {
      std::ostringstream os;
      os << std::fixed << std::setprecision(4) << r.at(key).get<double>();
      return os.str();
    }
    return r.at(key).dump();
  };
  std::ostringstream md;
  md << "| name | split | SSIM mean | SSIM std | MS-SSIM | FID | accuracy | macro F1 |\n"
     << "|---|---|---|---|---|---|---|---|\n";
  for (const auto* r : order) {
    md << "| " << r->value("name", std::string("?")) << " | " << r->value("split", std::string("?"))
       << " | " << cell(*r, "ssim_mean") << " | " << cell(*r, "ssim_std") << " | "
       << cell(*r, "ms_ssim_mean") << " | " << cell(*r, "fid") << " | " << cell(*r, "accuracy")
       << " | " << cell(*r, "macro_f1") << " |\n";
  }
  return md.str();
}

}  // namespace bt
