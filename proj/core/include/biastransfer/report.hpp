#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace bt {

struct BoxSeries {
  std::string label;
  std::vector<double> values;
};

struct BoxStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

/// Quartiles by linear interpolation between order statistics.
BoxStats box_stats(std::vector<double> values);

/// Static box plot, one box per series, written as PNG.
void render_boxplot(const std::filesystem::path& path, const std::string& title,
                    const std::vector<BoxSeries>& series);

/// Markdown summary of evaluation JSON files: one row per report with its
/// split kept in a separate column, validation rows before test rows.
std::string render_markdown_summary(const std::vector<nlohmann::json>& reports);

}  // namespace bt
