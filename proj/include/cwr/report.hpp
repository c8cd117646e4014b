#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cwr/metrics.hpp"

namespace cwr {

enum class ReportFormat { json, csv };
enum class FigureKind { bars, heatmap };

/// Rounds every float in `j` to 9 significant digits and dumps it with
/// sorted keys and two-space indentation, newline terminated.
std::string canonical_json(const nlohmann::json& j);

/// Fixed "%.9g" rendering used in every CSV.
std::string format_number(double v);

nlohmann::json report_to_json(const ClasswiseReport& report);
ClasswiseReport report_from_json(const nlohmann::json& j);

/// Class-wise CSV, one row per class:
/// class_index,class_name,support,recall,cwa,cfps,strength (missing recall is empty).
std::string report_csv(const ClasswiseReport& report);

/// Counts grid; first row and column carry the class names.
std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names);
/// Real-valued grid (e.g. the elementwise mean of several matrices).
std::string grid_csv(const std::vector<double>& values, const std::vector<std::string>& row_names,
                     const std::vector<std::string>& col_names, const std::string& corner = "truth\\pred");

std::string emit_report(const ClasswiseReport& report, ReportFormat format);

/// bars: per-class recall and CFPS with the overall accuracy as a dashed line.
/// heatmap: confusion matrix, ground truth on rows, predictions on columns;
/// every cell is a <rect class="cell">.
std::string emit_figure(const ClasswiseReport& report, FigureKind kind);

/// Standalone SVG bar chart; values are plotted on a [0, 1] axis.
std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<std::vector<double>>& series,
                          const std::vector<std::string>& series_names,
                          std::optional<double> reference_line = std::nullopt);

/// Standalone SVG heatmap of a row-major grid; colour scales with values /
/// max(values). Cells are <rect class="cell">.
std::string svg_heatmap(const std::string& title, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::vector<double>& values,
                        bool integer_labels);

/// Writes <stem>.json, <stem>.csv, <stem>_confusion.csv, <stem>_bars.svg and
/// <stem>_heatmap.svg into `dir`.
void write_report_files(const ClasswiseReport& report, const std::filesystem::path& dir, const std::string& stem);

}  // namespace cwr
