#include "cwr/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "cwr/model_io.hpp"

namespace cwr {

namespace {

void round_floats(nlohmann::json& j) {
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (!std::isfinite(v)) {
            j = nullptr;
            return;
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        j = std::strtod(buf, nullptr);
    } else if (j.is_structured()) {
        for (auto& item : j) round_floats(item);
    }
}

std::string fixed(double v, int digits = 2) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string escape_csv(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// Blue (low) to red (high) through white.
std::string heat_colour(double t) {
    t = std::clamp(t, 0.0, 1.0);
    int r, g, b;
    if (t < 0.5) {
        const double u = t / 0.5;
        r = static_cast<int>(std::lround(49 + u * (247 - 49)));
        g = static_cast<int>(std::lround(54 + u * (247 - 54)));
        b = static_cast<int>(std::lround(149 + u * (247 - 149)));
    } else {
        const double u = (t - 0.5) / 0.5;
        r = static_cast<int>(std::lround(247 + u * (165 - 247)));
        g = static_cast<int>(std::lround(247 + u * (0 - 247)));
        b = static_cast<int>(std::lround(247 + u * (38 - 247)));
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

const char* const kSeriesColours[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52"};

}  // namespace

std::string canonical_json(const nlohmann::json& j) {
    nlohmann::json copy = j;
    round_floats(copy);
    return copy.dump(2) + "\n";
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

nlohmann::json report_to_json(const ClasswiseReport& r) {
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t j = 0; j < r.num_classes; ++j) {
        classes.push_back({{"index", j},
                           {"name", r.class_names[j]},
                           {"support", r.support[j]},
                           {"recall", r.recall[j] ? nlohmann::json(*r.recall[j]) : nlohmann::json(nullptr)},
                           {"cwa", r.cwa[j]},
                           {"cfps", r.cfps.scores[j]},
                           {"strength", to_string(r.strength[j])}});
    }
    nlohmann::json grid = nlohmann::json::array();
    for (std::size_t i = 0; i < r.num_classes; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t k = 0; k < r.num_classes; ++k) row.push_back(r.confusion.at(i, k));
        grid.push_back(row);
    }
    nlohmann::json out{{"num_classes", r.num_classes},
                       {"sample_count", r.sample_count},
                       {"misclassified", r.misclassified},
                       {"overall_accuracy", r.overall_accuracy},
                       {"cfps_degenerate", r.cfps.degenerate},
                       {"classes", classes},
                       {"confusion", grid},
                       {"provenance", r.provenance},
                       {"model_hash", r.model_hash},
                       {"figure_class_accuracy", "recall"}};
    if (r.targeted_success_rate) out["targeted_success_rate"] = *r.targeted_success_rate;
    return out;
}

ClasswiseReport report_from_json(const nlohmann::json& j) {
    try {
        const std::size_t c = j.at("num_classes").get<std::size_t>();
        std::vector<std::uint64_t> counts;
        for (const auto& row : j.at("confusion"))
            for (const auto& v : row) counts.push_back(v.get<std::uint64_t>());
        // derived fields are recomputed from the counts
        ConfusionMatrix cm(c, std::move(counts));
        ClasswiseReport r;
        r.confusion = cm;
        r.num_classes = c;
        for (const auto& cls : j.at("classes")) r.class_names.push_back(cls.at("name").get<std::string>());
        for (std::size_t k = 0; k < c; ++k) r.support.push_back(cm.row_sum(k));
        r.recall = recall(cm);
        r.cwa = cwa(cm);
        r.cfps = cfps(cm);
        r.overall_accuracy = overall_accuracy(cm);
        r.strength = strong_weak(r.recall, r.overall_accuracy);
        r.sample_count = cm.total();
        r.misclassified = r.sample_count - cm.trace();
        r.provenance = j.value("provenance", nlohmann::json::object());
        r.model_hash = j.value("model_hash", std::string{});
        if (j.contains("targeted_success_rate")) r.targeted_success_rate = j.at("targeted_success_rate").get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("report JSON: ") + e.what());
    }
}

std::string report_csv(const ClasswiseReport& r) {
    std::ostringstream out;
    out << "class_index,class_name,support,recall,cwa,cfps,strength\n";
    for (std::size_t j = 0; j < r.num_classes; ++j) {
        out << j << ',' << escape_csv(r.class_names[j]) << ',' << r.support[j] << ','
            << (r.recall[j] ? format_number(*r.recall[j]) : "") << ',' << format_number(r.cwa[j]) << ','
            << format_number(r.cfps.scores[j]) << ',' << to_string(r.strength[j]) << '\n';
    }
    return out.str();
}

std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
    std::ostringstream out;
    out << "truth\\pred";
    for (const auto& n : names) out << ',' << escape_csv(n);
    out << '\n';
    for (std::size_t r = 0; r < cm.num_classes(); ++r) {
        out << escape_csv(names[r]);
        for (std::size_t c = 0; c < cm.num_classes(); ++c) out << ',' << cm.at(r, c);
        out << '\n';
    }
    return out.str();
}

std::string grid_csv(const std::vector<double>& values, const std::vector<std::string>& row_names,
                     const std::vector<std::string>& col_names, const std::string& corner) {
    std::ostringstream out;
    out << escape_csv(corner);
    for (const auto& n : col_names) out << ',' << escape_csv(n);
    out << '\n';
    for (std::size_t r = 0; r < row_names.size(); ++r) {
        out << escape_csv(row_names[r]);
        for (std::size_t c = 0; c < col_names.size(); ++c) out << ',' << format_number(values[r * col_names.size() + c]);
        out << '\n';
    }
    return out.str();
}

std::string emit_report(const ClasswiseReport& report, ReportFormat format) {
    return format == ReportFormat::json ? canonical_json(report_to_json(report)) : report_csv(report);
}

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<std::vector<double>>& series, const std::vector<std::string>& series_names,
                          std::optional<double> reference_line) {
    const double left = 60, top = 40, plot_h = 240, group_w = 56;
    const double plot_w = group_w * static_cast<double>(std::max<std::size_t>(1, labels.size()));
    const double width = left + plot_w + 20, height = top + plot_h + 70;
    const double bar_w = (group_w - 12) / static_cast<double>(std::max<std::size_t>(1, series.size()));

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width) << "\" height=\"" << fixed(height)
      << "\" viewBox=\"0 0 " << fixed(width) << ' ' << fixed(height) << "\">\n";
    s << "<rect x=\"0\" y=\"0\" width=\"" << fixed(width) << "\" height=\"" << fixed(height) << "\" fill=\"white\"/>\n";
    s << "<text x=\"" << fixed(width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"14\">" << escape_xml(title) << "</text>\n";
    for (int t = 0; t <= 4; ++t) {
        const double y = top + plot_h - plot_h * t / 4.0;
        s << "<line x1=\"" << fixed(left) << "\" y1=\"" << fixed(y) << "\" x2=\"" << fixed(left + plot_w) << "\" y2=\""
          << fixed(y) << "\" stroke=\"#dddddd\"/>\n";
        s << "<text x=\"" << fixed(left - 6) << "\" y=\"" << fixed(y + 4)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fixed(t / 4.0) << "</text>\n";
    }
    for (std::size_t g = 0; g < labels.size(); ++g) {
        const double gx = left + group_w * static_cast<double>(g) + 6;
        for (std::size_t k = 0; k < series.size(); ++k) {
            const double v = std::clamp(series[k][g], 0.0, 1.0);
            const double h = plot_h * v;
            s << "<rect class=\"bar\" x=\"" << fixed(gx + bar_w * static_cast<double>(k)) << "\" y=\""
              << fixed(top + plot_h - h) << "\" width=\"" << fixed(bar_w) << "\" height=\"" << fixed(h)
              << "\" fill=\"" << kSeriesColours[k % 4] << "\"><title>" << escape_xml(labels[g]) << ' '
              << escape_xml(series_names[k]) << ' ' << format_number(series[k][g]) << "</title></rect>\n";
        }
        s << "<text x=\"" << fixed(gx + (group_w - 12) / 2) << "\" y=\"" << fixed(top + plot_h + 16)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << escape_xml(labels[g])
          << "</text>\n";
    }
    if (reference_line) {
        const double y = top + plot_h - plot_h * std::clamp(*reference_line, 0.0, 1.0);
        s << "<line class=\"reference\" x1=\"" << fixed(left) << "\" y1=\"" << fixed(y) << "\" x2=\""
          << fixed(left + plot_w) << "\" y2=\"" << fixed(y) << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
    }
    s << "<line x1=\"" << fixed(left) << "\" y1=\"" << fixed(top + plot_h) << "\" x2=\"" << fixed(left + plot_w)
      << "\" y2=\"" << fixed(top + plot_h) << "\" stroke=\"black\"/>\n";
    for (std::size_t k = 0; k < series_names.size(); ++k) {
        const double lx = left + 110 * static_cast<double>(k), ly = top + plot_h + 40;
        s << "<rect x=\"" << fixed(lx) << "\" y=\"" << fixed(ly) << "\" width=\"10\" height=\"10\" fill=\""
          << kSeriesColours[k % 4] << "\"/>\n";
        s << "<text x=\"" << fixed(lx + 14) << "\" y=\"" << fixed(ly + 9)
          << "\" font-family=\"sans-serif\" font-size=\"10\">" << escape_xml(series_names[k]) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::string svg_heatmap(const std::string& title, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::vector<double>& values,
                        bool integer_labels) {
    const double cell = 36, left = 90, top = 50;
    const double width = left + cell * static_cast<double>(col_labels.size()) + 20;
    const double height = top + cell * static_cast<double>(row_labels.size()) + 30;
    const double peak = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width) << "\" height=\"" << fixed(height)
      << "\" viewBox=\"0 0 " << fixed(width) << ' ' << fixed(height) << "\">\n";
    s << "<rect x=\"0\" y=\"0\" width=\"" << fixed(width) << "\" height=\"" << fixed(height) << "\" fill=\"white\"/>\n";
    s << "<text x=\"" << fixed(width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"14\">" << escape_xml(title) << "</text>\n";
    for (std::size_t c = 0; c < col_labels.size(); ++c)
        s << "<text class=\"col-label\" x=\"" << fixed(left + cell * (static_cast<double>(c) + 0.5)) << "\" y=\""
          << fixed(top - 6) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"9\">"
          << escape_xml(col_labels[c]) << "</text>\n";
    for (std::size_t r = 0; r < row_labels.size(); ++r) {
        const double y = top + cell * static_cast<double>(r);
        s << "<text class=\"row-label\" x=\"" << fixed(left - 6) << "\" y=\"" << fixed(y + cell / 2 + 3)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"9\">" << escape_xml(row_labels[r])
          << "</text>\n";
        for (std::size_t c = 0; c < col_labels.size(); ++c) {
            const double v = values[r * col_labels.size() + c];
            const double x = left + cell * static_cast<double>(c);
            s << "<rect class=\"cell\" x=\"" << fixed(x) << "\" y=\"" << fixed(y) << "\" width=\"" << fixed(cell)
              << "\" height=\"" << fixed(cell) << "\" fill=\"" << heat_colour(peak > 0 ? v / peak : 0.0)
              << "\"/>\n";
            s << "<text x=\"" << fixed(x + cell / 2) << "\" y=\"" << fixed(y + cell / 2 + 3)
              << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"9\">"
              << (integer_labels ? std::to_string(static_cast<long long>(std::llround(v))) : fixed(v))
              << "</text>\n";
        }
    }
    s << "</svg>\n";
    return s.str();
}

std::string emit_figure(const ClasswiseReport& r, FigureKind kind) {
    if (kind == FigureKind::bars) {
        std::vector<double> recall_values, cfps_values = r.cfps.scores;
        for (const auto& v : r.recall) recall_values.push_back(v.value_or(0.0));
        return svg_bar_chart("Class-wise recall and CFPS", r.class_names, {recall_values, cfps_values},
                             {"recall", "CFPS"}, r.overall_accuracy);
    }
    std::vector<double> values(r.confusion.counts().begin(), r.confusion.counts().end());
    return svg_heatmap("Confusion matrix (rows: ground truth, columns: prediction)", r.class_names, r.class_names,
                       values, true);
}

void write_report_files(const ClasswiseReport& report, const std::filesystem::path& dir, const std::string& stem) {
    write_text(dir / (stem + ".json"), emit_report(report, ReportFormat::json));
    write_text(dir / (stem + ".csv"), emit_report(report, ReportFormat::csv));
    write_text(dir / (stem + "_confusion.csv"), confusion_csv(report.confusion, report.class_names));
    write_text(dir / (stem + "_bars.svg"), emit_figure(report, FigureKind::bars));
    write_text(dir / (stem + "_heatmap.svg"), emit_figure(report, FigureKind::heatmap));
}

}  // namespace cwr
