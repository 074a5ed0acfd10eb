#include "lrbench/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lrbench/errors.hpp"
#include "lrbench/text.hpp"
#include "lrbench/zeroshot.hpp"

namespace lrbench {

namespace fs = std::filesystem;

std::vector<double> l2_normalized(const std::vector<double>& v) {
    double norm = 0.0;
    for (const double x : v) {
        norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm <= 0.0) {
        throw ValidationError("cannot normalize a zero feature vector");
    }
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i] / norm;
    }
    return out;
}

SimilarityHeatmap layer_similarity(const std::vector<std::vector<double>>& features_lr,
                                   const std::vector<std::vector<double>>& features_hr) {
    if (features_lr.size() != features_hr.size() || features_lr.empty()) {
        throw ValidationError("layer_similarity: layer counts differ or are empty");
    }
    const std::size_t dim = features_lr.front().size();
    const auto check = [dim](const std::vector<std::vector<double>>& feats) {
        for (const auto& f : feats) {
            if (f.size() != dim) {
                throw ValidationError("layer_similarity: feature dims differ");
            }
            double norm = 0.0;
            for (const double x : f) {
                norm += x * x;
            }
            if (std::abs(std::sqrt(norm) - 1.0) > 1e-5) {
                throw ValidationError("layer_similarity: features must be L2-normalized");
            }
        }
    };
    check(features_lr);
    check(features_hr);

    SimilarityHeatmap heatmap;
    heatmap.size = static_cast<int>(features_lr.size());
    heatmap.values.assign(static_cast<std::size_t>(heatmap.size) * heatmap.size, 0.0);
    for (int i = 0; i < heatmap.size; ++i) {
        for (int j = 0; j < heatmap.size; ++j) {
            double dist2 = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = features_lr[static_cast<std::size_t>(i)][d] -
                                    features_hr[static_cast<std::size_t>(j)][d];
                dist2 += diff * diff;
            }
            heatmap.at(i, j) = 1.0 / (1.0 + std::sqrt(dist2));
        }
    }
    return heatmap;
}

void write_heatmap_csv(const SimilarityHeatmap& heatmap, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    for (int i = 0; i < heatmap.size; ++i) {
        for (int j = 0; j < heatmap.size; ++j) {
            out << format_double(heatmap.at(i, j));
            out << (j + 1 == heatmap.size ? '\n' : ',');
        }
    }
}

SimilarityHeatmap load_heatmap_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        std::vector<double> row;
        for (const auto& field : split_csv_line(line)) {
            const auto v = parse_double(field);
            if (!v) {
                throw ValidationError(path + ": bad number '" + field + "'");
            }
            row.push_back(*v);
        }
        rows.push_back(std::move(row));
    }
    SimilarityHeatmap heatmap;
    heatmap.size = static_cast<int>(rows.size());
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != heatmap.size) {
            throw ValidationError(path + ": heatmap is not square");
        }
        heatmap.values.insert(heatmap.values.end(), row.begin(), row.end());
    }
    return heatmap;
}

void export_features(const Mat& features, const std::string& bin_path) {
    EmbeddingMatrix matrix(features.rows, features.cols);
    matrix.values = features.v;
    matrix.normalized = false;
    save_embedding_matrix(matrix, bin_path);
}

namespace {

// Minimal SVG writer. Charts carry their data as a CSV block inside
// <metadata id="chart-data"> so tests can parse the numbers back.
class SvgChart {
  public:
    SvgChart(int width, int height) : width_(width), height_(height) {}

    void set_data_block(std::string csv) { data_ = std::move(csv); }

    void add_polyline(const std::vector<std::pair<double, double>>& points,
                      const std::string& color) {
        std::ostringstream body;
        body << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : points) {
            body << format_double(x) << ',' << format_double(y) << ' ';
        }
        body << "\"/>\n";
        shapes_ += body.str();
    }

    void add_rect(double x, double y, double w, double h, const std::string& color) {
        std::ostringstream body;
        body << "  <rect x=\"" << format_double(x) << "\" y=\"" << format_double(y)
             << "\" width=\"" << format_double(w) << "\" height=\"" << format_double(h)
             << "\" fill=\"" << color << "\"/>\n";
        shapes_ += body.str();
    }

    void add_text(double x, double y, const std::string& text) {
        std::ostringstream body;
        body << "  <text x=\"" << format_double(x) << "\" y=\"" << format_double(y)
             << "\" font-size=\"10\" font-family=\"sans-serif\">" << text << "</text>\n";
        shapes_ += body.str();
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) {
            throw IoError("cannot write " + path);
        }
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\""
            << height_ << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\">\n";
        out << "  <metadata id=\"chart-data\"><![CDATA[\n" << data_ << "]]></metadata>\n";
        out << "  <rect x=\"0\" y=\"0\" width=\"" << width_ << "\" height=\"" << height_
            << "\" fill=\"white\"/>\n";
        out << shapes_;
        out << "</svg>\n";
    }

  private:
    int width_;
    int height_;
    std::string data_;
    std::string shapes_;
};

const char* series_color(std::size_t i) {
    static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    return kColors[i % (sizeof(kColors) / sizeof(kColors[0]))];
}

void write_accuracy_chart(const MetricsResult& metrics, const std::string& path) {
    // model -> resolution -> acc
    std::map<std::string, std::map<int, double>> series;
    std::set<int> resolutions;
    for (const auto& agg : metrics.aggregates) {
        series[agg.model_id][agg.resolution] = agg.acc;
        resolutions.insert(agg.resolution);
    }

    std::ostringstream data;
    data << "model_id,resolution,acc\n";
    for (const auto& [model, points] : series) {
        for (const auto& [res, acc] : points) {
            data << model << ',' << res << ',' << format_double(acc) << '\n';
        }
    }

    const int width = 480;
    const int height = 320;
    const double margin = 40.0;
    SvgChart chart(width, height);
    chart.set_data_block(data.str());
    if (!series.empty()) {
        const double res_min = static_cast<double>(*resolutions.begin());
        const double res_max = static_cast<double>(*resolutions.rbegin());
        const double span = std::max(1.0, res_max - res_min);
        std::size_t idx = 0;
        for (const auto& [model, points] : series) {
            std::vector<std::pair<double, double>> line;
            for (const auto& [res, acc] : points) {
                const double x = margin + (res - res_min) / span * (width - 2 * margin);
                const double y = height - margin - acc * (height - 2 * margin);
                line.emplace_back(x, y);
            }
            chart.add_polyline(line, series_color(idx));
            chart.add_text(margin, margin + 12.0 * static_cast<double>(idx), model);
            ++idx;
        }
    }
    chart.save(path);
}

void write_gamma_bars_chart(const MetricsResult& metrics, int resolution,
                            const std::string& path) {
    // dataset -> mean gamma over models at `resolution`
    std::map<std::string, std::pair<double, int>> sums;
    for (const auto& cell : metrics.cells) {
        if (cell.resolution == resolution) {
            auto& [sum, count] = sums[cell.dataset_id];
            sum += cell.gamma;
            ++count;
        }
    }

    std::ostringstream data;
    data << "dataset_id,resolution,mean_gamma\n";
    std::vector<std::pair<std::string, double>> bars;
    for (const auto& [dataset, sum_count] : sums) {
        const double mean = sum_count.first / sum_count.second;
        data << dataset << ',' << resolution << ',' << format_double(mean) << '\n';
        bars.emplace_back(dataset, mean);
    }

    const int width = 480;
    const int height = 320;
    const double margin = 40.0;
    SvgChart chart(width, height);
    chart.set_data_block(data.str());
    if (!bars.empty()) {
        double max_gamma = 0.0;
        for (const auto& [unused, mean] : bars) {
            max_gamma = std::max(max_gamma, std::abs(mean));
        }
        max_gamma = std::max(max_gamma, 1e-9);
        const double slot = (width - 2 * margin) / static_cast<double>(bars.size());
        for (std::size_t i = 0; i < bars.size(); ++i) {
            const double h = std::abs(bars[i].second) / max_gamma * (height - 2 * margin);
            chart.add_rect(margin + slot * static_cast<double>(i) + slot * 0.1,
                           height - margin - h, slot * 0.8, h, series_color(i));
        }
    }
    chart.save(path);
}

}  // namespace

void emit_report(const MetricsResult& metrics,
                 const std::vector<std::pair<int, SimilarityHeatmap>>& heatmaps,
                 const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "charts", ec);
    if (ec) {
        throw IoError("cannot create report directory " + out_dir);
    }
    write_scores_csv(metrics, (fs::path(out_dir) / "scores.csv").string());
    write_cells_csv(metrics, (fs::path(out_dir) / "cells.csv").string());
    for (const auto& [n, heatmap] : heatmaps) {
        write_heatmap_csv(heatmap,
                          (fs::path(out_dir) / ("heatmap_" + std::to_string(n) + ".csv")).string());
    }
    write_accuracy_chart(metrics,
                         (fs::path(out_dir) / "charts" / "accuracy_vs_resolution.svg").string());

    std::set<int> resolutions;
    for (const auto& cell : metrics.cells) {
        resolutions.insert(cell.resolution);
    }
    for (const int n : resolutions) {
        write_gamma_bars_chart(
            metrics, n,
            (fs::path(out_dir) / "charts" / ("gamma_bars_" + std::to_string(n) + ".svg")).string());
    }
}

std::string chart_data_block(const std::string& svg_path) {
    std::ifstream in(svg_path);
    if (!in) {
        throw IoError("cannot open " + svg_path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string content = buffer.str();
    const std::string open = "<![CDATA[\n";
    const std::string close = "]]>";
    const auto start = content.find(open);
    if (start == std::string::npos) {
        throw ValidationError(svg_path + ": no embedded data block");
    }
    const auto end = content.find(close, start);
    if (end == std::string::npos) {
        throw ValidationError(svg_path + ": unterminated data block");
    }
    return content.substr(start + open.size(), end - start - open.size());
}

}  // namespace lrbench
