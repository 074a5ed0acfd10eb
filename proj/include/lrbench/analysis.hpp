#pragma once

// Layer-wise LR/HR feature similarity, feature export, and the report
// bundle (CSVs plus SVG charts with the numbers embedded for parse-back).

#include <string>
#include <utility>
#include <vector>

#include "lrbench/metrics.hpp"
#include "lrbench/tinyvit.hpp"

namespace lrbench {

struct SimilarityHeatmap {
    int size = 0;
    std::vector<double> values;  // size x size, row = LR layer, col = HR layer

    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * size + j]; }
    double& at(int i, int j) { return values[static_cast<std::size_t>(i) * size + j]; }
};

std::vector<double> l2_normalized(const std::vector<double>& v);

// S[i][j] = 1 / (1 + ||f_i_lr - f_j_hr||_2) over L2-normalized per-layer
// features; inputs must already be normalized (within 1e-5).
SimilarityHeatmap layer_similarity(const std::vector<std::vector<double>>& features_lr,
                                   const std::vector<std::vector<double>>& features_hr);

void write_heatmap_csv(const SimilarityHeatmap& heatmap, const std::string& path);
SimilarityHeatmap load_heatmap_csv(const std::string& path);

// Row-major float32 matrix + JSON sidecar, same layout the zero-shot
// embeddings use.
void export_features(const Mat& features, const std::string& bin_path);

// Writes scores.csv, cells.csv, heatmap_<n>.csv, and charts/*.svg into
// `out_dir`. Every chart embeds its numeric data in a CSV block inside
// <metadata id="chart-data">.
void emit_report(const MetricsResult& metrics,
                 const std::vector<std::pair<int, SimilarityHeatmap>>& heatmaps,
                 const std::string& out_dir);

// Extracts the embedded CSV block from a chart written by emit_report.
std::string chart_data_block(const std::string& svg_path);

}  // namespace lrbench
