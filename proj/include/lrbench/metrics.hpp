#pragma once

// Robustness metrics: relative robustness gamma, accuracy gap, improved
// robustness Gamma = gamma * (1 - exp(-alpha * gap^2)), the SAR/WAR/ACC
// aggregates, and Spearman rank correlation with average-rank ties.
//
// All operations are pure functions over immutable inputs. Degenerate cases
// (zero HR accuracy, constant rank input) yield a defined result of 0 plus a
// flag instead of an error so batch computation stays total.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrbench/results_store.hpp"

namespace lrbench {

struct RobustnessConfig {
    double alpha = 200.0;                    // decay rate toward random predictions
    std::map<std::string, int> hr_lookup;    // filled from model metas when empty

    void validate() const;  // alpha >= 1
};

// Cell flags, serialized as '|'-joined names in cells.csv.
enum CellFlag : unsigned {
    kCellNone = 0,
    kCellDegenerateHr = 1u << 0,  // a_hr == 0, gamma defined as 0
    kCellGapClamped = 1u << 1,    // a_hr < 1/C, gap clamped to 0
};

std::string cell_flags_to_string(unsigned flags);

struct CellScore {
    std::string model_id;
    std::string dataset_id;
    int resolution = 0;
    double gamma = 0.0;
    double gamma_improved = 0.0;
    double gap = 0.0;
    unsigned flags = kCellNone;
};

struct ModelAggregate {
    std::string model_id;
    int resolution = 0;
    double sar = 0.0;  // mean of per-dataset gamma
    double war = 0.0;  // sum(|Gamma * w|) / sum(|w|)
    double acc = 0.0;  // mean top-1
    int datasets_used = 0;
};

struct MetricsResult {
    std::vector<CellScore> cells;
    std::vector<ModelAggregate> aggregates;
    std::vector<std::string> models_without_hr;  // flagged, not silently dropped
    std::size_t missing_cells = 0;               // (model, dataset, n) absent from the table
};

// gamma = 1 - (a_hr - a_n) / a_hr. May exceed 1 when the LR accuracy beats HR.
// a_hr == 0 yields 0 and sets kCellDegenerateHr in *flags when provided.
double relative_robustness(double a_hr, double a_n, unsigned* flags = nullptr);

// E_D = max(0, a_hr - 1/C); sets kCellGapClamped when clamped.
double accuracy_gap(double a_hr, int num_classes, unsigned* flags = nullptr);

// Gamma = gamma * (1 - exp(-alpha * gap^2)).
double improved_robustness(double gamma, double gap, double alpha);

// Arithmetic mean; empty input is an error.
double sar(std::span<const double> per_dataset_gamma);

// Weighted aggregate over aligned vectors: sum(|g_i * w_i|) / sum(|w_i|).
double war(std::span<const double> per_dataset_gamma_improved, std::span<const double> weights);

// Map-keyed variant; throws naming the symmetric difference of the key sets.
double war(const std::map<std::string, double>& gamma_improved_by_dataset,
           const std::map<std::string, double>& weight_by_dataset);

// Ranks with average-rank tie handling; ranks sum to M(M+1)/2.
std::vector<double> average_ranks(std::span<const double> values);

// Pearson correlation of the two rank vectors. Constant input yields 0 and
// sets *degenerate when provided.
double spearman(std::span<const double> x, std::span<const double> y,
                bool* degenerate = nullptr);

// Full pipeline: gamma/Gamma per present cell, SAR/WAR/ACC per (model, n).
// `weights` empty means uniform; otherwise it must cover every dataset that
// has cells. Missing cells are skipped and counted, never invented.
MetricsResult compute_all(const ResultsTable& table, const RobustnessConfig& cfg,
                          const std::map<std::string, double>& weights = {});

void write_scores_csv(const MetricsResult& result, const std::string& path);
void write_cells_csv(const MetricsResult& result, const std::string& path);

std::vector<ModelAggregate> load_scores_csv(const std::string& path);
std::vector<CellScore> load_cells_csv(const std::string& path);
unsigned cell_flags_from_string(const std::string& text);

}  // namespace lrbench
