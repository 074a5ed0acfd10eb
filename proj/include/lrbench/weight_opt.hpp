#pragma once

// Dataset-weight optimization: maximize the coefficient-weighted sum of
// Spearman correlations between the WAR-induced model ranking and the
// per-dataset rankings. The search is a seeded random scan over the bounded
// box followed by coordinate-wise golden-section refinement, deterministic
// for a fixed seed.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lrbench/metrics.hpp"

namespace lrbench {

struct WeightBounds {
    double lo = 0.01;
    double hi = 1.0;

    void validate() const;  // lo <= hi, hi > 0
    double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

struct WeightVector {
    std::map<std::string, double> weights;
    WeightBounds bounds;

    void validate() const;  // all in box, at least one positive
    static WeightVector uniform(const std::vector<std::string>& dataset_ids,
                                const WeightBounds& bounds);
    static WeightVector load(const std::string& path, const WeightBounds& bounds = {});
    void save(const std::string& path) const;  // bare {dataset_id: weight} JSON
};

struct ObjectiveTerm {
    std::string dataset_id;
    double coefficient = 1.0;
};

struct Objective {
    std::vector<ObjectiveTerm> terms;

    void validate() const;  // non-empty, coefficients strictly positive
    // 0.95*(ImageNet + ImageNet-V2 + DTD) + ImageNet-A + EuroSAT.
    static Objective lr0fm_default();
    // "dataset:coeff,dataset:coeff" as accepted by --objective.
    static Objective parse(const std::string& spec);
    double coefficient_sum() const;
};

// Complete models x datasets matrix of improved robustness at one resolution.
struct GammaMatrix {
    std::vector<std::string> models;
    std::vector<std::string> datasets;
    std::vector<double> values;  // models x datasets, row-major

    double at(std::size_t m, std::size_t d) const { return values[m * datasets.size() + d]; }
    double& at(std::size_t m, std::size_t d) { return values[m * datasets.size() + d]; }
    std::size_t dataset_index(const std::string& id) const;

    // Extracts the matrix for one resolution; every model must cover every
    // dataset that appears at that resolution.
    static GammaMatrix from_metrics(const MetricsResult& metrics, int resolution);
};

// WAR per model under `weights`.
std::vector<double> war_per_model(const GammaMatrix& matrix, const WeightVector& weights);

double evaluate_objective(const GammaMatrix& matrix, const WeightVector& weights,
                          const Objective& objective);

struct TracePoint {
    int evaluation = 0;     // 1-based evaluation index
    double objective = 0.0;
    double best_so_far = 0.0;
};

struct OptimizeResult {
    WeightVector weights;
    double objective = 0.0;
    std::vector<TracePoint> trace;
    int evaluations = 0;
};

OptimizeResult optimize_weights(const GammaMatrix& matrix, const Objective& objective,
                                const WeightBounds& bounds, int budget, std::uint64_t seed);

void write_trace_csv(const OptimizeResult& result, const std::string& path);

}  // namespace lrbench
