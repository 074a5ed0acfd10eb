#include "lrbench/weight_opt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "lrbench/errors.hpp"
#include "lrbench/rng.hpp"
#include "lrbench/text.hpp"

namespace lrbench {

using nlohmann::json;

void WeightBounds::validate() const {
    if (lo > hi) {
        throw ValidationError("infeasible weight bounds: lo " + format_double(lo) + " > hi " +
                              format_double(hi));
    }
    if (hi <= 0.0) {
        throw ValidationError("weight bounds must admit a positive weight");
    }
}

void WeightVector::validate() const {
    bounds.validate();
    if (weights.empty()) {
        throw ValidationError("weight vector is empty");
    }
    bool any_positive = false;
    for (const auto& [id, w] : weights) {
        if (w < bounds.lo || w > bounds.hi) {
            throw ValidationError("weight for '" + id + "' (" + format_double(w) +
                                  ") outside [" + format_double(bounds.lo) + ", " +
                                  format_double(bounds.hi) + "]");
        }
        any_positive = any_positive || w > 0.0;
    }
    if (!any_positive) {
        throw ValidationError("all weights are zero");
    }
}

WeightVector WeightVector::uniform(const std::vector<std::string>& dataset_ids,
                                   const WeightBounds& bounds) {
    bounds.validate();
    WeightVector wv;
    wv.bounds = bounds;
    const double value = bounds.clamp(1.0);
    for (const auto& id : dataset_ids) {
        wv.weights.emplace(id, value);
    }
    return wv;
}

WeightVector WeightVector::load(const std::string& path, const WeightBounds& bounds) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw ValidationError(path + ": expected a {dataset_id: weight} object");
    }
    WeightVector wv;
    wv.bounds = bounds;
    for (const auto& [key, value] : doc.items()) {
        wv.weights.emplace(key, value.get<double>());
    }
    wv.validate();
    return wv;
}

void WeightVector::save(const std::string& path) const {
    json doc = json::object();
    for (const auto& [id, w] : weights) {
        doc[id] = w;
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << doc.dump(2) << '\n';
}

void Objective::validate() const {
    if (terms.empty()) {
        throw ValidationError("objective has no terms");
    }
    std::set<std::string> seen;
    for (const auto& term : terms) {
        if (term.coefficient <= 0.0) {
            throw ValidationError("objective coefficient for '" + term.dataset_id +
                                  "' must be strictly positive");
        }
        if (!seen.insert(term.dataset_id).second) {
            throw ValidationError("objective names dataset '" + term.dataset_id + "' twice");
        }
    }
}

Objective Objective::lr0fm_default() {
    return Objective{{{"ImageNet", 0.95},
                      {"ImageNet-V2", 0.95},
                      {"DTD", 0.95},
                      {"ImageNet-A", 1.0},
                      {"EuroSAT", 1.0}}};
}

Objective Objective::parse(const std::string& spec) {
    Objective obj;
    for (const auto& part : split(spec, ',')) {
        if (part.empty()) {
            continue;
        }
        const auto colon = part.rfind(':');
        if (colon == std::string::npos) {
            throw ValidationError("objective term '" + part + "' is not dataset:coefficient");
        }
        const auto coeff = parse_double(part.substr(colon + 1));
        if (!coeff) {
            throw ValidationError("objective term '" + part + "' has a bad coefficient");
        }
        obj.terms.push_back({std::string(trim(part.substr(0, colon))), *coeff});
    }
    obj.validate();
    return obj;
}

double Objective::coefficient_sum() const {
    double sum = 0.0;
    for (const auto& term : terms) {
        sum += term.coefficient;
    }
    return sum;
}

std::size_t GammaMatrix::dataset_index(const std::string& id) const {
    const auto it = std::find(datasets.begin(), datasets.end(), id);
    if (it == datasets.end()) {
        throw ValidationError("dataset '" + id + "' absent from the Gamma matrix");
    }
    return static_cast<std::size_t>(it - datasets.begin());
}

GammaMatrix GammaMatrix::from_metrics(const MetricsResult& metrics, int resolution) {
    std::set<std::string> model_set;
    std::set<std::string> dataset_set;
    for (const auto& cell : metrics.cells) {
        if (cell.resolution == resolution) {
            model_set.insert(cell.model_id);
            dataset_set.insert(cell.dataset_id);
        }
    }
    if (model_set.empty()) {
        throw ValidationError("no cells at resolution " + std::to_string(resolution));
    }
    GammaMatrix matrix;
    matrix.models.assign(model_set.begin(), model_set.end());
    matrix.datasets.assign(dataset_set.begin(), dataset_set.end());
    matrix.values.assign(matrix.models.size() * matrix.datasets.size(),
                         std::numeric_limits<double>::quiet_NaN());
    for (const auto& cell : metrics.cells) {
        if (cell.resolution != resolution) {
            continue;
        }
        const auto m = static_cast<std::size_t>(
            std::find(matrix.models.begin(), matrix.models.end(), cell.model_id) -
            matrix.models.begin());
        matrix.at(m, matrix.dataset_index(cell.dataset_id)) = cell.gamma_improved;
    }
    for (std::size_t m = 0; m < matrix.models.size(); ++m) {
        for (std::size_t d = 0; d < matrix.datasets.size(); ++d) {
            if (std::isnan(matrix.at(m, d))) {
                throw ValidationError("Gamma matrix incomplete: model '" + matrix.models[m] +
                                      "' has no cell for dataset '" + matrix.datasets[d] +
                                      "' at resolution " + std::to_string(resolution));
            }
        }
    }
    return matrix;
}

std::vector<double> war_per_model(const GammaMatrix& matrix, const WeightVector& weights) {
    std::vector<double> aligned(matrix.datasets.size(), 0.0);
    for (std::size_t d = 0; d < matrix.datasets.size(); ++d) {
        const auto it = weights.weights.find(matrix.datasets[d]);
        if (it == weights.weights.end()) {
            throw ValidationError("no weight for dataset '" + matrix.datasets[d] + "'");
        }
        aligned[d] = it->second;
    }
    std::vector<double> wars(matrix.models.size(), 0.0);
    for (std::size_t m = 0; m < matrix.models.size(); ++m) {
        const std::span<const double> row(matrix.values.data() + m * matrix.datasets.size(),
                                          matrix.datasets.size());
        wars[m] = war(row, aligned);
    }
    return wars;
}

double evaluate_objective(const GammaMatrix& matrix, const WeightVector& weights,
                          const Objective& objective) {
    objective.validate();
    const auto wars = war_per_model(matrix, weights);
    double total = 0.0;
    for (const auto& term : objective.terms) {
        const std::size_t d = matrix.dataset_index(term.dataset_id);
        std::vector<double> column(matrix.models.size(), 0.0);
        for (std::size_t m = 0; m < matrix.models.size(); ++m) {
            column[m] = matrix.at(m, d);
        }
        total += term.coefficient * spearman(wars, column);
    }
    return total;
}

namespace {

// Golden-section refinement of one coordinate inside [lo, hi]. The objective
// is piecewise constant in the weights, so refinement starts from a coarse
// scan and only polishes the winning bracket.
constexpr double kInvPhi = 0.6180339887498949;

}  // namespace

OptimizeResult optimize_weights(const GammaMatrix& matrix, const Objective& objective,
                                const WeightBounds& bounds, int budget, std::uint64_t seed) {
    bounds.validate();
    objective.validate();
    if (budget < 1) {
        throw ValidationError("optimization budget must be >= 1");
    }
    for (const auto& term : objective.terms) {
        matrix.dataset_index(term.dataset_id);  // throws if absent
    }

    Rng rng(seed);
    const std::vector<std::string>& ids = matrix.datasets;
    const std::size_t dims = ids.size();

    OptimizeResult result;
    result.weights.bounds = bounds;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> best_point(dims, bounds.clamp(1.0));
    int evals = 0;

    const auto evaluate = [&](const std::vector<double>& point) {
        WeightVector wv;
        wv.bounds = bounds;
        for (std::size_t d = 0; d < dims; ++d) {
            wv.weights.emplace(ids[d], point[d]);
        }
        const double value = evaluate_objective(matrix, wv, objective);
        ++evals;
        if (value > best) {
            best = value;
            best_point = point;
        }
        result.trace.push_back({evals, value, best});
        return value;
    };

    const auto sample_point = [&rng, &bounds, dims]() {
        std::vector<double> point(dims, 0.0);
        for (auto& v : point) {
            v = rng.uniform(bounds.lo, bounds.hi);
        }
        return point;
    };

    // First evaluation is always a seeded random sample, so budget=1 returns
    // exactly that point. Uniform weights are the second candidate.
    evaluate(sample_point());
    if (evals < budget) {
        evaluate(std::vector<double>(dims, bounds.clamp(1.0)));
    }

    // Random scan over the box for half of the remaining budget.
    const int scan_target = evals + (budget - evals) / 2;
    while (evals < scan_target) {
        evaluate(sample_point());
    }

    // Coordinate passes: coarse scan per coordinate, then golden-section
    // around the winning bracket.
    const int kScanLevels = 13;
    const int kGoldenIters = 24;
    bool improved = true;
    while (improved && evals < budget) {
        improved = false;
        for (std::size_t d = 0; d < dims && evals < budget; ++d) {
            const double before = best;
            std::vector<double> point = best_point;
            double step = (bounds.hi - bounds.lo) / static_cast<double>(kScanLevels - 1);
            for (int level = 0; level < kScanLevels && evals < budget; ++level) {
                point[d] = bounds.lo + step * static_cast<double>(level);
                evaluate(point);
            }
            // Bracket around the best value of this coordinate so far.
            double a = std::max(bounds.lo, best_point[d] - step);
            double b = std::min(bounds.hi, best_point[d] + step);
            double x1 = b - kInvPhi * (b - a);
            double x2 = a + kInvPhi * (b - a);
            point = best_point;
            point[d] = x1;
            double f1 = evals < budget ? evaluate(point) : -1e300;
            point[d] = x2;
            double f2 = evals < budget ? evaluate(point) : -1e300;
            for (int it = 0; it < kGoldenIters && evals < budget; ++it) {
                if (f1 < f2) {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + kInvPhi * (b - a);
                    point = best_point;
                    point[d] = x2;
                    f2 = evaluate(point);
                } else {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - kInvPhi * (b - a);
                    point = best_point;
                    point[d] = x1;
                    f1 = evaluate(point);
                }
            }
            improved = improved || best > before;
        }
    }

    for (std::size_t d = 0; d < dims; ++d) {
        result.weights.weights.emplace(ids[d], best_point[d]);
    }
    result.weights.validate();
    result.objective = best;
    result.evaluations = evals;
    return result;
}

void write_trace_csv(const OptimizeResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << "evaluation,objective,best_so_far\n";
    for (const auto& point : result.trace) {
        out << point.evaluation << ',' << format_double(point.objective) << ','
            << format_double(point.best_so_far) << '\n';
    }
}

}  // namespace lrbench
