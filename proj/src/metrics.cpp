#include "lrbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "lrbench/errors.hpp"
#include "lrbench/text.hpp"

namespace lrbench {

void RobustnessConfig::validate() const {
    if (!(alpha >= 1.0)) {
        throw ValidationError("alpha must be >= 1 (got " + format_double(alpha) + ")");
    }
}

std::string cell_flags_to_string(unsigned flags) {
    std::string out;
    const auto append = [&out](const char* name) {
        if (!out.empty()) {
            out += '|';
        }
        out += name;
    };
    if (flags & kCellDegenerateHr) {
        append("degenerate_hr");
    }
    if (flags & kCellGapClamped) {
        append("gap_clamped");
    }
    return out;
}

double relative_robustness(double a_hr, double a_n, unsigned* flags) {
    if (a_hr <= 0.0) {
        if (flags != nullptr) {
            *flags |= kCellDegenerateHr;
        }
        return 0.0;
    }
    return 1.0 - (a_hr - a_n) / a_hr;
}

double accuracy_gap(double a_hr, int num_classes, unsigned* flags) {
    if (num_classes < 2) {
        throw ValidationError("accuracy_gap requires num_classes >= 2");
    }
    const double gap = a_hr - 1.0 / static_cast<double>(num_classes);
    if (gap < 0.0) {
        if (flags != nullptr) {
            *flags |= kCellGapClamped;
        }
        return 0.0;
    }
    return gap;
}

double improved_robustness(double gamma, double gap, double alpha) {
    if (gap < 0.0 || gap > 1.0) {
        throw ValidationError("gap must lie in [0, 1]");
    }
    if (alpha < 1.0) {
        throw ValidationError("alpha must be >= 1");
    }
    return gamma * (1.0 - std::exp(-alpha * gap * gap));
}

double sar(std::span<const double> per_dataset_gamma) {
    if (per_dataset_gamma.empty()) {
        throw ValidationError("sar of an empty score list");
    }
    const double sum = std::accumulate(per_dataset_gamma.begin(), per_dataset_gamma.end(), 0.0);
    return sum / static_cast<double>(per_dataset_gamma.size());
}

double war(std::span<const double> scores, std::span<const double> weights) {
    if (scores.size() != weights.size()) {
        throw ValidationError("war: scores and weights differ in length");
    }
    double numerator = 0.0;
    double denominator = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        numerator += std::abs(scores[i] * weights[i]);
        denominator += std::abs(weights[i]);
    }
    if (denominator <= 0.0) {
        throw ValidationError("war: weights sum to zero");
    }
    return numerator / denominator;
}

double war(const std::map<std::string, double>& scores,
           const std::map<std::string, double>& weights) {
    std::string missing_weights;
    std::string missing_scores;
    for (const auto& [id, unused] : scores) {
        if (weights.find(id) == weights.end()) {
            missing_weights += missing_weights.empty() ? id : ", " + id;
        }
    }
    for (const auto& [id, unused] : weights) {
        if (scores.find(id) == scores.end()) {
            missing_scores += missing_scores.empty() ? id : ", " + id;
        }
    }
    if (!missing_weights.empty() || !missing_scores.empty()) {
        std::string msg = "war: dataset sets misaligned;";
        if (!missing_weights.empty()) {
            msg += " no weight for {" + missing_weights + "}";
        }
        if (!missing_scores.empty()) {
            msg += " no score for {" + missing_scores + "}";
        }
        throw ValidationError(msg);
    }
    std::vector<double> s;
    std::vector<double> w;
    s.reserve(scores.size());
    w.reserve(scores.size());
    for (const auto& [id, value] : scores) {
        s.push_back(value);
        w.push_back(weights.at(id));
    }
    return war(std::span<const double>(s), std::span<const double>(w));
}

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&values](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        // Tied block [i, j] gets the average of ranks i+1 .. j+1.
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = rank;
        }
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y, bool* degenerate) {
    if (x.size() != y.size()) {
        throw ValidationError("spearman: input lengths differ");
    }
    if (x.size() < 2) {
        throw ValidationError("spearman: need at least two observations");
    }
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mean = (n + 1.0) / 2.0;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = rx[i] - mean;
        const double dy = ry[i] - mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        if (degenerate != nullptr) {
            *degenerate = true;
        }
        return 0.0;
    }
    return sxy / std::sqrt(sxx * syy);
}

MetricsResult compute_all(const ResultsTable& table, const RobustnessConfig& cfg,
                          const std::map<std::string, double>& weights) {
    cfg.validate();
    MetricsResult result;

    const auto hr_resolution = [&table, &cfg](const std::string& model_id) {
        const auto it = cfg.hr_lookup.find(model_id);
        if (it != cfg.hr_lookup.end()) {
            return it->second;
        }
        return table.model(model_id).hr_resolution;
    };

    // Low resolutions present anywhere in the table, ascending.
    std::set<int> low_resolutions;
    for (const auto& rec : table.records()) {
        if (rec.resolution != hr_resolution(rec.model_id)) {
            low_resolutions.insert(rec.resolution);
        }
    }

    for (const auto& mm : table.models()) {
        const int hr = hr_resolution(mm.model_id);

        // HR accuracy per dataset; a model with no HR cell at all is flagged.
        std::map<std::string, double> a_hr;
        for (const auto& ds : table.datasets()) {
            if (const auto v = table.query(mm.model_id, ds.dataset_id, hr)) {
                a_hr.emplace(ds.dataset_id, *v);
            }
        }
        if (a_hr.empty()) {
            result.models_without_hr.push_back(mm.model_id);
            continue;
        }

        // The HR row itself aggregates too (gamma = 1 by construction there).
        std::set<int> model_resolutions = low_resolutions;
        model_resolutions.insert(hr);

        for (const int n : model_resolutions) {
            std::vector<double> gammas;
            std::map<std::string, double> gamma_improved;
            std::vector<double> accs;
            for (const auto& ds : table.datasets()) {
                const auto hr_it = a_hr.find(ds.dataset_id);
                const auto a_n = table.query(mm.model_id, ds.dataset_id, n);
                if (hr_it == a_hr.end() || !a_n) {
                    if (hr_it != a_hr.end() || a_n) {
                        ++result.missing_cells;  // half-present pair
                    }
                    continue;
                }
                CellScore cell;
                cell.model_id = mm.model_id;
                cell.dataset_id = ds.dataset_id;
                cell.resolution = n;
                cell.gamma = relative_robustness(hr_it->second, *a_n, &cell.flags);
                cell.gap = accuracy_gap(hr_it->second, ds.num_classes, &cell.flags);
                cell.gamma_improved = improved_robustness(cell.gamma, cell.gap, cfg.alpha);
                gammas.push_back(cell.gamma);
                gamma_improved.emplace(ds.dataset_id, cell.gamma_improved);
                accs.push_back(*a_n);
                result.cells.push_back(std::move(cell));
            }
            if (gammas.empty()) {
                continue;
            }
            ModelAggregate agg;
            agg.model_id = mm.model_id;
            agg.resolution = n;
            agg.sar = sar(gammas);
            agg.acc = sar(accs);
            if (weights.empty()) {
                std::vector<double> uniform(gammas.size(), 1.0);
                std::vector<double> gi;
                gi.reserve(gamma_improved.size());
                for (const auto& [id, v] : gamma_improved) {
                    gi.push_back(v);
                }
                agg.war = war(std::span<const double>(gi), std::span<const double>(uniform));
            } else {
                std::map<std::string, double> present_weights;
                for (const auto& [id, unused] : gamma_improved) {
                    const auto it = weights.find(id);
                    if (it == weights.end()) {
                        throw ValidationError("compute_all: no weight for dataset '" + id + "'");
                    }
                    present_weights.emplace(id, it->second);
                }
                agg.war = war(gamma_improved, present_weights);
            }
            agg.datasets_used = static_cast<int>(gammas.size());
            result.aggregates.push_back(std::move(agg));
        }
    }
    return result;
}

void write_scores_csv(const MetricsResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << "model_id,resolution,sar,war,acc\n";
    for (const auto& agg : result.aggregates) {
        out << agg.model_id << ',' << agg.resolution << ',' << format_double(agg.sar) << ','
            << format_double(agg.war) << ',' << format_double(agg.acc) << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path);
    }
}

unsigned cell_flags_from_string(const std::string& text) {
    unsigned flags = kCellNone;
    for (const auto& name : split(text, '|')) {
        if (name.empty()) {
            continue;
        }
        if (name == "degenerate_hr") {
            flags |= kCellDegenerateHr;
        } else if (name == "gap_clamped") {
            flags |= kCellGapClamped;
        } else {
            throw ValidationError("unknown cell flag '" + name + "'");
        }
    }
    return flags;
}

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path,
                                                    const std::string& expected_header,
                                                    std::size_t fields) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::vector<std::vector<std::string>> rows;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') {
            continue;
        }
        if (!header_seen) {
            if (std::string(stripped) != expected_header) {
                throw ValidationError(path + ": expected header '" + expected_header + "'");
            }
            header_seen = true;
            continue;
        }
        auto parsed = split_csv_line(stripped);
        if (parsed.size() != fields) {
            throw ValidationError(path + " row " + std::to_string(line_no) + ": expected " +
                                  std::to_string(fields) + " fields");
        }
        rows.push_back(std::move(parsed));
    }
    if (!header_seen) {
        throw ValidationError(path + ": missing header line");
    }
    return rows;
}

double require_double(const std::string& field, const std::string& path) {
    const auto v = parse_double(field);
    if (!v) {
        throw ValidationError(path + ": bad number '" + field + "'");
    }
    return *v;
}

int require_int(const std::string& field, const std::string& path) {
    const auto v = parse_int(field);
    if (!v) {
        throw ValidationError(path + ": bad integer '" + field + "'");
    }
    return static_cast<int>(*v);
}

}  // namespace

std::vector<ModelAggregate> load_scores_csv(const std::string& path) {
    std::vector<ModelAggregate> out;
    for (const auto& row : read_csv_rows(path, "model_id,resolution,sar,war,acc", 5)) {
        ModelAggregate agg;
        agg.model_id = row[0];
        agg.resolution = require_int(row[1], path);
        agg.sar = require_double(row[2], path);
        agg.war = require_double(row[3], path);
        agg.acc = require_double(row[4], path);
        out.push_back(std::move(agg));
    }
    return out;
}

std::vector<CellScore> load_cells_csv(const std::string& path) {
    std::vector<CellScore> out;
    for (const auto& row :
         read_csv_rows(path, "model_id,dataset_id,resolution,gamma,gamma_improved,gap,flags", 7)) {
        CellScore cell;
        cell.model_id = row[0];
        cell.dataset_id = row[1];
        cell.resolution = require_int(row[2], path);
        cell.gamma = require_double(row[3], path);
        cell.gamma_improved = require_double(row[4], path);
        cell.gap = require_double(row[5], path);
        cell.flags = cell_flags_from_string(row[6]);
        out.push_back(std::move(cell));
    }
    return out;
}

void write_cells_csv(const MetricsResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << "model_id,dataset_id,resolution,gamma,gamma_improved,gap,flags\n";
    for (const auto& cell : result.cells) {
        out << cell.model_id << ',' << cell.dataset_id << ',' << cell.resolution << ','
            << format_double(cell.gamma) << ',' << format_double(cell.gamma_improved) << ','
            << format_double(cell.gap) << ',' << cell_flags_to_string(cell.flags) << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path);
    }
}

}  // namespace lrbench
