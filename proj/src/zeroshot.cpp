#include "lrbench/zeroshot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "lrbench/errors.hpp"

namespace lrbench {

using nlohmann::json;

namespace {

double l2_norm(std::span<const double> v) {
    double sum = 0.0;
    for (const double x : v) {
        sum += x * x;
    }
    return std::sqrt(sum);
}

void normalize_in_place(std::span<double> v) {
    const double norm = l2_norm(v);
    if (norm <= 0.0) {
        throw ValidationError("cannot L2-normalize a zero vector");
    }
    for (double& x : v) {
        x /= norm;
    }
}

}  // namespace

void EmbeddingMatrix::l2_normalize_rows() {
    for (int r = 0; r < rows; ++r) {
        normalize_in_place(row(r));
    }
    normalized = true;
}

bool EmbeddingMatrix::rows_unit_norm(double tol) const {
    for (int r = 0; r < rows; ++r) {
        if (std::abs(l2_norm(row(r)) - 1.0) > tol) {
            return false;
        }
    }
    return true;
}

EmbeddingMatrix load_embedding_matrix(const std::string& bin_path) {
    std::ifstream meta_in(bin_path + ".json");
    if (!meta_in) {
        throw IoError("cannot open sidecar " + bin_path + ".json");
    }
    json meta;
    try {
        meta_in >> meta;
    } catch (const json::parse_error& e) {
        throw ValidationError(bin_path + ".json: " + e.what());
    }
    EmbeddingMatrix matrix;
    matrix.rows = meta.at("rows").get<int>();
    matrix.dim = meta.at("dim").get<int>();
    matrix.normalized = meta.value("normalized", false);
    if (matrix.rows < 0 || matrix.dim <= 0) {
        throw ValidationError(bin_path + ".json: bad rows/dim");
    }

    std::ifstream in(bin_path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + bin_path);
    }
    const std::size_t count = static_cast<std::size_t>(matrix.rows) * matrix.dim;
    std::vector<float> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float)) {
        throw IoError(bin_path + ": expected " + std::to_string(count * sizeof(float)) +
                      " bytes of float32 data");
    }
    matrix.values.assign(raw.begin(), raw.end());
    return matrix;
}

void save_embedding_matrix(const EmbeddingMatrix& matrix, const std::string& bin_path,
                           const std::vector<std::string>& keys) {
    if (!keys.empty() && static_cast<int>(keys.size()) != matrix.rows) {
        throw ValidationError("sidecar keys count does not match rows");
    }
    std::ofstream out(bin_path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + bin_path);
    }
    std::vector<float> raw(matrix.values.begin(), matrix.values.end());
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!out) {
        throw IoError("failed writing " + bin_path);
    }
    json meta = {{"rows", matrix.rows}, {"dim", matrix.dim}, {"normalized", matrix.normalized}};
    if (!keys.empty()) {
        meta["keys"] = keys;
    }
    std::ofstream meta_out(bin_path + ".json");
    if (!meta_out) {
        throw IoError("cannot write " + bin_path + ".json");
    }
    meta_out << meta.dump(2) << '\n';
}

void PromptTemplateSet::validate() const {
    if (templates.empty()) {
        throw ValidationError("template set '" + dataset_id + "' is empty");
    }
    for (const auto& tmpl : templates) {
        const auto first = tmpl.find("[L]");
        if (first == std::string::npos) {
            throw ValidationError("template '" + tmpl + "' is missing the [L] placeholder");
        }
        if (tmpl.find("[L]", first + 1) != std::string::npos) {
            throw ValidationError("template '" + tmpl + "' contains [L] more than once");
        }
    }
}

PromptTemplateSet PromptTemplateSet::load(const std::string& path) {
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
    PromptTemplateSet set;
    set.dataset_id = doc.value("dataset_id", "");
    set.templates = doc.at("templates").get<std::vector<std::string>>();
    set.validate();
    return set;
}

void PromptTemplateSet::save(const std::string& path) const {
    validate();
    const json doc = {{"dataset_id", dataset_id}, {"templates", templates}};
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << doc.dump(2) << '\n';
}

std::string fill_template(const std::string& tmpl, const std::string& label) {
    const auto pos = tmpl.find("[L]");
    if (pos == std::string::npos) {
        throw ValidationError("template '" + tmpl + "' is missing the [L] placeholder");
    }
    std::string out = tmpl;
    out.replace(pos, 3, label);
    return out;
}

LookupTextEncoder::LookupTextEncoder(EmbeddingMatrix matrix, std::vector<std::string> keys)
    : matrix_(std::move(matrix)), keys_(std::move(keys)) {
    if (static_cast<int>(keys_.size()) != matrix_.rows) {
        throw ValidationError("lookup encoder: keys count does not match rows");
    }
}

LookupTextEncoder LookupTextEncoder::load(const std::string& bin_path) {
    EmbeddingMatrix matrix = load_embedding_matrix(bin_path);
    std::ifstream meta_in(bin_path + ".json");
    json meta;
    meta_in >> meta;
    if (!meta.contains("keys")) {
        throw ValidationError(bin_path + ".json: lookup encoder needs a 'keys' array");
    }
    return LookupTextEncoder(std::move(matrix), meta.at("keys").get<std::vector<std::string>>());
}

std::vector<double> LookupTextEncoder::encode(const std::string& text) const {
    for (std::size_t i = 0; i < keys_.size(); ++i) {
        if (keys_[i] == text) {
            const auto row = matrix_.row(static_cast<int>(i));
            return {row.begin(), row.end()};
        }
    }
    throw ValidationError("lookup encoder has no embedding for '" + text + "'");
}

EmbeddingMatrix build_class_embeddings(const TextEncoder& encoder,
                                       const std::vector<std::string>& labels,
                                       const PromptTemplateSet& templates) {
    templates.validate();
    if (labels.empty()) {
        throw ValidationError("no class labels given");
    }
    EmbeddingMatrix out(static_cast<int>(labels.size()), encoder.dim());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::vector<double> mean(static_cast<std::size_t>(encoder.dim()), 0.0);
        for (const auto& tmpl : templates.templates) {
            auto vec = encoder.encode(fill_template(tmpl, labels[i]));
            if (static_cast<int>(vec.size()) != encoder.dim()) {
                throw ValidationError("encoder returned a vector of the wrong dimension");
            }
            normalize_in_place(vec);
            for (std::size_t d = 0; d < vec.size(); ++d) {
                mean[d] += vec[d];
            }
        }
        const double inv = 1.0 / static_cast<double>(templates.templates.size());
        auto row = out.row(static_cast<int>(i));
        for (std::size_t d = 0; d < mean.size(); ++d) {
            row[d] = mean[d] * inv;
        }
        normalize_in_place(row);
    }
    out.normalized = true;
    return out;
}

Classification classify(const EmbeddingMatrix& images, const EmbeddingMatrix& classes, int k,
                        const std::vector<int>& labels) {
    if (images.dim != classes.dim) {
        throw ValidationError("embedding dimensions differ: images " + std::to_string(images.dim) +
                              " vs classes " + std::to_string(classes.dim));
    }
    if (k < 1 || k > classes.rows) {
        throw ValidationError("k must lie in [1, num_classes]");
    }
    if (!labels.empty() && static_cast<int>(labels.size()) != images.rows) {
        throw ValidationError("labels count does not match image count");
    }
    Classification result;
    result.k = k;
    result.topk.resize(static_cast<std::size_t>(images.rows));
    result.tie_flags.assign(static_cast<std::size_t>(images.rows), 0);
    int hits = 0;
    for (int i = 0; i < images.rows; ++i) {
        const auto img = images.row(i);
        std::vector<double> logits(static_cast<std::size_t>(classes.rows), 0.0);
        for (int c = 0; c < classes.rows; ++c) {
            const auto cls = classes.row(c);
            double dot = 0.0;
            for (int d = 0; d < images.dim; ++d) {
                dot += img[d] * cls[d];
            }
            logits[static_cast<std::size_t>(c)] = dot;
        }
        std::vector<int> order(static_cast<std::size_t>(classes.rows));
        std::iota(order.begin(), order.end(), 0);
        // Stable sort by descending logit keeps ties at the lowest index.
        std::stable_sort(order.begin(), order.end(), [&logits](int a, int b) {
            return logits[static_cast<std::size_t>(a)] > logits[static_cast<std::size_t>(b)];
        });
        if (classes.rows > 1 &&
            logits[static_cast<std::size_t>(order[0])] ==
                logits[static_cast<std::size_t>(order[1])]) {
            result.tie_flags[static_cast<std::size_t>(i)] = 1;
        }
        result.topk[static_cast<std::size_t>(i)].assign(order.begin(), order.begin() + k);
        if (!labels.empty()) {
            const auto& top = result.topk[static_cast<std::size_t>(i)];
            if (std::find(top.begin(), top.end(), labels[static_cast<std::size_t>(i)]) !=
                top.end()) {
                ++hits;
            }
        }
    }
    if (!labels.empty()) {
        result.accuracy = images.rows == 0
                              ? 0.0
                              : static_cast<double>(hits) / static_cast<double>(images.rows);
    }
    return result;
}

}  // namespace lrbench
