#pragma once

// Template-averaged zero-shot classification. Class text embeddings are
// built by substituting each label into every template, encoding, L2
// normalizing, averaging, and re-normalizing. Images are scored by dot
// product; ties break toward the lowest class index and are flagged.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lrbench {

struct EmbeddingMatrix {
    int rows = 0;
    int dim = 0;
    bool normalized = false;
    std::vector<double> values;  // rows x dim, row-major

    EmbeddingMatrix() = default;
    EmbeddingMatrix(int r, int d)
        : rows(r), dim(d), values(static_cast<std::size_t>(r) * d, 0.0) {}

    std::span<const double> row(int r) const {
        return {values.data() + static_cast<std::size_t>(r) * dim, static_cast<std::size_t>(dim)};
    }
    std::span<double> row(int r) {
        return {values.data() + static_cast<std::size_t>(r) * dim, static_cast<std::size_t>(dim)};
    }
    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * dim + c]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * dim + c]; }

    void l2_normalize_rows();
    // Every row within 1e-5 of unit norm.
    bool rows_unit_norm(double tol = 1e-5) const;
};

// Raw little-endian float32 row-major matrix + JSON sidecar at <path>.json
// with {rows, dim, normalized} and optionally {keys} for lookup encoders.
EmbeddingMatrix load_embedding_matrix(const std::string& bin_path);
void save_embedding_matrix(const EmbeddingMatrix& matrix, const std::string& bin_path,
                           const std::vector<std::string>& keys = {});

struct PromptTemplateSet {
    std::string dataset_id;
    std::vector<std::string> templates;  // each contains the placeholder [L] exactly once

    void validate() const;
    static PromptTemplateSet load(const std::string& path);
    void save(const std::string& path) const;
};

// Substitutes `label` for the single [L] placeholder.
std::string fill_template(const std::string& tmpl, const std::string& label);

class TextEncoder {
  public:
    virtual ~TextEncoder() = default;
    virtual std::vector<double> encode(const std::string& text) const = 0;
    virtual int dim() const = 0;
};

// Stub encoder backed by a precomputed embedding file whose sidecar carries
// one key string per row.
class LookupTextEncoder final : public TextEncoder {
  public:
    static LookupTextEncoder load(const std::string& bin_path);
    LookupTextEncoder(EmbeddingMatrix matrix, std::vector<std::string> keys);

    std::vector<double> encode(const std::string& text) const override;
    int dim() const override { return matrix_.dim; }

  private:
    EmbeddingMatrix matrix_;
    std::vector<std::string> keys_;
};

// normalize-each -> mean -> re-normalize, rows ordered by label order.
EmbeddingMatrix build_class_embeddings(const TextEncoder& encoder,
                                       const std::vector<std::string>& labels,
                                       const PromptTemplateSet& templates);

struct Classification {
    int k = 1;
    std::vector<std::vector<int>> topk;   // per image, best-first class indices
    std::vector<std::uint8_t> tie_flags;  // 1 where the top logit was tied
    std::optional<double> accuracy;       // top-k accuracy when labels given
};

// logits = images . classes^T; per-image descending argsort (stable toward
// lower class index); top-k membership gives accuracy when labels are given.
Classification classify(const EmbeddingMatrix& images, const EmbeddingMatrix& classes, int k,
                        const std::vector<int>& labels = {});

}  // namespace lrbench
