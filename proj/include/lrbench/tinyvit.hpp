#pragma once

// Desk-scale vision transformer with frozen base weights plus additive LR
// token banks. The banks are the only trainable state: bank 0 is added to the
// spatial tokens right after patchification, bank b (1..N) right before
// transformer block b. Training distills a token-augmented student toward the
// frozen teacher's HR embeddings with a symmetric contrastive loss over
// multi-scale LR variants. Gradients flow through a hand-written backward
// pass; the base parameters never change.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lrbench/image.hpp"
#include "lrbench/rng.hpp"

namespace lrbench {

struct TinyViTConfig {
    int input_res = 64;
    int patch_size = 8;
    int dim = 32;
    int depth = 4;
    int heads = 4;
    double mlp_ratio = 2.0;
    int embed_dim_out = 32;

    int num_patches() const {
        const int side = input_res / patch_size;
        return side * side;
    }
    int seq_len() const { return num_patches() + 1; }
    int head_dim() const { return dim / heads; }
    int mlp_hidden() const { return static_cast<int>(dim * mlp_ratio); }
    int patch_dim() const { return 3 * patch_size * patch_size; }

    void validate() const;

    bool operator==(const TinyViTConfig&) const = default;
};

// Row-major matrix of doubles; model math stays in double so gradient checks
// against central finite differences are meaningful.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0)
        : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    double* row_ptr(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
    const double* row_ptr(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }

    bool operator==(const Mat&) const = default;
};

struct BlockParams {
    std::vector<double> ln1_gamma, ln1_beta;
    Mat wq, wk, wv, wo;  // dim x dim, y = x * W^T + b
    std::vector<double> bq, bk, bv, bo;
    std::vector<double> ln2_gamma, ln2_beta;
    Mat w_fc1;  // hidden x dim
    std::vector<double> b_fc1;
    Mat w_fc2;  // dim x hidden
    std::vector<double> b_fc2;

    bool operator==(const BlockParams&) const = default;
};

struct BaseParameters {
    TinyViTConfig config;
    Mat patch_proj;  // dim x patch_dim
    std::vector<double> patch_bias;
    std::vector<double> cls_token;  // dim
    Mat pos_embed;                  // seq_len x dim
    std::vector<BlockParams> blocks;
    Mat out_proj;  // embed_dim_out x dim
    std::vector<double> out_bias;

    static BaseParameters random(const TinyViTConfig& cfg, std::uint64_t seed);

    bool operator==(const BaseParameters&) const = default;
};

struct LRTokenBank {
    std::vector<Mat> banks;  // depth + 1 entries, each num_patches x dim

    // Zero init: the student starts exactly at the frozen baseline.
    static LRTokenBank zeros(const TinyViTConfig& cfg);

    void check_shape(const TinyViTConfig& cfg) const;
    // this += scale * other (same shapes).
    void axpy(double scale, const LRTokenBank& other);

    bool operator==(const LRTokenBank&) const = default;
};

struct ForwardResult {
    std::vector<double> embedding;                     // L2-normalized, embed_dim_out
    std::vector<std::vector<double>> layer_features;   // depth+1 mean-pooled spatial tokens
};

// tokens == nullptr runs the frozen teacher. start_block i in [0, depth]:
// bank 0 applies only when i == 0; bank b (>= 1) applies when b >= max(i, 1).
ForwardResult vit_forward(const BaseParameters& params, const LRTokenBank* tokens,
                          const Image& img, int start_block = 0);

// VPT variant: `vpt_tokens` (count x dim) are concatenated to the spatial
// tokens before block 1 only; banks are not involved.
ForwardResult vit_vpt_forward(const BaseParameters& params, const Mat& vpt_tokens,
                              const Image& img);

struct BucketRange {
    int lo = 0;
    int hi = 0;
};

struct BucketSpec {
    std::vector<BucketRange> buckets;

    // [16,32], [32,64], [64,128]
    static BucketSpec defaults();
    // "16:32,32:64,64:128"
    static BucketSpec parse(const std::string& text);
    void validate() const;  // non-empty, lo >= 1 and lo < hi per bucket
};

// One LR variant per bucket: resolution sampled uniformly from [lo, hi],
// image degraded to n x n and restored to its original size.
std::vector<Image> sample_multiscale(const Image& img, const BucketSpec& buckets, Rng& rng);

struct TrainBatch {
    std::vector<Image> hr;               // B images at input_res
    std::vector<std::vector<Image>> lr;  // [bucket][B], derived from hr
};

TrainBatch make_train_batch(const std::vector<Image>& hr_images, const BucketSpec& buckets,
                            Rng& rng);

// Mean over student sets of the symmetric cross-entropy over the B x B
// similarity matrix S * T^T / tau. Rows must be L2-normalized, B >= 2.
double contrastive_distill_loss(const std::vector<Mat>& student_sets, const Mat& teacher_feats,
                                double tau);

// Gradient of the distillation loss w.r.t. the token banks (base frozen).
LRTokenBank token_gradients(const BaseParameters& params, const LRTokenBank& tokens,
                            const TrainBatch& batch, double tau, int start_block = 0,
                            double* loss_out = nullptr);

// Same loss, student runs vit_vpt_forward; gradient w.r.t. the VPT tokens.
Mat vpt_gradients(const BaseParameters& params, const Mat& vpt_tokens, const TrainBatch& batch,
                  double tau, double* loss_out = nullptr);

struct TrainStepStats {
    double loss = 0.0;
};

// Teacher on HR without tokens, student with tokens on HR and every LR
// variant; plain gradient-descent update of the banks only.
TrainStepStats train_step(const BaseParameters& params, LRTokenBank& tokens,
                          const TrainBatch& batch, double tau, double learning_rate,
                          int start_block = 0);

// Batch embeddings (rows = images) for convenience in evaluation and tests.
Mat embed_images(const BaseParameters& params, const LRTokenBank* tokens,
                 const std::vector<Image>& images, int start_block = 0);

double mean_cosine(const Mat& a, const Mat& b);

// Checkpoints: <prefix>.base.bin/.json and <prefix>.tokens.bin/.json,
// raw float32 tensors plus a JSON manifest with shapes, config, and seed.
void save_base_parameters(const BaseParameters& params, const std::string& prefix,
                          std::uint64_t seed);
BaseParameters load_base_parameters(const std::string& prefix);
void save_token_bank(const LRTokenBank& tokens, const TinyViTConfig& cfg,
                     const std::string& prefix, std::uint64_t seed);
LRTokenBank load_token_bank(const std::string& prefix);

TinyViTConfig load_config(const std::string& path);
void save_config(const TinyViTConfig& cfg, const std::string& path);

}  // namespace lrbench
