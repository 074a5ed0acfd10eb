#include "lrbench/tinyvit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "lrbench/degrade.hpp"
#include "lrbench/errors.hpp"
#include "lrbench/text.hpp"

namespace lrbench {

using nlohmann::json;

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kSqrt2Pi = 2.5066282746310005;

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
}

double gelu_grad(double x) {
    return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * std::exp(-0.5 * x * x) / kSqrt2Pi;
}

// y = x * W^T + b, x: n x in, W: out x in.
Mat linear(const Mat& x, const Mat& w, const std::vector<double>& b) {
    Mat y(x.rows, w.rows);
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.row_ptr(r);
        double* yr = y.row_ptr(r);
        for (int o = 0; o < w.rows; ++o) {
            const double* wr = w.row_ptr(o);
            double acc = b[static_cast<std::size_t>(o)];
            for (int i = 0; i < w.cols; ++i) {
                acc += xr[i] * wr[i];
            }
            yr[o] = acc;
        }
    }
    return y;
}

// dx = dy * W, dy: n x out, W: out x in.
Mat linear_backward_input(const Mat& dy, const Mat& w) {
    Mat dx(dy.rows, w.cols);
    for (int r = 0; r < dy.rows; ++r) {
        const double* dyr = dy.row_ptr(r);
        double* dxr = dx.row_ptr(r);
        for (int o = 0; o < w.rows; ++o) {
            const double g = dyr[o];
            if (g == 0.0) {
                continue;
            }
            const double* wr = w.row_ptr(o);
            for (int i = 0; i < w.cols; ++i) {
                dxr[i] += g * wr[i];
            }
        }
    }
    return dx;
}

struct LnStats {
    std::vector<double> mu;
    std::vector<double> rstd;
};

Mat layer_norm(const Mat& x, const std::vector<double>& gamma, const std::vector<double>& beta,
               LnStats& stats) {
    Mat y(x.rows, x.cols);
    stats.mu.resize(static_cast<std::size_t>(x.rows));
    stats.rstd.resize(static_cast<std::size_t>(x.rows));
    const double inv_d = 1.0 / static_cast<double>(x.cols);
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.row_ptr(r);
        double mu = 0.0;
        for (int c = 0; c < x.cols; ++c) {
            mu += xr[c];
        }
        mu *= inv_d;
        double var = 0.0;
        for (int c = 0; c < x.cols; ++c) {
            const double d = xr[c] - mu;
            var += d * d;
        }
        var *= inv_d;
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        stats.mu[static_cast<std::size_t>(r)] = mu;
        stats.rstd[static_cast<std::size_t>(r)] = rstd;
        double* yr = y.row_ptr(r);
        for (int c = 0; c < x.cols; ++c) {
            yr[c] = (xr[c] - mu) * rstd * gamma[static_cast<std::size_t>(c)] +
                    beta[static_cast<std::size_t>(c)];
        }
    }
    return y;
}

Mat layer_norm_backward(const Mat& x, const LnStats& stats, const std::vector<double>& gamma,
                        const Mat& dy) {
    Mat dx(x.rows, x.cols);
    const double inv_d = 1.0 / static_cast<double>(x.cols);
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.row_ptr(r);
        const double* dyr = dy.row_ptr(r);
        double* dxr = dx.row_ptr(r);
        const double mu = stats.mu[static_cast<std::size_t>(r)];
        const double rstd = stats.rstd[static_cast<std::size_t>(r)];
        double mean_dxhat = 0.0;
        double mean_dxhat_xhat = 0.0;
        for (int c = 0; c < x.cols; ++c) {
            const double xhat = (xr[c] - mu) * rstd;
            const double dxhat = dyr[c] * gamma[static_cast<std::size_t>(c)];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xhat;
        }
        mean_dxhat *= inv_d;
        mean_dxhat_xhat *= inv_d;
        for (int c = 0; c < x.cols; ++c) {
            const double xhat = (xr[c] - mu) * rstd;
            const double dxhat = dyr[c] * gamma[static_cast<std::size_t>(c)];
            dxr[c] = rstd * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
        }
    }
    return dx;
}

struct BlockCache {
    Mat x_in;  // input after any bank addition
    LnStats ln1;
    Mat q, k, v;
    std::vector<Mat> probs;  // per head, seq x seq
    Mat x2;                  // after attention residual
    LnStats ln2;
    Mat f1;  // pre-GELU
};

struct ForwardCacheData {
    Mat tokens0;
    std::vector<BlockCache> blocks;
    std::vector<double> emb_pre;
    std::vector<double> emb;
    double pre_norm = 0.0;
};

Mat run_block(const BlockParams& bp, const TinyViTConfig& cfg, const Mat& x, BlockCache& cache) {
    const int seq = x.rows;
    const int dim = cfg.dim;
    const int heads = cfg.heads;
    const int hd = cfg.head_dim();
    const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));

    cache.x_in = x;
    const Mat u = layer_norm(x, bp.ln1_gamma, bp.ln1_beta, cache.ln1);
    cache.q = linear(u, bp.wq, bp.bq);
    cache.k = linear(u, bp.wk, bp.bk);
    cache.v = linear(u, bp.wv, bp.bv);

    Mat concat(seq, dim);
    cache.probs.assign(static_cast<std::size_t>(heads), Mat());
    for (int h = 0; h < heads; ++h) {
        const int off = h * hd;
        Mat& probs = cache.probs[static_cast<std::size_t>(h)];
        probs = Mat(seq, seq);
        for (int i = 0; i < seq; ++i) {
            double max_score = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < seq; ++j) {
                double s = 0.0;
                for (int d = 0; d < hd; ++d) {
                    s += cache.q.at(i, off + d) * cache.k.at(j, off + d);
                }
                s *= inv_sqrt_hd;
                probs.at(i, j) = s;
                max_score = std::max(max_score, s);
            }
            double denom = 0.0;
            for (int j = 0; j < seq; ++j) {
                const double e = std::exp(probs.at(i, j) - max_score);
                probs.at(i, j) = e;
                denom += e;
            }
            for (int j = 0; j < seq; ++j) {
                probs.at(i, j) /= denom;
            }
            for (int d = 0; d < hd; ++d) {
                double acc = 0.0;
                for (int j = 0; j < seq; ++j) {
                    acc += probs.at(i, j) * cache.v.at(j, off + d);
                }
                concat.at(i, off + d) = acc;
            }
        }
    }

    const Mat attn_out = linear(concat, bp.wo, bp.bo);
    cache.x2 = x;
    for (std::size_t i = 0; i < cache.x2.v.size(); ++i) {
        cache.x2.v[i] += attn_out.v[i];
    }

    const Mat m = layer_norm(cache.x2, bp.ln2_gamma, bp.ln2_beta, cache.ln2);
    cache.f1 = linear(m, bp.w_fc1, bp.b_fc1);
    Mat act = cache.f1;
    for (double& a : act.v) {
        a = gelu(a);
    }
    const Mat f2 = linear(act, bp.w_fc2, bp.b_fc2);
    Mat out = cache.x2;
    for (std::size_t i = 0; i < out.v.size(); ++i) {
        out.v[i] += f2.v[i];
    }
    return out;
}

// Returns gradient at the block input given the gradient at its output.
Mat run_block_backward(const BlockParams& bp, const TinyViTConfig& cfg, const BlockCache& cache,
                       const Mat& dout) {
    const int seq = dout.rows;
    const int dim = cfg.dim;
    const int heads = cfg.heads;
    const int hd = cfg.head_dim();
    const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));

    // MLP branch: out = x2 + fc2(gelu(fc1(ln2(x2)))).
    Mat dg = linear_backward_input(dout, bp.w_fc2);
    for (std::size_t i = 0; i < dg.v.size(); ++i) {
        dg.v[i] *= gelu_grad(cache.f1.v[i]);
    }
    const Mat dm = linear_backward_input(dg, bp.w_fc1);
    Mat dx2 = layer_norm_backward(cache.x2, cache.ln2, bp.ln2_gamma, dm);
    for (std::size_t i = 0; i < dx2.v.size(); ++i) {
        dx2.v[i] += dout.v[i];
    }

    // Attention branch: x2 = x_in + wo(concat(heads)).
    const Mat dconcat = linear_backward_input(dx2, bp.wo);
    Mat dq(seq, dim);
    Mat dk(seq, dim);
    Mat dv(seq, dim);
    for (int h = 0; h < heads; ++h) {
        const int off = h * hd;
        const Mat& probs = cache.probs[static_cast<std::size_t>(h)];
        for (int i = 0; i < seq; ++i) {
            // dP = dconcat_h * v_h^T, then row-wise softmax backward.
            std::vector<double> dp(static_cast<std::size_t>(seq), 0.0);
            double dot = 0.0;
            for (int j = 0; j < seq; ++j) {
                double acc = 0.0;
                for (int d = 0; d < hd; ++d) {
                    acc += dconcat.at(i, off + d) * cache.v.at(j, off + d);
                }
                dp[static_cast<std::size_t>(j)] = acc;
                dot += acc * probs.at(i, j);
            }
            for (int j = 0; j < seq; ++j) {
                const double ds = probs.at(i, j) *
                                  (dp[static_cast<std::size_t>(j)] - dot) * inv_sqrt_hd;
                for (int d = 0; d < hd; ++d) {
                    dq.at(i, off + d) += ds * cache.k.at(j, off + d);
                    dk.at(j, off + d) += ds * cache.q.at(i, off + d);
                }
            }
            for (int j = 0; j < seq; ++j) {
                const double p = probs.at(i, j);
                for (int d = 0; d < hd; ++d) {
                    dv.at(j, off + d) += p * dconcat.at(i, off + d);
                }
            }
        }
    }
    Mat du = linear_backward_input(dq, bp.wq);
    const Mat duk = linear_backward_input(dk, bp.wk);
    const Mat duv = linear_backward_input(dv, bp.wv);
    for (std::size_t i = 0; i < du.v.size(); ++i) {
        du.v[i] += duk.v[i] + duv.v[i];
    }
    Mat dx = layer_norm_backward(cache.x_in, cache.ln1, bp.ln1_gamma, du);
    for (std::size_t i = 0; i < dx.v.size(); ++i) {
        dx.v[i] += dx2.v[i];
    }
    return dx;
}

Mat patchify(const BaseParameters& params, const Image& img) {
    const TinyViTConfig& cfg = params.config;
    const int side = cfg.input_res / cfg.patch_size;
    const int ps = cfg.patch_size;
    Mat tokens(cfg.num_patches(), cfg.dim);
    std::vector<double> patch(static_cast<std::size_t>(cfg.patch_dim()), 0.0);
    for (int gy = 0; gy < side; ++gy) {
        for (int gx = 0; gx < side; ++gx) {
            std::size_t idx = 0;
            for (int py = 0; py < ps; ++py) {
                for (int px = 0; px < ps; ++px) {
                    for (int c = 0; c < Image::kChannels; ++c) {
                        patch[idx++] = img.at(gy * ps + py, gx * ps + px, c);
                    }
                }
            }
            const int p = gy * side + gx;
            for (int d = 0; d < cfg.dim; ++d) {
                const double* w = params.patch_proj.row_ptr(d);
                double acc = params.patch_bias[static_cast<std::size_t>(d)];
                for (std::size_t j = 0; j < patch.size(); ++j) {
                    acc += w[j] * patch[j];
                }
                tokens.at(p, d) = acc;
            }
        }
    }
    return tokens;
}

bool bank_active(int bank, int start_block) {
    if (bank == 0) {
        return start_block == 0;
    }
    return bank >= std::max(start_block, 1);
}

// Shared forward. `vpt` non-null switches to the concatenation variant and
// disables the banks.
ForwardResult forward_impl(const BaseParameters& params, const LRTokenBank* tokens,
                           const Mat* vpt, const Image& img, int start_block,
                           ForwardCacheData* cache) {
    const TinyViTConfig& cfg = params.config;
    cfg.validate();
    if (img.height != cfg.input_res || img.width != cfg.input_res) {
        throw ValidationError("image is " + std::to_string(img.height) + "x" +
                              std::to_string(img.width) + ", model expects " +
                              std::to_string(cfg.input_res));
    }
    if (start_block < 0 || start_block > cfg.depth) {
        throw ValidationError("start_block must lie in [0, depth]");
    }
    if (tokens != nullptr) {
        tokens->check_shape(cfg);
    }
    if (vpt != nullptr && vpt->cols != cfg.dim) {
        throw ValidationError("vpt tokens must have width dim");
    }

    const int num_patches = cfg.num_patches();
    const int vpt_count = vpt != nullptr ? vpt->rows : 0;
    const int seq = cfg.seq_len() + vpt_count;

    Mat spatial = patchify(params, img);
    if (tokens != nullptr && bank_active(0, start_block)) {
        const Mat& bank = tokens->banks[0];
        for (std::size_t i = 0; i < spatial.v.size(); ++i) {
            spatial.v[i] += bank.v[i];
        }
    }

    Mat x(seq, cfg.dim);
    for (int d = 0; d < cfg.dim; ++d) {
        x.at(0, d) = params.cls_token[static_cast<std::size_t>(d)] + params.pos_embed.at(0, d);
    }
    for (int p = 0; p < num_patches; ++p) {
        for (int d = 0; d < cfg.dim; ++d) {
            x.at(1 + p, d) = spatial.at(p, d) + params.pos_embed.at(1 + p, d);
        }
    }
    for (int t = 0; t < vpt_count; ++t) {
        for (int d = 0; d < cfg.dim; ++d) {
            x.at(1 + num_patches + t, d) = vpt->at(t, d);
        }
    }

    ForwardResult result;
    const auto pool_spatial = [num_patches, &cfg](const Mat& m) {
        std::vector<double> mean(static_cast<std::size_t>(cfg.dim), 0.0);
        for (int p = 0; p < num_patches; ++p) {
            for (int d = 0; d < cfg.dim; ++d) {
                mean[static_cast<std::size_t>(d)] += m.at(1 + p, d);
            }
        }
        for (double& v : mean) {
            v /= static_cast<double>(num_patches);
        }
        return mean;
    };
    result.layer_features.push_back(pool_spatial(x));
    if (cache != nullptr) {
        cache->tokens0 = x;
        cache->blocks.resize(static_cast<std::size_t>(cfg.depth));
    }

    BlockCache scratch;
    for (int b = 1; b <= cfg.depth; ++b) {
        if (tokens != nullptr && bank_active(b, start_block)) {
            const Mat& bank = tokens->banks[static_cast<std::size_t>(b)];
            for (int p = 0; p < num_patches; ++p) {
                for (int d = 0; d < cfg.dim; ++d) {
                    x.at(1 + p, d) += bank.at(p, d);
                }
            }
        }
        BlockCache& bc = cache != nullptr ? cache->blocks[static_cast<std::size_t>(b - 1)]
                                          : scratch;
        x = run_block(params.blocks[static_cast<std::size_t>(b - 1)], cfg, x, bc);
        result.layer_features.push_back(pool_spatial(x));
    }

    std::vector<double> emb_pre(static_cast<std::size_t>(cfg.embed_dim_out), 0.0);
    for (int o = 0; o < cfg.embed_dim_out; ++o) {
        const double* w = params.out_proj.row_ptr(o);
        double acc = params.out_bias[static_cast<std::size_t>(o)];
        for (int d = 0; d < cfg.dim; ++d) {
            acc += w[d] * x.at(0, d);
        }
        emb_pre[static_cast<std::size_t>(o)] = acc;
    }
    double norm = 0.0;
    for (const double v : emb_pre) {
        norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm <= 0.0) {
        throw ValidationError("degenerate zero embedding");
    }
    result.embedding.resize(emb_pre.size());
    for (std::size_t i = 0; i < emb_pre.size(); ++i) {
        result.embedding[i] = emb_pre[i] / norm;
    }
    if (cache != nullptr) {
        cache->emb_pre = emb_pre;
        cache->emb = result.embedding;
        cache->pre_norm = norm;
    }
    return result;
}

// Backward from d(normalized embedding) to the token stages. Accumulates bank
// gradients (standard mode) or VPT token gradients (vpt mode).
void backward_impl(const BaseParameters& params, const ForwardCacheData& cache,
                   const std::vector<double>& d_emb, int start_block, LRTokenBank* bank_grads,
                   Mat* vpt_grads) {
    const TinyViTConfig& cfg = params.config;
    const int num_patches = cfg.num_patches();
    const int seq = cache.tokens0.rows;

    // Through the L2 normalization and the output projection.
    double dot = 0.0;
    for (std::size_t i = 0; i < d_emb.size(); ++i) {
        dot += d_emb[i] * cache.emb[i];
    }
    std::vector<double> d_pre(d_emb.size(), 0.0);
    for (std::size_t i = 0; i < d_emb.size(); ++i) {
        d_pre[i] = (d_emb[i] - cache.emb[i] * dot) / cache.pre_norm;
    }
    Mat dx(seq, cfg.dim);
    for (int o = 0; o < cfg.embed_dim_out; ++o) {
        const double g = d_pre[static_cast<std::size_t>(o)];
        if (g == 0.0) {
            continue;
        }
        const double* w = params.out_proj.row_ptr(o);
        for (int d = 0; d < cfg.dim; ++d) {
            dx.at(0, d) += g * w[d];
        }
    }

    for (int b = cfg.depth; b >= 1; --b) {
        dx = run_block_backward(params.blocks[static_cast<std::size_t>(b - 1)], cfg,
                                cache.blocks[static_cast<std::size_t>(b - 1)], dx);
        if (bank_grads != nullptr && bank_active(b, start_block)) {
            Mat& grad = bank_grads->banks[static_cast<std::size_t>(b)];
            for (int p = 0; p < num_patches; ++p) {
                for (int d = 0; d < cfg.dim; ++d) {
                    grad.at(p, d) += dx.at(1 + p, d);
                }
            }
        }
    }
    if (bank_grads != nullptr && bank_active(0, start_block)) {
        Mat& grad = bank_grads->banks[0];
        for (int p = 0; p < num_patches; ++p) {
            for (int d = 0; d < cfg.dim; ++d) {
                grad.at(p, d) += dx.at(1 + p, d);
            }
        }
    }
    if (vpt_grads != nullptr) {
        for (int t = 0; t < vpt_grads->rows; ++t) {
            for (int d = 0; d < cfg.dim; ++d) {
                vpt_grads->at(t, d) += dx.at(1 + num_patches + t, d);
            }
        }
    }
}

// Loss gradients w.r.t. each student set's normalized features.
std::vector<Mat> contrastive_loss_backward(const std::vector<Mat>& student_sets,
                                           const Mat& teacher, double tau, double* loss_out);

double row_logsumexp(const Mat& m, int row) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < m.cols; ++j) {
        mx = std::max(mx, m.at(row, j));
    }
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) {
        sum += std::exp(m.at(row, j) - mx);
    }
    return mx + std::log(sum);
}

double col_logsumexp(const Mat& m, int col) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m.rows; ++i) {
        mx = std::max(mx, m.at(i, col));
    }
    double sum = 0.0;
    for (int i = 0; i < m.rows; ++i) {
        sum += std::exp(m.at(i, col) - mx);
    }
    return mx + std::log(sum);
}

void validate_loss_inputs(const std::vector<Mat>& student_sets, const Mat& teacher, double tau) {
    if (!(tau > 0.0)) {
        throw ValidationError("temperature must be positive");
    }
    if (teacher.rows < 2) {
        throw ValidationError("contrastive loss needs batch size >= 2");
    }
    if (student_sets.empty()) {
        throw ValidationError("no student feature sets");
    }
    for (const auto& s : student_sets) {
        if (s.rows != teacher.rows || s.cols != teacher.cols) {
            throw ValidationError("student/teacher feature shapes differ");
        }
    }
}

std::vector<Mat> contrastive_loss_backward(const std::vector<Mat>& student_sets,
                                           const Mat& teacher, double tau, double* loss_out) {
    validate_loss_inputs(student_sets, teacher, tau);
    const int b = teacher.rows;
    const double inv_b = 1.0 / static_cast<double>(b);
    const double set_weight = 1.0 / static_cast<double>(student_sets.size());
    double total_loss = 0.0;
    std::vector<Mat> grads;
    grads.reserve(student_sets.size());
    for (const Mat& s : student_sets) {
        Mat logits(b, b);
        for (int i = 0; i < b; ++i) {
            for (int j = 0; j < b; ++j) {
                double dotv = 0.0;
                for (int d = 0; d < s.cols; ++d) {
                    dotv += s.at(i, d) * teacher.at(j, d);
                }
                logits.at(i, j) = dotv / tau;
            }
        }
        double loss_rows = 0.0;
        double loss_cols = 0.0;
        Mat dlogits(b, b);
        for (int i = 0; i < b; ++i) {
            const double lse = row_logsumexp(logits, i);
            loss_rows += lse - logits.at(i, i);
            for (int j = 0; j < b; ++j) {
                dlogits.at(i, j) += 0.5 * inv_b * std::exp(logits.at(i, j) - lse);
            }
            dlogits.at(i, i) -= 0.5 * inv_b;
        }
        for (int j = 0; j < b; ++j) {
            const double lse = col_logsumexp(logits, j);
            loss_cols += lse - logits.at(j, j);
            for (int i = 0; i < b; ++i) {
                dlogits.at(i, j) += 0.5 * inv_b * std::exp(logits.at(i, j) - lse);
            }
            dlogits.at(j, j) -= 0.5 * inv_b;
        }
        total_loss += 0.5 * (loss_rows + loss_cols) * inv_b;

        Mat ds(b, s.cols);
        for (int i = 0; i < b; ++i) {
            for (int j = 0; j < b; ++j) {
                const double g = dlogits.at(i, j) * set_weight / tau;
                if (g == 0.0) {
                    continue;
                }
                for (int d = 0; d < s.cols; ++d) {
                    ds.at(i, d) += g * teacher.at(j, d);
                }
            }
        }
        grads.push_back(std::move(ds));
    }
    if (loss_out != nullptr) {
        *loss_out = total_loss * set_weight;
    }
    return grads;
}

}  // namespace

void TinyViTConfig::validate() const {
    if (input_res < 1 || patch_size < 1 || dim < 1 || depth < 1 || heads < 1 ||
        embed_dim_out < 1) {
        throw ValidationError("TinyViT config fields must be positive");
    }
    if (input_res % patch_size != 0) {
        throw ValidationError("input_res must be divisible by patch_size");
    }
    if (dim % heads != 0) {
        throw ValidationError("dim must be divisible by heads");
    }
    if (mlp_hidden() < 1) {
        throw ValidationError("mlp_ratio too small");
    }
}

BaseParameters BaseParameters::random(const TinyViTConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    const auto fill_mat = [&rng](Mat& m, int rows, int cols, double stddev) {
        m = Mat(rows, cols);
        for (double& v : m.v) {
            v = rng.normal(0.0, stddev);
        }
    };
    const auto fill_vec = [&rng](std::vector<double>& v, int n, double stddev) {
        v.assign(static_cast<std::size_t>(n), 0.0);
        if (stddev > 0.0) {
            for (double& x : v) {
                x = rng.normal(0.0, stddev);
            }
        }
    };

    BaseParameters p;
    p.config = cfg;
    const double patch_std = 1.0 / std::sqrt(static_cast<double>(cfg.patch_dim()));
    const double dim_std = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
    const double hidden_std = 1.0 / std::sqrt(static_cast<double>(cfg.mlp_hidden()));
    fill_mat(p.patch_proj, cfg.dim, cfg.patch_dim(), patch_std);
    fill_vec(p.patch_bias, cfg.dim, 0.0);
    fill_vec(p.cls_token, cfg.dim, 0.02);
    fill_mat(p.pos_embed, cfg.seq_len(), cfg.dim, 0.02);
    p.blocks.resize(static_cast<std::size_t>(cfg.depth));
    for (auto& blk : p.blocks) {
        blk.ln1_gamma.assign(static_cast<std::size_t>(cfg.dim), 1.0);
        blk.ln1_beta.assign(static_cast<std::size_t>(cfg.dim), 0.0);
        blk.ln2_gamma.assign(static_cast<std::size_t>(cfg.dim), 1.0);
        blk.ln2_beta.assign(static_cast<std::size_t>(cfg.dim), 0.0);
        fill_mat(blk.wq, cfg.dim, cfg.dim, dim_std);
        fill_mat(blk.wk, cfg.dim, cfg.dim, dim_std);
        fill_mat(blk.wv, cfg.dim, cfg.dim, dim_std);
        fill_mat(blk.wo, cfg.dim, cfg.dim, dim_std);
        fill_vec(blk.bq, cfg.dim, 0.0);
        fill_vec(blk.bk, cfg.dim, 0.0);
        fill_vec(blk.bv, cfg.dim, 0.0);
        fill_vec(blk.bo, cfg.dim, 0.0);
        fill_mat(blk.w_fc1, cfg.mlp_hidden(), cfg.dim, dim_std);
        fill_vec(blk.b_fc1, cfg.mlp_hidden(), 0.0);
        fill_mat(blk.w_fc2, cfg.dim, cfg.mlp_hidden(), hidden_std);
        fill_vec(blk.b_fc2, cfg.dim, 0.0);
    }
    fill_mat(p.out_proj, cfg.embed_dim_out, cfg.dim, dim_std);
    fill_vec(p.out_bias, cfg.embed_dim_out, 0.0);
    return p;
}

LRTokenBank LRTokenBank::zeros(const TinyViTConfig& cfg) {
    cfg.validate();
    LRTokenBank bank;
    bank.banks.assign(static_cast<std::size_t>(cfg.depth + 1),
                      Mat(cfg.num_patches(), cfg.dim));
    return bank;
}

void LRTokenBank::check_shape(const TinyViTConfig& cfg) const {
    if (banks.size() != static_cast<std::size_t>(cfg.depth + 1)) {
        throw ValidationError("token bank count must equal depth + 1");
    }
    for (const auto& bank : banks) {
        if (bank.rows != cfg.num_patches() || bank.cols != cfg.dim) {
            throw ValidationError("token bank shape must be num_patches x dim");
        }
    }
}

void LRTokenBank::axpy(double scale, const LRTokenBank& other) {
    if (other.banks.size() != banks.size()) {
        throw ValidationError("token bank count mismatch");
    }
    for (std::size_t b = 0; b < banks.size(); ++b) {
        if (other.banks[b].v.size() != banks[b].v.size()) {
            throw ValidationError("token bank shape mismatch");
        }
        for (std::size_t i = 0; i < banks[b].v.size(); ++i) {
            banks[b].v[i] += scale * other.banks[b].v[i];
        }
    }
}

ForwardResult vit_forward(const BaseParameters& params, const LRTokenBank* tokens,
                          const Image& img, int start_block) {
    return forward_impl(params, tokens, nullptr, img, start_block, nullptr);
}

ForwardResult vit_vpt_forward(const BaseParameters& params, const Mat& vpt_tokens,
                              const Image& img) {
    return forward_impl(params, nullptr, &vpt_tokens, img, 0, nullptr);
}

BucketSpec BucketSpec::defaults() {
    return BucketSpec{{{16, 32}, {32, 64}, {64, 128}}};
}

BucketSpec BucketSpec::parse(const std::string& text) {
    BucketSpec spec;
    for (const auto& part : split(text, ',')) {
        if (part.empty()) {
            continue;
        }
        const auto bounds = split(part, ':');
        if (bounds.size() != 2) {
            throw ValidationError("bucket '" + part + "' is not lo:hi");
        }
        const auto lo = parse_int(bounds[0]);
        const auto hi = parse_int(bounds[1]);
        if (!lo || !hi) {
            throw ValidationError("bucket '" + part + "' has non-integer bounds");
        }
        spec.buckets.push_back({static_cast<int>(*lo), static_cast<int>(*hi)});
    }
    spec.validate();
    return spec;
}

void BucketSpec::validate() const {
    if (buckets.empty()) {
        throw ValidationError("bucket spec is empty");
    }
    for (const auto& bucket : buckets) {
        if (bucket.lo < 1 || bucket.lo >= bucket.hi) {
            throw ValidationError("bucket [" + std::to_string(bucket.lo) + ", " +
                                  std::to_string(bucket.hi) + "] must satisfy 1 <= lo < hi");
        }
    }
}

std::vector<Image> sample_multiscale(const Image& img, const BucketSpec& buckets, Rng& rng) {
    buckets.validate();
    std::vector<Image> out;
    out.reserve(buckets.buckets.size());
    for (const auto& bucket : buckets.buckets) {
        const int n = rng.uniform_int(bucket.lo, bucket.hi);
        PreprocessSpec spec;
        spec.low_res = n;
        spec.model_res = img.height;
        out.push_back(degrade_pipeline(img, spec));
    }
    return out;
}

TrainBatch make_train_batch(const std::vector<Image>& hr_images, const BucketSpec& buckets,
                            Rng& rng) {
    buckets.validate();
    TrainBatch batch;
    batch.hr = hr_images;
    batch.lr.assign(buckets.buckets.size(), {});
    for (const auto& img : hr_images) {
        auto variants = sample_multiscale(img, buckets, rng);
        for (std::size_t b = 0; b < variants.size(); ++b) {
            batch.lr[b].push_back(std::move(variants[b]));
        }
    }
    return batch;
}

double contrastive_distill_loss(const std::vector<Mat>& student_sets, const Mat& teacher_feats,
                                double tau) {
    double loss = 0.0;
    contrastive_loss_backward(student_sets, teacher_feats, tau, &loss);
    return loss;
}

namespace {

struct StudentPass {
    Mat feats;  // B x embed_dim_out
    std::vector<ForwardCacheData> caches;
};

StudentPass run_student_set(const BaseParameters& params, const LRTokenBank* tokens,
                            const Mat* vpt, const std::vector<Image>& images, int start_block) {
    StudentPass pass;
    pass.feats = Mat(static_cast<int>(images.size()), params.config.embed_dim_out);
    pass.caches.resize(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto result =
            forward_impl(params, tokens, vpt, images[i], start_block, &pass.caches[i]);
        std::copy(result.embedding.begin(), result.embedding.end(),
                  pass.feats.row_ptr(static_cast<int>(i)));
    }
    return pass;
}

Mat teacher_features(const BaseParameters& params, const std::vector<Image>& images) {
    Mat feats(static_cast<int>(images.size()), params.config.embed_dim_out);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto result = forward_impl(params, nullptr, nullptr, images[i], 0, nullptr);
        std::copy(result.embedding.begin(), result.embedding.end(),
                  feats.row_ptr(static_cast<int>(i)));
    }
    return feats;
}

void check_batch(const TrainBatch& batch) {
    if (batch.hr.size() < 2) {
        throw ValidationError("contrastive training needs batch size >= 2");
    }
    for (const auto& bucket : batch.lr) {
        if (bucket.size() != batch.hr.size()) {
            throw ValidationError("LR bucket size differs from HR batch size");
        }
    }
}

}  // namespace

LRTokenBank token_gradients(const BaseParameters& params, const LRTokenBank& tokens,
                            const TrainBatch& batch, double tau, int start_block,
                            double* loss_out) {
    check_batch(batch);
    tokens.check_shape(params.config);

    const Mat teacher = teacher_features(params, batch.hr);

    std::vector<StudentPass> passes;
    passes.push_back(run_student_set(params, &tokens, nullptr, batch.hr, start_block));
    for (const auto& bucket : batch.lr) {
        passes.push_back(run_student_set(params, &tokens, nullptr, bucket, start_block));
    }

    std::vector<Mat> sets;
    sets.reserve(passes.size());
    for (const auto& pass : passes) {
        sets.push_back(pass.feats);
    }
    double loss = 0.0;
    const auto feat_grads = contrastive_loss_backward(sets, teacher, tau, &loss);
    if (!std::isfinite(loss)) {
        throw ValidationError("non-finite distillation loss (tau=" + format_double(tau) + ")");
    }

    LRTokenBank grads = LRTokenBank::zeros(params.config);
    for (std::size_t s = 0; s < passes.size(); ++s) {
        for (std::size_t i = 0; i < passes[s].caches.size(); ++i) {
            const double* row = feat_grads[s].row_ptr(static_cast<int>(i));
            const std::vector<double> d_emb(row, row + params.config.embed_dim_out);
            backward_impl(params, passes[s].caches[i], d_emb, start_block, &grads, nullptr);
        }
    }
    if (loss_out != nullptr) {
        *loss_out = loss;
    }
    return grads;
}

Mat vpt_gradients(const BaseParameters& params, const Mat& vpt_tokens, const TrainBatch& batch,
                  double tau, double* loss_out) {
    check_batch(batch);
    const Mat teacher = teacher_features(params, batch.hr);

    std::vector<StudentPass> passes;
    passes.push_back(run_student_set(params, nullptr, &vpt_tokens, batch.hr, 0));
    for (const auto& bucket : batch.lr) {
        passes.push_back(run_student_set(params, nullptr, &vpt_tokens, bucket, 0));
    }

    std::vector<Mat> sets;
    sets.reserve(passes.size());
    for (const auto& pass : passes) {
        sets.push_back(pass.feats);
    }
    double loss = 0.0;
    const auto feat_grads = contrastive_loss_backward(sets, teacher, tau, &loss);
    if (!std::isfinite(loss)) {
        throw ValidationError("non-finite distillation loss (tau=" + format_double(tau) + ")");
    }

    Mat grads(vpt_tokens.rows, vpt_tokens.cols);
    for (std::size_t s = 0; s < passes.size(); ++s) {
        for (std::size_t i = 0; i < passes[s].caches.size(); ++i) {
            const double* row = feat_grads[s].row_ptr(static_cast<int>(i));
            const std::vector<double> d_emb(row, row + params.config.embed_dim_out);
            backward_impl(params, passes[s].caches[i], d_emb, 0, nullptr, &grads);
        }
    }
    if (loss_out != nullptr) {
        *loss_out = loss;
    }
    return grads;
}

TrainStepStats train_step(const BaseParameters& params, LRTokenBank& tokens,
                          const TrainBatch& batch, double tau, double learning_rate,
                          int start_block) {
    double loss = 0.0;
    const LRTokenBank grads = token_gradients(params, tokens, batch, tau, start_block, &loss);
    tokens.axpy(-learning_rate, grads);
    return TrainStepStats{loss};
}

Mat embed_images(const BaseParameters& params, const LRTokenBank* tokens,
                 const std::vector<Image>& images, int start_block) {
    Mat feats(static_cast<int>(images.size()), params.config.embed_dim_out);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto result = vit_forward(params, tokens, images[i], start_block);
        std::copy(result.embedding.begin(), result.embedding.end(),
                  feats.row_ptr(static_cast<int>(i)));
    }
    return feats;
}

double mean_cosine(const Mat& a, const Mat& b) {
    if (a.rows != b.rows || a.cols != b.cols || a.rows == 0) {
        throw ValidationError("mean_cosine: shape mismatch");
    }
    double total = 0.0;
    for (int r = 0; r < a.rows; ++r) {
        double dot = 0.0;
        double na = 0.0;
        double nb = 0.0;
        for (int c = 0; c < a.cols; ++c) {
            dot += a.at(r, c) * b.at(r, c);
            na += a.at(r, c) * a.at(r, c);
            nb += b.at(r, c) * b.at(r, c);
        }
        total += dot / std::sqrt(na * nb);
    }
    return total / static_cast<double>(a.rows);
}

namespace {

void to_json(json& j, const TinyViTConfig& cfg) {
    j = json{{"input_res", cfg.input_res},   {"patch_size", cfg.patch_size},
             {"dim", cfg.dim},               {"depth", cfg.depth},
             {"heads", cfg.heads},           {"mlp_ratio", cfg.mlp_ratio},
             {"embed_dim_out", cfg.embed_dim_out}};
}

TinyViTConfig config_from_json(const json& j) {
    TinyViTConfig cfg;
    cfg.input_res = j.value("input_res", cfg.input_res);
    cfg.patch_size = j.value("patch_size", cfg.patch_size);
    cfg.dim = j.value("dim", cfg.dim);
    cfg.depth = j.value("depth", cfg.depth);
    cfg.heads = j.value("heads", cfg.heads);
    cfg.mlp_ratio = j.value("mlp_ratio", cfg.mlp_ratio);
    cfg.embed_dim_out = j.value("embed_dim_out", cfg.embed_dim_out);
    cfg.validate();
    return cfg;
}

struct TensorWriter {
    std::vector<float> data;
    json manifest = json::array();

    void add(const std::string& name, const std::vector<int>& shape,
             const std::vector<double>& values) {
        std::size_t count = 1;
        for (const int s : shape) {
            count *= static_cast<std::size_t>(s);
        }
        if (count != values.size()) {
            throw ValidationError("tensor '" + name + "' shape/size mismatch");
        }
        manifest.push_back(
            {{"name", name}, {"shape", shape}, {"offset", data.size()}});
        data.insert(data.end(), values.begin(), values.end());
    }

    void add(const std::string& name, const Mat& m) {
        add(name, {m.rows, m.cols}, m.v);
    }
};

void write_blob(const std::string& path, const std::vector<float>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!out) {
        throw IoError("failed writing " + path);
    }
}

std::vector<float> read_blob(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    const auto size = in.tellg();
    if (size < 0 || static_cast<std::size_t>(size) % sizeof(float) != 0) {
        throw IoError(path + ": not a float32 blob");
    }
    std::vector<float> data(static_cast<std::size_t>(size) / sizeof(float));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(data.data()), size);
    if (!in) {
        throw IoError("failed reading " + path);
    }
    return data;
}

struct TensorReader {
    std::vector<float> data;
    json manifest;
    std::size_t cursor = 0;

    std::vector<double> take(const std::string& name, const std::vector<int>& shape) {
        if (cursor >= manifest.size()) {
            throw ValidationError("manifest is missing tensor '" + name + "'");
        }
        const json& entry = manifest.at(cursor++);
        if (entry.at("name").get<std::string>() != name ||
            entry.at("shape").get<std::vector<int>>() != shape) {
            throw ValidationError("manifest entry mismatch for tensor '" + name + "'");
        }
        std::size_t count = 1;
        for (const int s : shape) {
            count *= static_cast<std::size_t>(s);
        }
        const auto offset = entry.at("offset").get<std::size_t>();
        if (offset + count > data.size()) {
            throw ValidationError("tensor '" + name + "' overruns the blob");
        }
        return std::vector<double>(data.begin() + static_cast<std::ptrdiff_t>(offset),
                                   data.begin() + static_cast<std::ptrdiff_t>(offset + count));
    }

    Mat take_mat(const std::string& name, int rows, int cols) {
        Mat m(rows, cols);
        m.v = take(name, {rows, cols});
        return m;
    }
};

json load_manifest(const std::string& path) {
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
    return doc;
}

}  // namespace

void save_base_parameters(const BaseParameters& params, const std::string& prefix,
                          std::uint64_t seed) {
    const TinyViTConfig& cfg = params.config;
    TensorWriter writer;
    writer.add("patch_proj", params.patch_proj);
    writer.add("patch_bias", {cfg.dim}, params.patch_bias);
    writer.add("cls_token", {cfg.dim}, params.cls_token);
    writer.add("pos_embed", params.pos_embed);
    for (int b = 0; b < cfg.depth; ++b) {
        const BlockParams& blk = params.blocks[static_cast<std::size_t>(b)];
        const std::string base = "block" + std::to_string(b) + ".";
        writer.add(base + "ln1_gamma", {cfg.dim}, blk.ln1_gamma);
        writer.add(base + "ln1_beta", {cfg.dim}, blk.ln1_beta);
        writer.add(base + "wq", blk.wq);
        writer.add(base + "bq", {cfg.dim}, blk.bq);
        writer.add(base + "wk", blk.wk);
        writer.add(base + "bk", {cfg.dim}, blk.bk);
        writer.add(base + "wv", blk.wv);
        writer.add(base + "bv", {cfg.dim}, blk.bv);
        writer.add(base + "wo", blk.wo);
        writer.add(base + "bo", {cfg.dim}, blk.bo);
        writer.add(base + "ln2_gamma", {cfg.dim}, blk.ln2_gamma);
        writer.add(base + "ln2_beta", {cfg.dim}, blk.ln2_beta);
        writer.add(base + "w_fc1", blk.w_fc1);
        writer.add(base + "b_fc1", {cfg.mlp_hidden()}, blk.b_fc1);
        writer.add(base + "w_fc2", blk.w_fc2);
        writer.add(base + "b_fc2", {cfg.dim}, blk.b_fc2);
    }
    writer.add("out_proj", params.out_proj);
    writer.add("out_bias", {cfg.embed_dim_out}, params.out_bias);

    write_blob(prefix + ".base.bin", writer.data);
    json manifest;
    to_json(manifest["config"], cfg);
    manifest["seed"] = seed;
    manifest["tensors"] = writer.manifest;
    std::ofstream out(prefix + ".base.json");
    if (!out) {
        throw IoError("cannot write " + prefix + ".base.json");
    }
    out << manifest.dump(2) << '\n';
}

BaseParameters load_base_parameters(const std::string& prefix) {
    const json manifest = load_manifest(prefix + ".base.json");
    const TinyViTConfig cfg = config_from_json(manifest.at("config"));
    TensorReader reader;
    reader.data = read_blob(prefix + ".base.bin");
    reader.manifest = manifest.at("tensors");

    BaseParameters p;
    p.config = cfg;
    p.patch_proj = reader.take_mat("patch_proj", cfg.dim, cfg.patch_dim());
    p.patch_bias = reader.take("patch_bias", {cfg.dim});
    p.cls_token = reader.take("cls_token", {cfg.dim});
    p.pos_embed = reader.take_mat("pos_embed", cfg.seq_len(), cfg.dim);
    p.blocks.resize(static_cast<std::size_t>(cfg.depth));
    for (int b = 0; b < cfg.depth; ++b) {
        BlockParams& blk = p.blocks[static_cast<std::size_t>(b)];
        const std::string base = "block" + std::to_string(b) + ".";
        blk.ln1_gamma = reader.take(base + "ln1_gamma", {cfg.dim});
        blk.ln1_beta = reader.take(base + "ln1_beta", {cfg.dim});
        blk.wq = reader.take_mat(base + "wq", cfg.dim, cfg.dim);
        blk.bq = reader.take(base + "bq", {cfg.dim});
        blk.wk = reader.take_mat(base + "wk", cfg.dim, cfg.dim);
        blk.bk = reader.take(base + "bk", {cfg.dim});
        blk.wv = reader.take_mat(base + "wv", cfg.dim, cfg.dim);
        blk.bv = reader.take(base + "bv", {cfg.dim});
        blk.wo = reader.take_mat(base + "wo", cfg.dim, cfg.dim);
        blk.bo = reader.take(base + "bo", {cfg.dim});
        blk.ln2_gamma = reader.take(base + "ln2_gamma", {cfg.dim});
        blk.ln2_beta = reader.take(base + "ln2_beta", {cfg.dim});
        blk.w_fc1 = reader.take_mat(base + "w_fc1", cfg.mlp_hidden(), cfg.dim);
        blk.b_fc1 = reader.take(base + "b_fc1", {cfg.mlp_hidden()});
        blk.w_fc2 = reader.take_mat(base + "w_fc2", cfg.dim, cfg.mlp_hidden());
        blk.b_fc2 = reader.take(base + "b_fc2", {cfg.dim});
    }
    p.out_proj = reader.take_mat("out_proj", cfg.embed_dim_out, cfg.dim);
    p.out_bias = reader.take("out_bias", {cfg.embed_dim_out});
    return p;
}

void save_token_bank(const LRTokenBank& tokens, const TinyViTConfig& cfg,
                     const std::string& prefix, std::uint64_t seed) {
    tokens.check_shape(cfg);
    TensorWriter writer;
    for (std::size_t b = 0; b < tokens.banks.size(); ++b) {
        writer.add("bank" + std::to_string(b), tokens.banks[b]);
    }
    write_blob(prefix + ".tokens.bin", writer.data);
    json manifest;
    to_json(manifest["config"], cfg);
    manifest["seed"] = seed;
    manifest["tensors"] = writer.manifest;
    std::ofstream out(prefix + ".tokens.json");
    if (!out) {
        throw IoError("cannot write " + prefix + ".tokens.json");
    }
    out << manifest.dump(2) << '\n';
}

LRTokenBank load_token_bank(const std::string& prefix) {
    const json manifest = load_manifest(prefix + ".tokens.json");
    const TinyViTConfig cfg = config_from_json(manifest.at("config"));
    TensorReader reader;
    reader.data = read_blob(prefix + ".tokens.bin");
    reader.manifest = manifest.at("tensors");
    LRTokenBank tokens;
    for (int b = 0; b <= cfg.depth; ++b) {
        tokens.banks.push_back(
            reader.take_mat("bank" + std::to_string(b), cfg.num_patches(), cfg.dim));
    }
    return tokens;
}

TinyViTConfig load_config(const std::string& path) {
    return config_from_json(load_manifest(path));
}

void save_config(const TinyViTConfig& cfg, const std::string& path) {
    cfg.validate();
    json doc;
    to_json(doc, cfg);
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << doc.dump(2) << '\n';
}

}  // namespace lrbench
