#include "lrbench/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lrbench/analysis.hpp"
#include "lrbench/degrade.hpp"
#include "lrbench/errors.hpp"
#include "lrbench/metrics.hpp"
#include "lrbench/results_store.hpp"
#include "lrbench/rng.hpp"
#include "lrbench/synthetic.hpp"
#include "lrbench/text.hpp"
#include "lrbench/tinyvit.hpp"
#include "lrbench/weight_opt.hpp"
#include "lrbench/zeroshot.hpp"

namespace lrbench {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

int resolve_threads(int flag_value) {
    if (flag_value > 0) {
        return flag_value;
    }
    if (const char* env = std::getenv("LRBENCH_THREADS")) {
        if (const auto v = parse_int(env); v && *v > 0) {
            return static_cast<int>(*v);
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void write_run_config(const std::string& path, const json& config) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << config.dump(2) << '\n';
}

std::string run_config_path_for_dir(const std::string& out_dir) {
    return (fs::path(out_dir) / "run_config.json").string();
}

std::string run_config_path_for_file(const std::string& out_file) {
    return out_file + ".run.json";
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create directory " + dir);
    }
}

TableFormat format_for(const std::string& path, const std::string& flag) {
    if (flag == "csv") {
        return TableFormat::kCsv;
    }
    if (flag == "json") {
        return TableFormat::kJson;
    }
    if (flag.empty() || flag == "auto") {
        return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0
                   ? TableFormat::kJson
                   : TableFormat::kCsv;
    }
    throw ValidationError("unknown results format '" + flag + "'");
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        const auto stripped = trim(line);
        if (!stripped.empty()) {
            lines.emplace_back(stripped);
        }
    }
    return lines;
}

struct CommonTableArgs {
    std::string results;
    std::string format = "auto";
    std::string datasets;
    std::string models;

    void attach(CLI::App* cmd) {
        cmd->add_option("--results", results, "accuracy records file (CSV or JSON)")->required();
        cmd->add_option("--format", format, "results format: csv, json, or auto");
        cmd->add_option("--datasets", datasets, "datasets.json meta file")->required();
        cmd->add_option("--models", models, "models.json meta file")->required();
    }

    ResultsTable load() const {
        return ResultsTable::ingest(results, format_for(results, format), datasets, models);
    }

    json to_json() const {
        return {{"results", results}, {"format", format}, {"datasets", datasets},
                {"models", models}};
    }
};

// ---- subcommand bodies ----------------------------------------------------

int cmd_ingest(const CommonTableArgs& table_args, const std::string& out, int threads) {
    const ResultsTable table = table_args.load();
    if (out.size() >= 5 && out.compare(out.size() - 5, 5, ".json") == 0) {
        table.write_json(out);
    } else {
        table.write_csv(out);
    }
    json config = {{"command", "ingest"}, {"inputs", table_args.to_json()}, {"out", out},
                   {"threads", threads}};
    write_run_config(run_config_path_for_file(out), config);
    std::cout << "ingested " << table.records().size() << " records, " << table.datasets().size()
              << " datasets, " << table.models().size() << " models; coverage "
              << table.coverage() << "\n";
    return 0;
}

int cmd_metrics(const CommonTableArgs& table_args, double alpha, const std::string& weights_path,
                const std::string& out_dir, int threads) {
    const ResultsTable table = table_args.load();
    RobustnessConfig cfg;
    cfg.alpha = alpha;
    std::map<std::string, double> weights;
    if (!weights_path.empty()) {
        WeightBounds open_bounds;
        open_bounds.lo = 0.0;
        open_bounds.hi = std::numeric_limits<double>::infinity();
        weights = WeightVector::load(weights_path, open_bounds).weights;
    }
    const MetricsResult result = compute_all(table, cfg, weights);
    ensure_dir(out_dir);
    write_scores_csv(result, (fs::path(out_dir) / "scores.csv").string());
    write_cells_csv(result, (fs::path(out_dir) / "cells.csv").string());
    json config = {{"command", "metrics"},
                   {"inputs", table_args.to_json()},
                   {"alpha", alpha},
                   {"weights", weights_path},
                   {"out_dir", out_dir},
                   {"threads", threads}};
    write_run_config(run_config_path_for_dir(out_dir), config);
    std::cout << result.cells.size() << " cells, " << result.aggregates.size()
              << " aggregates";
    if (!result.models_without_hr.empty()) {
        std::cout << "; models without HR cells:";
        for (const auto& m : result.models_without_hr) {
            std::cout << ' ' << m;
        }
    }
    if (result.missing_cells > 0) {
        std::cout << "; " << result.missing_cells << " half-covered cells skipped";
    }
    std::cout << "\n";
    return 0;
}

int cmd_optimize_weights(const CommonTableArgs& table_args, int resolution,
                         const std::string& objective_spec, double alpha, int budget,
                         std::uint64_t seed, double lo, double hi, const std::string& out_dir,
                         int threads) {
    const ResultsTable table = table_args.load();
    RobustnessConfig cfg;
    cfg.alpha = alpha;
    const MetricsResult metrics = compute_all(table, cfg);
    const GammaMatrix matrix = GammaMatrix::from_metrics(metrics, resolution);
    const Objective objective =
        objective_spec.empty() ? Objective::lr0fm_default() : Objective::parse(objective_spec);
    const WeightBounds bounds{lo, hi};
    const OptimizeResult result = optimize_weights(matrix, objective, bounds, budget, seed);

    ensure_dir(out_dir);
    result.weights.save((fs::path(out_dir) / "weights.json").string());
    write_trace_csv(result, (fs::path(out_dir) / "trace.csv").string());
    json objective_json = json::array();
    for (const auto& term : objective.terms) {
        objective_json.push_back({{"dataset_id", term.dataset_id},
                                  {"coefficient", term.coefficient}});
    }
    json config = {{"command", "optimize-weights"},
                   {"inputs", table_args.to_json()},
                   {"resolution", resolution},
                   {"objective", objective_json},
                   {"alpha", alpha},
                   {"budget", budget},
                   {"seed", seed},
                   {"bounds", {{"lo", lo}, {"hi", hi}}},
                   {"out_dir", out_dir},
                   {"threads", threads}};
    write_run_config(run_config_path_for_dir(out_dir), config);
    std::cout << "best objective " << format_double(result.objective) << " after "
              << result.evaluations << " evaluations\n";
    return 0;
}

int cmd_rank(const std::string& scores_path, const std::string& by, int resolution,
             const std::string& out, int threads) {
    const auto aggregates = load_scores_csv(scores_path);
    std::vector<std::pair<std::string, double>> entries;
    for (const auto& agg : aggregates) {
        if (agg.resolution != resolution) {
            continue;
        }
        double value = 0.0;
        if (by == "sar") {
            value = agg.sar;
        } else if (by == "war") {
            value = agg.war;
        } else if (by == "acc") {
            value = agg.acc;
        } else {
            throw ValidationError("--by must be sar, war, or acc");
        }
        entries.emplace_back(agg.model_id, value);
    }
    if (entries.empty()) {
        throw ValidationError("no aggregate rows at resolution " + std::to_string(resolution));
    }
    std::vector<double> values;
    values.reserve(entries.size());
    for (const auto& [unused, v] : entries) {
        values.push_back(v);
    }
    const auto ascending = average_ranks(values);
    // rank 1 = best (highest value); ties keep averaged ranks.
    const double m = static_cast<double>(entries.size());
    std::vector<std::size_t> order(entries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&values](std::size_t a, std::size_t b) {
        return values[a] > values[b];
    });
    std::ofstream file(out);
    if (!file) {
        throw IoError("cannot write " + out);
    }
    file << "model_id," << by << ",rank\n";
    for (const std::size_t i : order) {
        file << entries[i].first << ',' << format_double(values[i]) << ','
             << format_double(m + 1.0 - ascending[i]) << '\n';
    }
    json config = {{"command", "rank"},        {"scores", scores_path}, {"by", by},
                   {"resolution", resolution}, {"out", out},            {"threads", threads}};
    write_run_config(run_config_path_for_file(out), config);
    return 0;
}

int cmd_degrade(const std::string& in_path, const std::string& out_path, int n, int model_res,
                bool antialias, int threads) {
    const Image input = load_image(in_path);
    PreprocessSpec spec;
    spec.low_res = n;
    spec.model_res = model_res;
    spec.antialias = antialias;
    // Identity normalization: the output stays in [0, 1] and is saved as an image.
    const Image output = degrade_pipeline(input, spec);
    save_image(output, out_path);
    json config = {{"command", "degrade"}, {"in", in_path},   {"out", out_path},
                   {"n", n},               {"model_res", model_res},
                   {"antialias", antialias}, {"threads", threads}};
    write_run_config(run_config_path_for_file(out_path), config);
    return 0;
}

int cmd_eval_zeroshot(const std::string& images_emb, const std::string& classes_emb,
                      const std::string& encoder_path, const std::string& class_labels_path,
                      const std::string& templates_path, const std::string& labels_path, int k,
                      const std::string& out_dir, int threads) {
    EmbeddingMatrix images = load_embedding_matrix(images_emb);
    if (!images.normalized) {
        images.l2_normalize_rows();
    }

    EmbeddingMatrix classes;
    if (!classes_emb.empty()) {
        classes = load_embedding_matrix(classes_emb);
        if (!classes.normalized) {
            classes.l2_normalize_rows();
        }
    } else {
        if (encoder_path.empty() || class_labels_path.empty() || templates_path.empty()) {
            throw ValidationError(
                "need either --classes-emb or all of --encoder, --class-labels, --templates");
        }
        const LookupTextEncoder encoder = LookupTextEncoder::load(encoder_path);
        const auto labels = read_lines(class_labels_path);
        const PromptTemplateSet templates = PromptTemplateSet::load(templates_path);
        classes = build_class_embeddings(encoder, labels, templates);
    }

    std::vector<int> truth;
    if (!labels_path.empty()) {
        for (const auto& line : read_lines(labels_path)) {
            const auto v = parse_int(line);
            if (!v) {
                throw ValidationError(labels_path + ": bad class index '" + line + "'");
            }
            truth.push_back(static_cast<int>(*v));
        }
    }

    const Classification result = classify(images, classes, k, truth);

    ensure_dir(out_dir);
    {
        std::ofstream out((fs::path(out_dir) / "predictions.csv").string());
        if (!out) {
            throw IoError("cannot write predictions.csv");
        }
        out << "image_index,topk,tie\n";
        for (std::size_t i = 0; i < result.topk.size(); ++i) {
            out << i << ',';
            for (std::size_t j = 0; j < result.topk[i].size(); ++j) {
                out << result.topk[i][j];
                if (j + 1 < result.topk[i].size()) {
                    out << ' ';
                }
            }
            out << ',' << static_cast<int>(result.tie_flags[i]) << '\n';
        }
    }
    json summary = {{"images", images.rows}, {"classes", classes.rows}, {"k", k}};
    if (result.accuracy) {
        summary["accuracy"] = *result.accuracy;
    }
    write_run_config((fs::path(out_dir) / "summary.json").string(), summary);
    json config = {{"command", "eval-zeroshot"},
                   {"images_emb", images_emb},
                   {"classes_emb", classes_emb},
                   {"encoder", encoder_path},
                   {"class_labels", class_labels_path},
                   {"templates", templates_path},
                   {"labels", labels_path},
                   {"k", k},
                   {"out_dir", out_dir},
                   {"threads", threads}};
    write_run_config(run_config_path_for_dir(out_dir), config);
    if (result.accuracy) {
        std::cout << "top-" << k << " accuracy " << format_double(*result.accuracy) << "\n";
    }
    return 0;
}

int cmd_train_lrtk(const std::string& config_path, int steps, std::uint64_t seed,
                   const std::string& buckets_text, int start_block, int batch_size, int pool,
                   double learning_rate, double tau, const std::string& out_dir, int threads) {
    TinyViTConfig cfg;
    if (!config_path.empty()) {
        cfg = load_config(config_path);
    }
    cfg.validate();
    if (batch_size < 2) {
        throw ValidationError("--batch must be >= 2 for the contrastive loss");
    }
    if (pool < batch_size) {
        throw ValidationError("--pool must be >= --batch");
    }
    const BucketSpec buckets =
        buckets_text.empty() ? BucketSpec::defaults() : BucketSpec::parse(buckets_text);

    Rng rng(seed);
    Rng data_rng = rng.fork(1);
    Rng batch_rng = rng.fork(2);
    const BaseParameters params = BaseParameters::random(cfg, rng.next_u64());
    LRTokenBank tokens = LRTokenBank::zeros(cfg);
    const std::vector<Image> pool_images = synthetic_dataset(pool, cfg.input_res, data_rng);

    ensure_dir(out_dir);
    std::ofstream loss_csv((fs::path(out_dir) / "loss.csv").string());
    if (!loss_csv) {
        throw IoError("cannot write loss.csv");
    }
    loss_csv << "step,loss\n";
    for (int step = 1; step <= steps; ++step) {
        std::vector<Image> hr;
        hr.reserve(static_cast<std::size_t>(batch_size));
        if (pool == batch_size) {
            hr = pool_images;
        } else {
            for (int i = 0; i < batch_size; ++i) {
                hr.push_back(pool_images[static_cast<std::size_t>(
                    batch_rng.uniform_int(0, pool - 1))]);
            }
        }
        const TrainBatch batch = make_train_batch(hr, buckets, batch_rng);
        const auto stats = train_step(params, tokens, batch, tau, learning_rate, start_block);
        loss_csv << step << ',' << format_double(stats.loss) << '\n';
    }

    const std::string prefix = (fs::path(out_dir) / "checkpoint").string();
    save_base_parameters(params, prefix, seed);
    save_token_bank(tokens, cfg, prefix, seed);
    json cfg_json;
    cfg_json["command"] = "train-lrtk";
    cfg_json["config"] = {{"input_res", cfg.input_res},   {"patch_size", cfg.patch_size},
                          {"dim", cfg.dim},               {"depth", cfg.depth},
                          {"heads", cfg.heads},           {"mlp_ratio", cfg.mlp_ratio},
                          {"embed_dim_out", cfg.embed_dim_out}};
    cfg_json["steps"] = steps;
    cfg_json["seed"] = seed;
    cfg_json["buckets"] = buckets_text.empty() ? "16:32,32:64,64:128" : buckets_text;
    cfg_json["start_block"] = start_block;
    cfg_json["batch"] = batch_size;
    cfg_json["pool"] = pool;
    cfg_json["learning_rate"] = learning_rate;
    cfg_json["tau"] = tau;
    cfg_json["out_dir"] = out_dir;
    cfg_json["threads"] = threads;
    write_run_config(run_config_path_for_dir(out_dir), cfg_json);
    std::cout << "trained " << steps << " steps; checkpoint at " << prefix << ".*\n";
    return 0;
}

int cmd_layer_sim(const std::string& checkpoint, bool with_tokens, int n, int images,
                  std::uint64_t seed, const std::string& out_dir, int threads) {
    const BaseParameters params = load_base_parameters(checkpoint);
    LRTokenBank tokens;
    if (with_tokens) {
        tokens = load_token_bank(checkpoint);
    }
    const TinyViTConfig& cfg = params.config;
    Rng rng(seed);

    const int layers = cfg.depth + 1;
    std::vector<std::vector<double>> lr_mean(static_cast<std::size_t>(layers),
                                             std::vector<double>(cfg.dim, 0.0));
    std::vector<std::vector<double>> hr_mean = lr_mean;
    for (int i = 0; i < images; ++i) {
        const Image hr = synthetic_image(cfg.input_res, rng);
        PreprocessSpec spec;
        spec.low_res = n;
        spec.model_res = cfg.input_res;
        const Image lr = degrade_pipeline(hr, spec);
        const auto hr_result = vit_forward(params, nullptr, hr);
        const auto lr_result = vit_forward(params, with_tokens ? &tokens : nullptr, lr);
        for (int l = 0; l < layers; ++l) {
            for (int d = 0; d < cfg.dim; ++d) {
                hr_mean[static_cast<std::size_t>(l)][static_cast<std::size_t>(d)] +=
                    hr_result.layer_features[static_cast<std::size_t>(l)]
                                            [static_cast<std::size_t>(d)];
                lr_mean[static_cast<std::size_t>(l)][static_cast<std::size_t>(d)] +=
                    lr_result.layer_features[static_cast<std::size_t>(l)]
                                            [static_cast<std::size_t>(d)];
            }
        }
    }
    for (int l = 0; l < layers; ++l) {
        lr_mean[static_cast<std::size_t>(l)] = l2_normalized(lr_mean[static_cast<std::size_t>(l)]);
        hr_mean[static_cast<std::size_t>(l)] = l2_normalized(hr_mean[static_cast<std::size_t>(l)]);
    }
    const SimilarityHeatmap heatmap = layer_similarity(lr_mean, hr_mean);

    ensure_dir(out_dir);
    write_heatmap_csv(heatmap,
                      (fs::path(out_dir) / ("heatmap_" + std::to_string(n) + ".csv")).string());
    json config = {{"command", "layer-sim"}, {"checkpoint", checkpoint},
                   {"with_tokens", with_tokens}, {"n", n},       {"images", images},
                   {"seed", seed},               {"out_dir", out_dir}, {"threads", threads}};
    write_run_config(run_config_path_for_dir(out_dir), config);
    return 0;
}

int cmd_report(const std::string& scores_path, const std::string& cells_path,
               const std::vector<std::string>& heatmap_specs, const std::string& out_dir,
               int threads) {
    MetricsResult metrics;
    metrics.aggregates = load_scores_csv(scores_path);
    metrics.cells = load_cells_csv(cells_path);
    std::vector<std::pair<int, SimilarityHeatmap>> heatmaps;
    for (const auto& spec : heatmap_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("--heatmap expects n=path, got '" + spec + "'");
        }
        const auto n = parse_int(spec.substr(0, eq));
        if (!n) {
            throw ValidationError("--heatmap expects n=path, got '" + spec + "'");
        }
        heatmaps.emplace_back(static_cast<int>(*n), load_heatmap_csv(spec.substr(eq + 1)));
    }
    emit_report(metrics, heatmaps, out_dir);
    json config = {{"command", "report"},  {"scores", scores_path}, {"cells", cells_path},
                   {"heatmaps", heatmap_specs}, {"out_dir", out_dir}, {"threads", threads}};
    write_run_config(run_config_path_for_dir(out_dir), config);
    return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"lrbench: low-resolution robustness benchmark toolkit"};
    app.require_subcommand(1);
    int threads_flag = 0;
    app.add_option("--threads", threads_flag,
                   "worker thread cap (default: LRBENCH_THREADS or hardware)");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate and normalize an accuracy table");
    CommonTableArgs ingest_args;
    ingest_args.attach(ingest);
    std::string ingest_out = "table.csv";
    ingest->add_option("--out", ingest_out, "normalized output table (.csv or .json)");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "compute gamma/Gamma cells and SAR/WAR/ACC");
    CommonTableArgs metrics_args;
    metrics_args.attach(metrics);
    double alpha = 200.0;
    std::string weights_path;
    std::string metrics_out = ".";
    metrics->add_option("--alpha", alpha, "improved-robustness decay rate");
    metrics->add_option("--weights", weights_path, "dataset weights JSON for WAR");
    metrics->add_option("--out-dir", metrics_out, "output directory");

    // optimize-weights
    auto* optimize = app.add_subcommand("optimize-weights",
                                        "search dataset weights maximizing rank correlations");
    CommonTableArgs optimize_args;
    optimize_args.attach(optimize);
    int opt_resolution = 16;
    std::string objective_spec;
    double opt_alpha = 200.0;
    int budget = 2000;
    std::uint64_t opt_seed = 0;
    double lo = 0.01;
    double hi = 1.0;
    std::string opt_out = ".";
    optimize->add_option("--resolution", opt_resolution, "resolution whose cells drive the search");
    optimize->add_option("--objective", objective_spec,
                         "dataset:coefficient list (default: the standard five-term objective)");
    optimize->add_option("--alpha", opt_alpha, "improved-robustness decay rate");
    optimize->add_option("--budget", budget, "objective evaluation budget");
    optimize->add_option("--seed", opt_seed, "search seed");
    optimize->add_option("--lo", lo, "weight lower bound");
    optimize->add_option("--hi", hi, "weight upper bound");
    optimize->add_option("--out-dir", opt_out, "output directory");

    // rank
    auto* rank = app.add_subcommand("rank", "rank models by an aggregate metric");
    std::string rank_scores;
    std::string rank_by = "war";
    int rank_resolution = 16;
    std::string rank_out = "ranking.csv";
    rank->add_option("--scores", rank_scores, "scores.csv from the metrics subcommand")
        ->required();
    rank->add_option("--by", rank_by, "sar, war, or acc");
    rank->add_option("--resolution", rank_resolution, "resolution to rank at");
    rank->add_option("--out", rank_out, "output ranking CSV");

    // degrade
    auto* degrade = app.add_subcommand("degrade", "simulate low resolution for one image");
    int degrade_n = 16;
    int model_res = 224;
    bool antialias = false;
    std::string degrade_in;
    std::string degrade_out;
    degrade->add_option("--n", degrade_n, "low resolution n (image becomes n x n first)")
        ->required();
    degrade->add_option("--model-res", model_res, "model input resolution");
    degrade->add_flag("--antialias", antialias, "prefilter when downsampling");
    degrade->add_option("input", degrade_in, "input image (.png or .ppm)")->required();
    degrade->add_option("output", degrade_out, "output image (.png or .ppm)")->required();

    // eval-zeroshot
    auto* zeroshot = app.add_subcommand("eval-zeroshot", "zero-shot classification from embeddings");
    std::string images_emb;
    std::string classes_emb;
    std::string encoder_path;
    std::string class_labels_path;
    std::string templates_path;
    std::string labels_path;
    int k = 1;
    std::string zs_out = ".";
    zeroshot->add_option("--images-emb", images_emb, "image embedding matrix (.f32 + .json)")
        ->required();
    zeroshot->add_option("--classes-emb", classes_emb, "class embedding matrix");
    zeroshot->add_option("--encoder", encoder_path, "lookup text-encoder matrix with keys");
    zeroshot->add_option("--class-labels", class_labels_path, "class label list, one per line");
    zeroshot->add_option("--templates", templates_path, "prompt template JSON");
    zeroshot->add_option("--labels", labels_path, "ground-truth class indices, one per line");
    zeroshot->add_option("--k", k, "top-k");
    zeroshot->add_option("--out-dir", zs_out, "output directory");

    // train-lrtk
    auto* train = app.add_subcommand("train-lrtk", "train LR token banks on synthetic images");
    std::string train_config;
    int steps = 200;
    std::uint64_t train_seed = 0;
    std::string buckets_text;
    int start_block = 0;
    int batch_size = 8;
    int pool = 8;
    double learning_rate = 1e-2;
    double tau = 0.07;
    std::string train_out = ".";
    train->add_option("--config", train_config, "TinyViT config JSON (defaults when omitted)");
    train->add_option("--steps", steps, "training steps");
    train->add_option("--seed", train_seed, "run seed");
    train->add_option("--buckets", buckets_text, "bucket spec, e.g. 16:32,32:64,64:128");
    train->add_option("--start-block", start_block, "first block whose bank is trained");
    train->add_option("--batch", batch_size, "batch size");
    train->add_option("--pool", pool, "synthetic image pool size");
    train->add_option("--lr", learning_rate, "learning rate");
    train->add_option("--tau", tau, "contrastive temperature");
    train->add_option("--out-dir", train_out, "output directory");

    // layer-sim
    auto* layer_sim = app.add_subcommand("layer-sim", "layer-wise LR/HR feature similarity");
    std::string checkpoint;
    bool with_tokens = false;
    int sim_n = 16;
    int sim_images = 8;
    std::uint64_t sim_seed = 0;
    std::string sim_out = ".";
    layer_sim->add_option("--checkpoint", checkpoint, "checkpoint prefix from train-lrtk")
        ->required();
    layer_sim->add_flag("--with-tokens", with_tokens, "apply the trained token banks to the LR pass");
    layer_sim->add_option("--n", sim_n, "low resolution n");
    layer_sim->add_option("--images", sim_images, "number of probe images");
    layer_sim->add_option("--seed", sim_seed, "probe image seed");
    layer_sim->add_option("--out-dir", sim_out, "output directory");

    // report
    auto* report = app.add_subcommand("report", "emit the CSV + SVG report bundle");
    std::string report_scores;
    std::string report_cells;
    std::vector<std::string> heatmap_specs;
    std::string report_out = "report";
    report->add_option("--scores", report_scores, "scores.csv")->required();
    report->add_option("--cells", report_cells, "cells.csv")->required();
    report->add_option("--heatmap", heatmap_specs, "n=path heatmap CSVs to include");
    report->add_option("--out-dir", report_out, "output directory");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 64;
    }

    const int threads = resolve_threads(threads_flag);
    try {
        if (ingest->parsed()) {
            return cmd_ingest(ingest_args, ingest_out, threads);
        }
        if (metrics->parsed()) {
            return cmd_metrics(metrics_args, alpha, weights_path, metrics_out, threads);
        }
        if (optimize->parsed()) {
            return cmd_optimize_weights(optimize_args, opt_resolution, objective_spec, opt_alpha,
                                        budget, opt_seed, lo, hi, opt_out, threads);
        }
        if (rank->parsed()) {
            return cmd_rank(rank_scores, rank_by, rank_resolution, rank_out, threads);
        }
        if (degrade->parsed()) {
            return cmd_degrade(degrade_in, degrade_out, degrade_n, model_res, antialias, threads);
        }
        if (zeroshot->parsed()) {
            return cmd_eval_zeroshot(images_emb, classes_emb, encoder_path, class_labels_path,
                                     templates_path, labels_path, k, zs_out, threads);
        }
        if (train->parsed()) {
            return cmd_train_lrtk(train_config, steps, train_seed, buckets_text, start_block,
                                  batch_size, pool, learning_rate, tau, train_out, threads);
        }
        if (layer_sim->parsed()) {
            return cmd_layer_sim(checkpoint, with_tokens, sim_n, sim_images, sim_seed, sim_out,
                                 threads);
        }
        if (report->parsed()) {
            return cmd_report(report_scores, report_cells, heatmap_specs, report_out, threads);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    }
    std::cerr << app.help();
    return 64;
}

}  // namespace lrbench
