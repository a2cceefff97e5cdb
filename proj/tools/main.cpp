#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hoidet/assignment.hpp"
#include "hoidet/eval.hpp"
#include "hoidet/inference.hpp"
#include "hoidet/io.hpp"
#include "hoidet/losses.hpp"
#include "hoidet/model.hpp"
#include "hoidet/rng.hpp"
#include "hoidet/synth.hpp"
#include "hoidet/train.hpp"

namespace {

using namespace hoidet;

/// --config accepts a profile name (paper, desk, tiny) or a JSON file with
/// an optional "profile" base plus field overrides.
ModelConfig resolve_config(const std::string& spec) {
    if (spec == "paper") return ModelConfig::paper();
    if (spec == "desk") return ModelConfig::desk();
    if (spec == "tiny") return ModelConfig::tiny();

    std::ifstream in(spec);
    if (!in) {
        throw std::invalid_argument("config '" + spec +
                                    "' is neither a profile (paper, desk, tiny) nor a readable file");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(spec + ": " + e.what());
    }
    ModelConfig cfg = ModelConfig::desk();
    if (j.contains("profile")) {
        const std::string base = j["profile"].get<std::string>();
        if (base == "paper") {
            cfg = ModelConfig::paper();
        } else if (base == "desk") {
            cfg = ModelConfig::desk();
        } else if (base == "tiny") {
            cfg = ModelConfig::tiny();
        } else {
            throw std::invalid_argument(spec + ": unknown profile '" + base + "'");
        }
    }
    const std::unordered_map<std::string, int*> int_fields = {
        {"image_h", &cfg.image_h},
        {"image_w", &cfg.image_w},
        {"grid_h", &cfg.grid_h},
        {"grid_w", &cfg.grid_w},
        {"backbone_channels", &cfg.backbone_channels},
        {"d_model", &cfg.d_model},
        {"n_heads", &cfg.n_heads},
        {"n_encoder_layers", &cfg.n_encoder_layers},
        {"n_decoder_layers", &cfg.n_decoder_layers},
        {"ffn_hidden_dim", &cfg.ffn_hidden_dim},
        {"n_queries", &cfg.n_queries},
        {"n_obj_classes", &cfg.n_obj_classes},
        {"n_act_classes", &cfg.n_act_classes},
    };
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "profile") continue;
            if (key == "seed") {
                cfg.seed = value.get<std::uint64_t>();
                continue;
            }
            const auto it = int_fields.find(key);
            if (it == int_fields.end()) {
                throw std::invalid_argument(spec + ": unknown config field '" + key + "'");
            }
            *it->second = value.get<int>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(spec + ": " + e.what());
    }
    cfg.validate();
    return cfg;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << content;
    if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<Tensor> dataset_images(const Dataset& ds, const ModelConfig& cfg) {
    std::vector<Tensor> images;
    for (const ImageRecord& img : ds.images) {
        if (img.raster.data.empty()) {
            throw std::invalid_argument("image '" + img.id + "' has no raster");
        }
        if (img.raster.shape != std::vector<int>{3, cfg.image_h, cfg.image_w}) {
            throw std::invalid_argument("image '" + img.id +
                                        "' raster does not match the configured input size");
        }
        images.push_back(img.raster);
    }
    return images;
}

/// Applies the model's class counts from the dataset header so checkpoints
/// and predictions always agree with the annotation vocabulary.
ModelConfig config_for_dataset(ModelConfig cfg, const Dataset& ds) {
    cfg.n_obj_classes = ds.header.n_obj;
    cfg.n_act_classes = ds.header.n_act;
    cfg.validate();
    return cfg;
}

void check_params_match(const ParamSet& loaded, const ModelConfig& cfg) {
    const ParamSet expected = init_params(cfg);
    if (loaded.names != expected.names) {
        throw std::invalid_argument("checkpoint parameters do not match the model configuration");
    }
    for (size_t i = 0; i < loaded.values.size(); ++i) {
        if (loaded.values[i].shape != expected.values[i].shape) {
            throw std::invalid_argument("checkpoint tensor '" + loaded.names[i] +
                                        "' has the wrong shape for the model configuration");
        }
    }
}

std::vector<std::vector<HoiDetection>> align_predictions(const Dataset& ds,
                                                         const PredictionSet& preds, int top_k) {
    std::unordered_map<std::string, size_t> index;
    for (size_t i = 0; i < ds.images.size(); ++i) index[ds.images[i].id] = i;
    std::vector<std::vector<HoiDetection>> aligned(ds.images.size());
    std::vector<bool> seen(ds.images.size(), false);
    for (size_t i = 0; i < preds.image_ids.size(); ++i) {
        const auto it = index.find(preds.image_ids[i]);
        if (it == index.end()) {
            throw std::invalid_argument("predictions reference unknown image '" +
                                        preds.image_ids[i] + "'");
        }
        if (seen[it->second]) {
            throw std::invalid_argument("duplicate predictions for image '" + preds.image_ids[i] +
                                        "'");
        }
        seen[it->second] = true;
        aligned[it->second] = top_k_select(preds.detections[i], top_k);
    }
    return aligned;
}

std::vector<std::vector<GtInstance>> dataset_gts(const Dataset& ds) {
    std::vector<std::vector<GtInstance>> gts;
    for (const ImageRecord& img : ds.images) gts.push_back(img.gts);
    return gts;
}

int run_gen_synth(const SynthConfig& synth, const std::string& out_dir) {
    const SynthDataset ds = generate_synthetic(synth);
    write_dataset(out_dir, dataset_from_synth(ds));
    std::cout << "wrote " << ds.images.size() << " images, " << ds.n_obj_classes
              << " object classes, " << ds.n_act_classes << " action classes to " << out_dir
              << "\n";
    return 0;
}

int run_train_toy(const std::string& data_dir, const std::string& config_spec,
                  std::uint64_t seed, bool seed_set, int steps, double lr, double weight_decay,
                  const std::string& ckpt_out, const std::string& log_out) {
    const Dataset ds = read_dataset(data_dir);
    ModelConfig cfg = config_for_dataset(resolve_config(config_spec), ds);
    if (seed_set) cfg.seed = seed;

    TrainConfig tcfg;
    tcfg.steps = steps;
    tcfg.optim.lr = lr;
    tcfg.optim.weight_decay = weight_decay;

    const std::vector<Tensor> images = dataset_images(ds, cfg);
    const TrainResult result = train(images, dataset_gts(ds), cfg, tcfg);

    write_checkpoint(ckpt_out, result.params);
    if (!log_out.empty()) {
        std::string csv = "step,box,giou,object_class,action,total\n";
        for (const StepLog& row : result.log) {
            csv += std::to_string(row.step) + "," + format_real(row.loss.box) + "," +
                   format_real(row.loss.giou) + "," + format_real(row.loss.obj_class) + "," +
                   format_real(row.loss.action) + "," + format_real(row.loss.total) + "\n";
        }
        write_text_file(log_out, csv);
    }
    if (!result.log.empty()) {
        std::cout << "initial loss " << result.log.front().loss.total << ", final loss "
                  << result.log.back().loss.total << " after " << result.log.size() << " steps\n";
    }
    std::cout << "wrote checkpoint to " << ckpt_out << "\n";
    return 0;
}

int run_predict(const std::string& data_dir, const std::string& ckpt_path,
                const std::string& config_spec, int top_k, double threshold,
                const std::string& out_path, const std::string& raw_path) {
    const Dataset ds = read_dataset(data_dir);
    const ModelConfig cfg = config_for_dataset(resolve_config(config_spec), ds);
    const ParamSet params = read_checkpoint(ckpt_path);
    check_params_match(params, cfg);

    EvalConfig ecfg;
    ecfg.top_k = top_k;
    ecfg.score_threshold = threshold;
    ecfg.validate();

    const std::vector<Tensor> images = dataset_images(ds, cfg);
    PredictionSet preds;
    QuerySet raw;
    raw.n_obj = cfg.n_obj_classes;
    raw.n_act = cfg.n_act_classes;
    for (size_t i = 0; i < images.size(); ++i) {
        const std::vector<std::vector<Prediction>> layers = forward(images[i], params, cfg);
        preds.image_ids.push_back(ds.images[i].id);
        preds.detections.push_back(top_k_select(decode(layers.back(), ecfg), top_k));
        if (!raw_path.empty()) {
            raw.image_ids.push_back(ds.images[i].id);
            raw.predictions.push_back(layers.back());
        }
    }
    write_predictions(out_path, preds);
    if (!raw_path.empty()) write_queries(raw_path, raw);
    std::cout << "wrote detections for " << preds.image_ids.size() << " images to " << out_path
              << "\n";
    return 0;
}

/// Pairs each queries-file image with its dataset ground truths.
std::vector<std::pair<size_t, size_t>> align_queries(const Dataset& ds, const QuerySet& queries,
                                                     const std::string& only_image) {
    if (queries.n_obj != ds.header.n_obj || queries.n_act != ds.header.n_act) {
        throw std::invalid_argument("queries file class counts do not match the dataset");
    }
    std::unordered_map<std::string, size_t> index;
    for (size_t i = 0; i < ds.images.size(); ++i) index[ds.images[i].id] = i;
    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t q = 0; q < queries.image_ids.size(); ++q) {
        if (!only_image.empty() && queries.image_ids[q] != only_image) continue;
        const auto it = index.find(queries.image_ids[q]);
        if (it == index.end()) {
            throw std::invalid_argument("queries reference unknown image '" + queries.image_ids[q] +
                                        "'");
        }
        pairs.push_back({q, it->second});
    }
    if (pairs.empty()) {
        throw std::invalid_argument(only_image.empty() ? "queries file lists no images"
                                                       : "image '" + only_image +
                                                             "' not found in the queries file");
    }
    return pairs;
}

int run_match(const std::string& data_dir, const std::string& queries_path,
              const std::string& only_image, const CostWeights& weights) {
    const Dataset ds = read_dataset(data_dir);
    const QuerySet queries = read_queries(queries_path);
    for (const auto& [qi, di] : align_queries(ds, queries, only_image)) {
        const std::vector<GtInstance>& gts = ds.images[di].gts;
        const std::vector<Prediction>& preds = queries.predictions[qi];
        const auto cost = build_cost_matrix(gts, preds, weights);
        std::cout << "image " << ds.images[di].id << " (" << gts.size() << " ground truths, "
                  << preds.size() << " queries)\n";
        for (size_t r = 0; r < cost.size(); ++r) {
            std::cout << "cost " << r << (r < gts.size() ? " (real)   " : " (padding)");
            for (const double v : cost[r]) std::cout << " " << v;
            std::cout << "\n";
        }
        const Assignment assignment = match(gts, preds, weights);
        for (size_t s = 0; s < assignment.gt_to_pred.size(); ++s) {
            std::cout << "slot " << s << (assignment.is_padded(static_cast<int>(s)) ? " (padding)" : " (real)   ")
                      << " -> query " << assignment.gt_to_pred[s] << "\n";
        }
    }
    return 0;
}

int run_loss(const std::string& data_dir, const std::string& queries_path,
             const std::string& only_image, const CostWeights& cost_weights,
             const LossWeights& loss_weights) {
    const Dataset ds = read_dataset(data_dir);
    const QuerySet queries = read_queries(queries_path);
    LossBreakdown mean;
    size_t n = 0;
    for (const auto& [qi, di] : align_queries(ds, queries, only_image)) {
        const std::vector<GtInstance>& gts = ds.images[di].gts;
        const std::vector<Prediction>& preds = queries.predictions[qi];
        const Assignment assignment = match(gts, preds, cost_weights);
        const LossBreakdown b = total_loss(gts, preds, assignment, loss_weights);
        std::cout << "image " << ds.images[di].id << ": box " << b.box << " giou " << b.giou
                  << " object-class " << b.obj_class << " action " << b.action << " total "
                  << b.total << "\n";
        mean.box += b.box;
        mean.giou += b.giou;
        mean.obj_class += b.obj_class;
        mean.action += b.action;
        mean.total += b.total;
        ++n;
    }
    const double inv = 1.0 / static_cast<double>(n);
    std::cout << "mean: box " << mean.box * inv << " giou " << mean.giou * inv << " object-class "
              << mean.obj_class * inv << " action " << mean.action * inv << " total "
              << mean.total * inv << "\n";
    return 0;
}

int run_eval_hico(const std::string& data_dir, const std::string& pred_path,
                  const EvalConfig& ecfg, const std::string& report_path,
                  const std::string& json_path) {
    const Dataset ds = read_dataset(data_dir);
    const PredictionSet preds = read_predictions(pred_path);
    const auto detections = align_predictions(ds, preds, ecfg.top_k);
    const HicoReport report = eval_hico(detections, dataset_gts(ds), ds.header.train_counts,
                                        ds.header.n_obj, ds.header.n_act, ecfg);
    const std::string text = format_hico_report(report);
    if (!report_path.empty()) write_text_file(report_path, text);
    if (!json_path.empty()) write_text_file(json_path, hico_report_json(report));
    std::cout << "map default full " << report.default_full << " rare " << report.default_rare
              << " non-rare " << report.default_non_rare << "\n";
    std::cout << "map known-object full " << report.known_object_full << " rare "
              << report.known_object_rare << " non-rare " << report.known_object_non_rare << "\n";
    return 0;
}

int run_eval_vcoco(const std::string& data_dir, const std::string& pred_path,
                   const EvalConfig& ecfg, const std::string& report_path,
                   const std::string& json_path) {
    const Dataset ds = read_dataset(data_dir);
    const PredictionSet preds = read_predictions(pred_path);
    const auto detections = align_predictions(ds, preds, ecfg.top_k);
    const VcocoReport report = eval_vcoco(detections, dataset_gts(ds), ds.header.n_act, ecfg);
    const std::string text = format_vcoco_report(report);
    if (!report_path.empty()) write_text_file(report_path, text);
    if (!json_path.empty()) write_text_file(json_path, vcoco_report_json(report));
    std::cout << "map scenario1 " << report.scenario1_map << " scenario2 " << report.scenario2_map
              << "\n";
    return 0;
}

int run_bin_analysis(const std::string& data_dir, const std::string& pred_path,
                     const std::string& mode, double bin_width, const EvalConfig& ecfg,
                     const std::string& out_path) {
    const Dataset ds = read_dataset(data_dir);
    const PredictionSet preds = read_predictions(pred_path);
    const auto detections = align_predictions(ds, preds, ecfg.top_k);
    const BinMode bin_mode = mode == "area" ? BinMode::area : BinMode::distance;
    const auto bins = binned_ap_analysis(detections, dataset_gts(ds), bin_mode, bin_width,
                                         ds.header.n_obj, ds.header.n_act, ecfg);
    const std::string csv = format_bin_csv(bins);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        write_text_file(out_path, csv);
        std::cout << "wrote " << bins.size() << " bins to " << out_path << "\n";
    }
    return 0;
}

int run_gradcheck(const std::string& config_spec, double tol, int instances, std::uint64_t seed,
                  double step) {
    if (tol <= 0.0) throw std::invalid_argument("gradcheck: tolerance must be > 0");
    if (instances < 1) throw std::invalid_argument("gradcheck: need >= 1 instances");
    const ModelConfig cfg = resolve_config(config_spec);
    const ParamSet params = init_params(cfg);
    Rng rng(seed);

    size_t failures = 0;
    size_t checked = 0;
    double max_rel = 0.0;
    for (int inst = 0; inst < instances; ++inst) {
        Tensor image({3, cfg.image_h, cfg.image_w});
        for (double& x : image.data) x = rng.uniform();
        const int n_gts = 1 + rng.uniform_int(2);
        std::vector<GtInstance> gts;
        for (int g = 0; g < n_gts; ++g) {
            GtInstance gt;
            gt.human_box = {rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.1, 0.3),
                            rng.uniform(0.1, 0.3)};
            gt.object_box = {rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.1, 0.3),
                             rng.uniform(0.1, 0.3)};
            gt.object_class = rng.uniform_int(cfg.n_obj_classes);
            gt.actions.resize(static_cast<size_t>(cfg.n_act_classes));
            for (double& a : gt.actions) a = rng.uniform() < 0.5 ? 1.0 : 0.0;
            gts.push_back(std::move(gt));
        }

        const LossGradients lg =
            loss_gradients(image, gts, params, cfg, CostWeights{}, LossWeights{});
        ParamSet probe = params;
        for (size_t i = 0; i < params.values.size(); ++i) {
            for (size_t j = 0; j < params.values[i].numel(); ++j) {
                const double x0 = params.values[i].data[j];
                probe.values[i].data[j] = x0 + step;
                const double hi =
                    frozen_loss(image, gts, probe, cfg, lg.assignments, LossWeights{});
                probe.values[i].data[j] = x0 - step;
                const double lo =
                    frozen_loss(image, gts, probe, cfg, lg.assignments, LossWeights{});
                probe.values[i].data[j] = x0;
                const double fd = (hi - lo) / (2.0 * step);
                const double analytic = lg.grads[i].data[j];
                const double diff = std::abs(analytic - fd);
                const double scale = std::max(std::abs(analytic), std::abs(fd));
                ++checked;
                if (diff <= 1e-6) continue;
                const double rel = diff / scale;
                max_rel = std::max(max_rel, rel);
                if (rel > tol) {
                    ++failures;
                    std::cout << "FAIL instance " << inst << " " << params.names[i] << "[" << j
                              << "] analytic " << analytic << " fd " << fd << " rel " << rel
                              << "\n";
                }
            }
        }
    }
    std::cout << "checked " << checked << " parameter scalars over " << instances
              << " instances, max relative error " << max_rel << "\n";
    if (failures > 0) {
        throw std::runtime_error("gradient check failed on " + std::to_string(failures) +
                                 " scalars");
    }
    std::cout << "gradient check passed\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"human-object interaction detection toolkit"};
    app.require_subcommand(1);
    int exit_code = 0;

    // gen-synth
    auto* gen = app.add_subcommand("gen-synth", "generate a synthetic rectangle-scene dataset");
    SynthConfig synth;
    std::string gen_out;
    int gen_image_size = 64;
    gen->add_option("--seed", synth.seed, "generator seed");
    gen->add_option("--images", synth.n_images, "number of images");
    gen->add_option("--objects", synth.n_obj_classes, "object classes");
    gen->add_option("--actions", synth.n_act_classes, "action classes (1-3 spatial relations)");
    gen->add_option("--image-size", gen_image_size, "square image size in pixels");
    gen->add_option("--min-instances", synth.min_instances, "minimum instances per image");
    gen->add_option("--max-instances", synth.max_instances, "maximum instances per image");
    gen->add_option("--objectless-fraction", synth.objectless_fraction,
                    "fraction of instances without an object box");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->callback([&]() {
        synth.image_h = gen_image_size;
        synth.image_w = gen_image_size;
        exit_code = run_gen_synth(synth, gen_out);
    });

    // train-toy
    auto* tr = app.add_subcommand("train-toy", "train the toy model on a dataset");
    std::string tr_data, tr_config = "desk", tr_out, tr_log;
    std::uint64_t tr_seed = 0;
    int tr_steps = 500;
    double tr_lr = 1e-4, tr_wd = 1e-4;
    tr->add_option("--data", tr_data, "dataset directory")->required();
    tr->add_option("--config", tr_config, "model profile or JSON config file");
    auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "initialization seed override");
    tr->add_option("--steps", tr_steps, "training steps");
    tr->add_option("--lr", tr_lr, "step size");
    tr->add_option("--weight-decay", tr_wd, "decoupled weight decay");
    tr->add_option("--out", tr_out, "checkpoint output path")->required();
    tr->add_option("--log", tr_log, "per-step loss CSV output path");
    tr->callback([&]() {
        exit_code = run_train_toy(tr_data, tr_config, tr_seed, tr_seed_opt->count() > 0, tr_steps,
                                  tr_lr, tr_wd, tr_out, tr_log);
    });

    // predict
    auto* pr = app.add_subcommand("predict", "run the model and write scored detections");
    std::string pr_data, pr_ckpt, pr_config = "desk", pr_out, pr_raw;
    int pr_topk = 100;
    double pr_threshold = 0.0;
    pr->add_option("--data", pr_data, "dataset directory")->required();
    pr->add_option("--ckpt", pr_ckpt, "checkpoint path")->required();
    pr->add_option("--config", pr_config, "model profile or JSON config file");
    pr->add_option("--top-k", pr_topk, "detections kept per image");
    pr->add_option("--threshold", pr_threshold, "minimum detection score");
    pr->add_option("--out", pr_out, "predictions output path")->required();
    pr->add_option("--raw", pr_raw, "also write raw per-query outputs here");
    pr->callback([&]() {
        exit_code = run_predict(pr_data, pr_ckpt, pr_config, pr_topk, pr_threshold, pr_out, pr_raw);
    });

    // match
    auto* ma = app.add_subcommand("match", "dump the matching cost matrix and assignment");
    std::string ma_data, ma_queries, ma_image;
    CostWeights ma_weights;
    ma->add_option("--data", ma_data, "dataset directory")->required();
    ma->add_option("--queries", ma_queries, "raw query outputs file")->required();
    ma->add_option("--image", ma_image, "restrict to one image id");
    ma->add_option("--eta-b", ma_weights.eta_b, "box cost weight");
    ma->add_option("--eta-u", ma_weights.eta_u, "IoU cost weight");
    ma->add_option("--eta-c", ma_weights.eta_c, "class cost weight");
    ma->add_option("--eta-a", ma_weights.eta_a, "action cost weight");
    ma->callback([&]() { exit_code = run_match(ma_data, ma_queries, ma_image, ma_weights); });

    // loss
    auto* lo = app.add_subcommand("loss", "print loss breakdowns for query outputs");
    std::string lo_data, lo_queries, lo_image;
    CostWeights lo_cost;
    LossWeights lo_weights;
    lo->add_option("--data", lo_data, "dataset directory")->required();
    lo->add_option("--queries", lo_queries, "raw query outputs file")->required();
    lo->add_option("--image", lo_image, "restrict to one image id");
    lo->add_option("--lambda-b", lo_weights.lambda_b, "box loss weight");
    lo->add_option("--lambda-u", lo_weights.lambda_u, "IoU loss weight");
    lo->add_option("--lambda-c", lo_weights.lambda_c, "class loss weight");
    lo->add_option("--lambda-a", lo_weights.lambda_a, "action loss weight");
    lo->callback([&]() { exit_code = run_loss(lo_data, lo_queries, lo_image, lo_cost, lo_weights); });

    // eval-hico
    auto* eh = app.add_subcommand("eval-hico", "evaluate detections under the HICO protocols");
    std::string eh_data, eh_pred, eh_report, eh_json;
    EvalConfig eh_cfg;
    eh->add_option("--data", eh_data, "dataset directory")->required();
    eh->add_option("--pred", eh_pred, "predictions file")->required();
    eh->add_option("--iou", eh_cfg.iou_threshold, "IoU threshold");
    eh->add_option("--top-k", eh_cfg.top_k, "detections kept per image");
    eh->add_option("--rare-threshold", eh_cfg.rare_threshold,
                   "training instances below this make a class rare");
    eh->add_option("--report", eh_report, "text report output path");
    eh->add_option("--json", eh_json, "JSON report output path");
    eh->callback([&]() { exit_code = run_eval_hico(eh_data, eh_pred, eh_cfg, eh_report, eh_json); });

    // eval-vcoco
    auto* ev = app.add_subcommand("eval-vcoco", "evaluate detections under both V-COCO scenarios");
    std::string ev_data, ev_pred, ev_report, ev_json;
    EvalConfig ev_cfg;
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--pred", ev_pred, "predictions file")->required();
    ev->add_option("--iou", ev_cfg.iou_threshold, "IoU threshold");
    ev->add_option("--top-k", ev_cfg.top_k, "detections kept per image");
    ev->add_option("--exclude-action", ev_cfg.excluded_actions,
                   "action id to exclude from the report (repeatable)");
    ev->add_option("--report", ev_report, "text report output path");
    ev->add_option("--json", ev_json, "JSON report output path");
    ev->callback([&]() { exit_code = run_eval_vcoco(ev_data, ev_pred, ev_cfg, ev_report, ev_json); });

    // bin-analysis
    auto* ba = app.add_subcommand("bin-analysis", "per-bin AP by pair distance or box area");
    std::string ba_data, ba_pred, ba_mode = "distance", ba_out;
    double ba_width = 0.1;
    EvalConfig ba_cfg;
    ba->add_option("--data", ba_data, "dataset directory")->required();
    ba->add_option("--pred", ba_pred, "predictions file")->required();
    ba->add_option("--mode", ba_mode, "binning mode")
        ->check(CLI::IsMember({"distance", "area"}));
    ba->add_option("--bin-width", ba_width, "bin width");
    ba->add_option("--min-instances", ba_cfg.min_bin_instances,
                   "omit bins with fewer ground truths");
    ba->add_option("--iou", ba_cfg.iou_threshold, "IoU threshold");
    ba->add_option("--top-k", ba_cfg.top_k, "detections kept per image");
    ba->add_option("--out", ba_out, "CSV output path (stdout when omitted)");
    ba->callback(
        [&]() { exit_code = run_bin_analysis(ba_data, ba_pred, ba_mode, ba_width, ba_cfg, ba_out); });

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck",
                                  "compare analytic gradients against finite differences");
    std::string gc_config = "tiny";
    // The loss is piecewise smooth (relu, min/max, clamp); 1e-7 keeps the probe
    // inside one smooth piece while staying well above cancellation noise.
    double gc_tol = 1e-3, gc_step = 1e-7;
    int gc_instances = 10;
    std::uint64_t gc_seed = 5;
    gc->add_option("--config", gc_config, "model profile or JSON config file");
    gc->add_option("--tol", gc_tol, "relative tolerance");
    gc->add_option("--instances", gc_instances, "random instances to test");
    gc->add_option("--seed", gc_seed, "instance generator seed");
    gc->add_option("--step", gc_step, "finite-difference step");
    gc->callback(
        [&]() { exit_code = run_gradcheck(gc_config, gc_tol, gc_instances, gc_seed, gc_step); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return exit_code;
}
