#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "simicl/checkpoint.hpp"
#include "simicl/composer.hpp"
#include "simicl/dataset.hpp"
#include "simicl/evaluation.hpp"
#include "simicl/masking.hpp"
#include "simicl/png_io.hpp"
#include "simicl/training.hpp"

namespace {

using namespace simicl;

namespace fs = std::filesystem;

struct ModelFlags {
    int depth = 12;
    int dim = 768;
    int heads = 12;
    float mlp_ratio = 4.0f;

    ModelConfig config() const {
        ModelConfig cfg;
        cfg.depth = depth;
        cfg.embed_dim = dim;
        cfg.n_heads = heads;
        cfg.mlp_ratio = mlp_ratio;
        return cfg;
    }
};

void add_model_flags(CLI::App* sub, ModelFlags& flags) {
    sub->add_option("--depth", flags.depth, "Encoder layer count")->capture_default_str();
    sub->add_option("--dim", flags.dim, "Token embedding dimension")->capture_default_str();
    sub->add_option("--heads", flags.heads, "Attention head count")->capture_default_str();
    sub->add_option("--mlp-ratio", flags.mlp_ratio, "MLP hidden width ratio")->capture_default_str();
}

void write_snapshot(CLI::App* sub, const std::string& out_dir) {
    if (out_dir.empty()) {
        return;
    }
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "config.resolved", std::ios::trunc);
    out << sub->config_to_str(true, false);
}

std::string manifest_root(const std::string& manifest_path) {
    const fs::path parent = fs::path(manifest_path).parent_path();
    return parent.empty() ? std::string(".") : parent.string();
}

GridF composite_to_grid(const Composite& composite) { return composite.pixels; }

void dump_gray(const std::string& path, const GridF& img) {
    write_png_gray8(path, quantize_u8(img));
}

std::vector<SamplePair> training_pairs(const Manifest& manifest, uint64_t seed,
                                       double subset_fraction) {
    std::vector<SampleRecord> train = records_of_split(manifest, Split::Train);
    train = subset_train_records(train, subset_fraction, seed);
    Manifest filtered = manifest;
    filtered.records.clear();
    for (const auto& rec : manifest.records) {
        if (rec.split != Split::Train) {
            filtered.records.push_back(rec);
        }
    }
    filtered.records.insert(filtered.records.end(), train.begin(), train.end());
    std::sort(filtered.records.begin(), filtered.records.end(),
              [](const SampleRecord& a, const SampleRecord& b) { return a.sample_id < b.sample_id; });
    auto [support_pool, query_pool] = split_pools(filtered, seed);
    return pair_training(support_pool, query_pool, seed);
}

int run_cli(int argc, char** argv) {
    CLI::App app{"SimICL: segmentation as masked-grid inpainting", "simicl"};
    app.require_subcommand(1);

    // synth ------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic dataset");
    std::string synth_out;
    uint64_t synth_seed = 1;
    int n_train = 64, n_val = 16, n_test = 16, synth_side = 112;
    synth->add_option("--out", synth_out, "Output dataset directory")->required();
    synth->add_option("--train", n_train, "Train sample count")->capture_default_str();
    synth->add_option("--val", n_val, "Validation sample count")->capture_default_str();
    synth->add_option("--test", n_test, "Test sample count")->capture_default_str();
    synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
    synth->add_option("--side", synth_side, "Image side in pixels")->capture_default_str();
    synth->set_config("--config");

    // pair -------------------------------------------------------------
    auto* pair = app.add_subcommand("pair", "Build support/query training pairs and eval pairs");
    std::string pair_data, pair_out;
    uint64_t pair_seed = 1;
    double pair_subset = 1.0;
    pair->add_option("--data", pair_data, "Path to manifest.jsonl")->required();
    pair->add_option("--out", pair_out, "Output directory")->required();
    pair->add_option("--seed", pair_seed, "Pairing seed")->capture_default_str();
    pair->add_option("--subset-fraction", pair_subset, "Per-subject fraction of train labels used")
        ->capture_default_str();
    pair->set_config("--config");

    // train ------------------------------------------------------------
    auto* train = app.add_subcommand("train", "Train a model (SimICL or single-image mode)");
    std::string train_data, train_out, train_pairs_file, train_mode = "simicl", train_loss = "masked";
    ModelFlags train_model;
    train_model.depth = 4;
    train_model.dim = 64;
    train_model.heads = 4;
    TrainConfig tc;
    tc.batch_size = 8;
    double train_subset = 1.0;
    train->add_option("--data", train_data, "Path to manifest.jsonl")->required();
    train->add_option("--out", train_out, "Output directory")->required();
    train->add_option("--pairs", train_pairs_file, "Pair file (defaults to deterministic pairing)");
    train->add_option("--mode", train_mode, "simicl | single")->capture_default_str();
    train->add_option("--mask-ratio", tc.mask_ratio, "Training mask ratio")->capture_default_str();
    train->add_option("--loss", train_loss, "masked | all | segquads | target")->capture_default_str();
    train->add_option("--epochs", tc.epochs, "Epoch budget")->capture_default_str();
    train->add_option("--max-steps", tc.max_steps, "Step cap (0 = epochs only)")->capture_default_str();
    train->add_option("--stop-loss", tc.stop_loss, "Early-stop loss threshold (0 = off)")
        ->capture_default_str();
    train->add_option("--batch-size", tc.batch_size, "Batch size")->capture_default_str();
    train->add_option("--lr", tc.learning_rate, "AdamW learning rate")->capture_default_str();
    train->add_option("--weight-decay", tc.weight_decay, "AdamW decoupled weight decay")
        ->capture_default_str();
    train->add_option("--seed", tc.seed, "Run seed")->capture_default_str();
    train->add_option("--checkpoint-every", tc.checkpoint_every, "Steps between checkpoints")
        ->capture_default_str();
    train->add_option("--subset-fraction", train_subset, "Per-subject fraction of train labels used")
        ->capture_default_str();
    train->add_option("--target-mask-prob", tc.target_mask_prob,
                      "Fraction of samples masked over the whole target quadrant")
        ->capture_default_str();
    add_model_flags(train, train_model);
    train->set_config("--config");

    // eval ---------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with Dice/IoU");
    std::string eval_ckpt, eval_data, eval_out, eval_pairs_file, eval_mode = "simicl";
    double eval_threshold = 0.5;
    uint64_t eval_seed = 1;
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint path")->required();
    eval->add_option("--data", eval_data, "Path to manifest.jsonl")->required();
    eval->add_option("--out", eval_out, "Output directory")->required();
    eval->add_option("--pairs", eval_pairs_file, "Eval pair file (defaults to pair_eval)");
    eval->add_option("--mode", eval_mode, "simicl | single")->capture_default_str();
    eval->add_option("--threshold", eval_threshold, "Binarization threshold")->capture_default_str();
    eval->add_option("--seed", eval_seed, "Eval pairing seed")->capture_default_str();
    eval->set_config("--config");

    // predict ------------------------------------------------------------
    auto* predict_cmd = app.add_subcommand("predict", "Predict one query from a support pair");
    std::string pr_ckpt, pr_support_img, pr_support_mask, pr_query_img, pr_query_mask, pr_out;
    double pr_threshold = 0.5;
    predict_cmd->add_option("--checkpoint", pr_ckpt, "Checkpoint path")->required();
    predict_cmd->add_option("--support-image", pr_support_img, "Support image path")->required();
    predict_cmd->add_option("--support-mask", pr_support_mask, "Support mask path")->required();
    predict_cmd->add_option("--query-image", pr_query_img, "Query image path")->required();
    predict_cmd->add_option("--query-mask", pr_query_mask, "Optional ground truth for a Dice printout");
    predict_cmd->add_option("--out", pr_out, "Output directory")->required();
    predict_cmd->add_option("--threshold", pr_threshold, "Binarization threshold")
        ->capture_default_str();
    predict_cmd->set_config("--config");

    // gradcheck ------------------------------------------------------------
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    ModelFlags gc_model;
    gc_model.depth = 2;
    gc_model.dim = 32;
    gc_model.heads = 4;
    uint64_t gc_seed = 1;
    int gc_coords = 50;
    double gc_tol = 1e-4;
    double gc_step = 1e-3;
    double gc_margin = 1e-2;
    std::string gc_out;
    add_model_flags(gradcheck, gc_model);
    gradcheck->add_option("--seed", gc_seed, "Probe seed")->capture_default_str();
    gradcheck->add_option("--coords", gc_coords, "Probed parameter coordinates")->capture_default_str();
    gradcheck->add_option("--tol", gc_tol, "Maximum acceptable relative error")->capture_default_str();
    gradcheck->add_option("--fd-step", gc_step, "Central-difference step")->capture_default_str();
    gradcheck->add_option("--kink-margin", gc_margin, "L1 kink exclusion margin")->capture_default_str();
    gradcheck->add_option("--out", gc_out, "Optional output directory for the snapshot");
    gradcheck->set_config("--config");

    // sweep ------------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "Mask-ratio x loss-variant grid, DC per cell");
    std::string sweep_data, sweep_out, sweep_ratios = "0,0.3,0.45,0.6,0.75";
    std::string sweep_losses = "masked,all,segquads,target";
    ModelFlags sweep_model;
    sweep_model.depth = 2;
    sweep_model.dim = 32;
    sweep_model.heads = 4;
    int64_t sweep_steps = 200;
    int sweep_batch = 8;
    uint64_t sweep_seed = 1;
    double sweep_threshold = 0.5;
    sweep->add_option("--data", sweep_data, "Path to manifest.jsonl")->required();
    sweep->add_option("--out", sweep_out, "Output directory")->required();
    sweep->add_option("--ratios", sweep_ratios, "Comma-separated mask ratios")->capture_default_str();
    sweep->add_option("--losses", sweep_losses, "Comma-separated loss variants")->capture_default_str();
    sweep->add_option("--steps", sweep_steps, "Training steps per cell")->capture_default_str();
    sweep->add_option("--batch-size", sweep_batch, "Batch size")->capture_default_str();
    sweep->add_option("--seed", sweep_seed, "Run seed")->capture_default_str();
    sweep->add_option("--threshold", sweep_threshold, "Binarization threshold")->capture_default_str();
    add_model_flags(sweep, sweep_model);
    sweep->set_config("--config");

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        fs::create_directories(synth_out);
        write_snapshot(synth, synth_out);
        const Manifest manifest =
            build_dataset(synth_out, SplitCounts{n_train, n_val, n_test}, synth_seed, synth_side);
        std::cout << "wrote " << manifest.records.size() << " records to " << synth_out << "\n";
        return 0;
    }

    if (pair->parsed()) {
        fs::create_directories(pair_out);
        write_snapshot(pair, pair_out);
        const Manifest manifest = read_manifest(pair_data);
        validate_manifest(manifest);
        const auto pairs = training_pairs(manifest, pair_seed, pair_subset);
        write_pairs((fs::path(pair_out) / "train_pairs.jsonl").string(), pairs, pair_seed, "train");
        const auto eval_pairs = pair_eval(records_of_split(manifest, Split::Test),
                                          records_of_split(manifest, Split::Validation), pair_seed);
        write_pairs((fs::path(pair_out) / "eval_pairs.jsonl").string(), eval_pairs, pair_seed, "eval");
        std::cout << "wrote " << pairs.size() << " train pairs, " << eval_pairs.size()
                  << " eval pairs to " << pair_out << "\n";
        return 0;
    }

    if (train->parsed()) {
        tc.mode = train_mode == "single" ? TrainMode::SingleImage : TrainMode::SimICL;
        tc.loss_variant = loss_variant_from_name(train_loss);
        tc.out_dir = train_out;
        tc.validate(); // reject degenerate settings before touching data

        const Manifest manifest = read_manifest(train_data);
        validate_manifest(manifest);
        const std::string root = manifest_root(train_data);
        fs::create_directories(train_out);
        write_snapshot(train, train_out);

        TrainResult result;
        if (tc.mode == TrainMode::SimICL) {
            std::vector<SamplePair> pairs;
            if (!train_pairs_file.empty()) {
                pairs = read_pairs(train_pairs_file, manifest);
            } else {
                pairs = training_pairs(manifest, tc.seed, train_subset);
            }
            write_pairs((fs::path(train_out) / "train_pairs.jsonl").string(), pairs, tc.seed, "train");
            result = train_run(train_model.config(), tc, pairs, root);
        } else {
            std::vector<SampleRecord> records = records_of_split(manifest, Split::Train);
            records = subset_train_records(records, train_subset, tc.seed);
            result = single_image_run(train_model.config(), tc, records, root);
        }
        std::cout << "final_loss=" << result.final_loss << " steps=" << result.steps_run << "\n";
        return 0;
    }

    if (eval->parsed()) {
        const Checkpoint ckpt = load_checkpoint(eval_ckpt);
        const uint64_t ckpt_hash = file_fnv1a(eval_ckpt);
        const Manifest manifest = read_manifest(eval_data);
        validate_manifest(manifest);
        const std::string root = manifest_root(eval_data);
        fs::create_directories(eval_out);
        write_snapshot(eval, eval_out);

        MetricsReport report;
        if (eval_mode == "single") {
            report = evaluate_single_run(ckpt.params, records_of_split(manifest, Split::Test), root,
                                         eval_threshold, ckpt_hash, eval_seed);
        } else {
            std::vector<SamplePair> pairs;
            if (!eval_pairs_file.empty()) {
                pairs = read_pairs(eval_pairs_file, manifest);
            } else {
                pairs = pair_eval(records_of_split(manifest, Split::Test),
                                  records_of_split(manifest, Split::Validation), eval_seed);
            }
            report = evaluate_run(ckpt.params, pairs, root, eval_threshold, ckpt_hash, eval_seed);
        }
        write_report_json((fs::path(eval_out) / "report.json").string(), report);
        write_report_csv((fs::path(eval_out) / "report.csv").string(), report);
        std::printf("DC=%.4f IoU=%.4f\n", report.mean_dice, report.mean_iou);
        return 0;
    }

    if (predict_cmd->parsed()) {
        const Checkpoint ckpt = load_checkpoint(pr_ckpt);
        fs::create_directories(pr_out);
        write_snapshot(predict_cmd, pr_out);
        const GridF support_img = to_float(read_png_gray8(pr_support_img));
        const GridU8 support_mask = binarize_u8(read_png_gray8(pr_support_mask));
        const GridF query_img = to_float(read_png_gray8(pr_query_img));

        const Composite composite = compose_inference_composite(support_img, support_mask, query_img);
        dump_gray((fs::path(pr_out) / "composite.png").string(), composite_to_grid(composite));

        GridF recon = vit_forward<float>(ckpt.params, composite.pixels,
                                         inference_mask(ckpt.params.config.patch_grid()), nullptr);
        for (auto& v : recon.data) {
            v = std::clamp(v, 0.0f, 1.0f);
        }
        dump_gray((fs::path(pr_out) / "reconstruction.png").string(), recon);

        const BinaryMask pred = predict(ckpt.params, support_img, support_mask, query_img,
                                        static_cast<float>(pr_threshold));
        GridU8 pred255(pred.rows, pred.cols);
        for (size_t i = 0; i < pred.data.size(); ++i) {
            pred255.data[i] = pred.data[i] ? 255 : 0;
        }
        write_png_gray8((fs::path(pr_out) / "prediction.png").string(), pred255);

        if (!pr_query_mask.empty()) {
            GridU8 gt = binarize_u8(read_png_gray8(pr_query_mask));
            if (gt.rows != pred.rows || gt.cols != pred.cols) {
                const GridF resized = resize_mask_image(render_mask_image(gt), pred.rows, pred.cols);
                gt = GridU8(pred.rows, pred.cols);
                for (size_t i = 0; i < resized.data.size(); ++i) {
                    gt.data[i] = resized.data[i] >= 0.5f ? 1 : 0;
                }
            }
            std::printf("DC=%.4f IoU=%.4f\n", dice_coefficient(pred, gt), jaccard_index(pred, gt));
        }
        std::cout << "wrote composite.png, reconstruction.png, prediction.png to " << pr_out << "\n";
        return 0;
    }

    if (gradcheck->parsed()) {
        if (!gc_out.empty()) {
            fs::create_directories(gc_out);
            write_snapshot(gradcheck, gc_out);
        }
        ModelConfig cfg = gc_model.config();
        const GradCheckReport report = finite_difference_check(cfg, gc_seed, gc_coords, gc_step, gc_margin);
        std::printf("max_relative_error=%.3e probed=%d excluded_pixels=%d\n", report.max_rel_error,
                    report.n_probed, report.n_excluded_pixels);
        return report.max_rel_error < gc_tol ? 0 : 1;
    }

    if (sweep->parsed()) {
        const Manifest manifest = read_manifest(sweep_data);
        validate_manifest(manifest);
        const std::string root = manifest_root(sweep_data);
        fs::create_directories(sweep_out);
        write_snapshot(sweep, sweep_out);

        std::vector<float> ratios;
        for (const auto& tok : CLI::detail::split(sweep_ratios, ',')) {
            ratios.push_back(std::stof(tok));
        }
        std::vector<LossRegionVariant> variants;
        std::vector<std::string> variant_names = CLI::detail::split(sweep_losses, ',');
        for (const auto& name : variant_names) {
            variants.push_back(loss_variant_from_name(name));
        }

        const auto pairs = training_pairs(manifest, sweep_seed, 1.0);
        const auto eval_pairs = pair_eval(records_of_split(manifest, Split::Test),
                                          records_of_split(manifest, Split::Validation), sweep_seed);

        std::ofstream csv(fs::path(sweep_out) / "sweep.csv", std::ios::trunc);
        csv << "mask_ratio";
        for (const auto& name : variant_names) {
            csv << "," << name;
        }
        csv << "\n";
        for (float ratio : ratios) {
            csv << ratio;
            for (size_t vi = 0; vi < variants.size(); ++vi) {
                if (ratio == 0.0f && variants[vi] == LossRegionVariant::MaskedAreas) {
                    csv << ",-"; // degenerate cell, mirrors the dash in the ablation grid
                    std::cout << "ratio=" << ratio << " loss=" << variant_names[vi] << " -> skipped\n";
                    continue;
                }
                TrainConfig cell;
                cell.mask_ratio = ratio;
                cell.loss_variant = variants[vi];
                cell.batch_size = sweep_batch;
                cell.epochs = 0;
                cell.max_steps = sweep_steps;
                cell.seed = sweep_seed;
                const TrainResult result = train_run(sweep_model.config(), cell, pairs, root);
                const MetricsReport report = evaluate_run(result.params, eval_pairs, root,
                                                          sweep_threshold, 0, sweep_seed);
                char cellbuf[32];
                std::snprintf(cellbuf, sizeof(cellbuf), "%.4f", report.mean_dice);
                csv << "," << cellbuf;
                std::cout << "ratio=" << ratio << " loss=" << variant_names[vi]
                          << " -> DC=" << cellbuf << "\n";
            }
            csv << "\n";
        }
        std::cout << "wrote " << (fs::path(sweep_out) / "sweep.csv").string() << "\n";
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        const bool degenerate =
            e.code() == ErrorCode::ConfigRejected || e.code() == ErrorCode::EmptyLossRegion;
        return degenerate ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
