// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any criterion fails.
//
// Run via ctest (test name "acceptance") or directly:
//   ./simicl_acceptance [--only N]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "simicl/composer.hpp"
#include "simicl/dataset.hpp"
#include "simicl/evaluation.hpp"
#include "simicl/rng.hpp"
#include "simicl/training.hpp"

using namespace simicl;

namespace {

namespace fs = std::filesystem;

struct Outcome {
    int id;
    bool pass;
    std::string detail;
    double seconds;
};

std::vector<Outcome> g_outcomes;

template <class Fn>
void run_criterion(int id, const std::string& title, const Fn& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome{id, false, "", 0.0};
    try {
        outcome = fn();
        outcome.id = id;
    } catch (const std::exception& e) {
        outcome.pass = false;
        outcome.detail = std::string("exception: ") + e.what();
    }
    outcome.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d: %s (%s) [%.1fs]\n", outcome.pass ? "PASS" : "FAIL", id,
                title.c_str(), outcome.detail.c_str(), outcome.seconds);
    std::fflush(stdout);
    g_outcomes.push_back(outcome);
}

ModelConfig toy_config(int depth, int dim, int heads) {
    ModelConfig cfg;
    cfg.depth = depth;
    cfg.embed_dim = dim;
    cfg.n_heads = heads;
    return cfg;
}

class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        path_ = fs::temp_directory_path() / ("simicl_acceptance_" + tag);
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// ---------------------------------------------------------------------------
// 1. Metric oracle equivalence
// ---------------------------------------------------------------------------
Outcome criterion_metrics() {
    Rng rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        BinaryMask a(112, 112), b(112, 112);
        const double da = rng.uniform_in(0.01, 0.5);
        const double db = rng.uniform_in(0.01, 0.5);
        for (auto& v : a.data) v = rng.uniform() < da ? 1 : 0;
        for (auto& v : b.data) v = rng.uniform() < db ? 1 : 0;

        // Independent double-loop pixel counting oracle.
        uint64_t inter = 0, pa = 0, pb = 0;
        for (int r = 0; r < 112; ++r) {
            for (int c = 0; c < 112; ++c) {
                const bool va = a.at(r, c) != 0;
                const bool vb = b.at(r, c) != 0;
                pa += va;
                pb += vb;
                inter += va && vb;
            }
        }

        const OverlapCounts counts = overlap_counts(a, b);
        if (counts.intersection != inter || counts.pred_count != pa || counts.gt_count != pb) {
            return {1, false, "count mismatch vs oracle at trial " + std::to_string(trial), 0};
        }
        const double dice = dice_coefficient(a, b);
        const double iou = jaccard_index(a, b);
        const double dice_oracle = 2.0 * double(inter) / double(pa + pb);
        const double iou_oracle = double(inter) / double(pa + pb - inter);
        if (dice != dice_oracle || iou != iou_oracle) {
            return {1, false, "metric value mismatch at trial " + std::to_string(trial), 0};
        }
        if (std::abs(iou - dice / (2.0 - dice)) > 1e-9) {
            return {1, false, "iou != dice/(2-dice) at trial " + std::to_string(trial), 0};
        }
    }
    return {1, true, "100 random mask pairs bit-equal with the counting oracle", 0};
}

// ---------------------------------------------------------------------------
// 2. Mask-count exactness
// ---------------------------------------------------------------------------
Outcome criterion_mask_counts() {
    const PatchGrid grid;
    const float ratios[] = {0.0f, 0.3f, 0.45f, 0.6f, 0.75f};
    const int expected[] = {0, 59, 88, 118, 147};
    Rng rng(202);
    for (int draw = 0; draw < 10000; ++draw) {
        const size_t pick = rng.below(5);
        const PatchMask mask = sample_mask(grid, ratios[pick], rng.next_u64());
        if (mask.count() != expected[pick]) {
            return {2, false,
                    "count " + std::to_string(mask.count()) + " for ratio " +
                        std::to_string(ratios[pick]),
                    0};
        }
        if (mask.count() != static_cast<int>(std::lround(ratios[pick] * 196.0))) {
            return {2, false, "round rule violated", 0};
        }
    }
    return {2, true, "10000 draws, count == round(ratio*196) for all paper ratios", 0};
}

// ---------------------------------------------------------------------------
// 3. Gradient correctness
// ---------------------------------------------------------------------------
Outcome criterion_gradients() {
    const GradCheckReport report = finite_difference_check(toy_config(2, 32, 4), 7, 50);
    char detail[128];
    std::snprintf(detail, sizeof(detail), "max relative error %.3e over %d coordinates",
                  report.max_rel_error, report.n_probed);
    return {3, report.max_rel_error < 1e-4, detail, 0};
}

// ---------------------------------------------------------------------------
// 4. Masked-content independence
// ---------------------------------------------------------------------------
Outcome criterion_masked_independence() {
    const ModelConfig cfg = toy_config(2, 32, 4);
    const ModelParams<float> params = init_params<float>(cfg, 404);
    const PatchGrid grid = cfg.patch_grid();
    Rng rng(405);
    for (int trial = 0; trial < 20; ++trial) {
        GridF img(224, 224);
        for (auto& v : img.data) {
            v = static_cast<float>(rng.uniform());
        }
        const PatchMask mask = sample_mask(grid, 0.45f + 0.3f * static_cast<float>(rng.uniform()),
                                           rng.next_u64());
        const GridF base = vit_forward<float>(params, img, mask, nullptr);

        GridF perturbed = img;
        for (int p = 0; p < grid.n_patches(); ++p) {
            if (!mask.is_masked(p)) {
                continue;
            }
            const int pr = (p / grid.cols()) * grid.patch_side;
            const int pc = (p % grid.cols()) * grid.patch_side;
            for (int r = 0; r < grid.patch_side; ++r) {
                for (int c = 0; c < grid.patch_side; ++c) {
                    perturbed.at(pr + r, pc + c) = static_cast<float>(rng.uniform());
                }
            }
        }
        const GridF out = vit_forward<float>(params, perturbed, mask, nullptr);
        for (size_t i = 0; i < out.data.size(); ++i) {
            if (out.data[i] != base.data[i]) {
                return {4, false, "output changed at trial " + std::to_string(trial), 0};
            }
        }
    }
    return {4, true, "20 random cases, output change exactly 0", 0};
}

// ---------------------------------------------------------------------------
// 5. Degenerate-config refusal
// ---------------------------------------------------------------------------
Outcome criterion_degenerate_config() {
    ScratchDir dir("criterion5");
    build_dataset(dir.str(), SplitCounts{4, 2, 2}, 505);
    const Manifest manifest = read_manifest(dir.file("manifest.jsonl"));
    const auto [support, query] = split_pools(manifest, 505);
    const auto pairs = pair_training(support, query, 505);
    const ModelConfig model = toy_config(1, 16, 4);

    const float ratios[] = {0.0f, 0.3f, 0.45f, 0.6f, 0.75f};
    const LossRegionVariant variants[] = {
        LossRegionVariant::MaskedAreas, LossRegionVariant::AllAreas,
        LossRegionVariant::SegmentationQuadrants, LossRegionVariant::TargetQuadrant};

    int started = 0;
    for (float ratio : ratios) {
        for (LossRegionVariant variant : variants) {
            TrainConfig cfg;
            cfg.mask_ratio = ratio;
            cfg.loss_variant = variant;
            cfg.batch_size = 2;
            cfg.epochs = 0;
            cfg.max_steps = 1;
            cfg.seed = 505;
            const bool degenerate = ratio == 0.0f && variant == LossRegionVariant::MaskedAreas;
            try {
                const TrainResult result = train_run(model, cfg, pairs, dir.str());
                if (degenerate) {
                    return {5, false, "degenerate combination was not rejected", 0};
                }
                if (result.steps_run != 1) {
                    return {5, false, "combination failed to take a training step", 0};
                }
                ++started;
            } catch (const Error& e) {
                if (!degenerate || e.code() != ErrorCode::ConfigRejected) {
                    return {5, false,
                            std::string("unexpected rejection: ") + e.what(), 0};
                }
            }
        }
    }
    if (started != 19) {
        return {5, false, "expected 19 trainable combinations, got " + std::to_string(started), 0};
    }
    return {5, true, "1 rejection (ratio 0, masked) + 19 combinations training", 0};
}

// ---------------------------------------------------------------------------
// 6 & 8. Overfit probe and its determinism
// ---------------------------------------------------------------------------
struct ProbeArtifacts {
    double final_loss = 1e9;
    double best_loss = 1e9;
    int64_t steps = 0;
    double mean_dice = 0.0;
    std::string masks_log;
    std::string pairs_file;
    bool ran = false;
};

ProbeArtifacts run_overfit_probe(const std::string& tag) {
    ScratchDir dir("probe_" + tag);
    build_dataset(dir.str(), SplitCounts{16, 2, 2}, 606);
    const Manifest manifest = read_manifest(dir.file("manifest.jsonl"));
    const auto [support, query] = split_pools(manifest, 606);
    const auto pairs = pair_training(support, query, 606); // 8 pairs

    TrainConfig cfg;
    cfg.mask_ratio = 0.6f;
    cfg.loss_variant = LossRegionVariant::MaskedAreas;
    cfg.learning_rate = 5e-4f;
    cfg.weight_decay = 0.05f;
    cfg.batch_size = 8;
    cfg.epochs = 0;
    cfg.max_steps = 2000; // full budget; the threshold must be crossed within it
    cfg.seed = 606;
    cfg.out_dir = dir.str();

    const ModelConfig model = toy_config(4, 64, 4);
    const TrainResult result = train_run(model, cfg, pairs, dir.str());

    ProbeArtifacts artifacts;
    artifacts.ran = true;
    artifacts.final_loss = result.final_loss;
    for (const auto& rec : result.log.steps) {
        artifacts.best_loss = std::min(artifacts.best_loss, rec.loss);
    }
    artifacts.steps = result.steps_run;
    artifacts.masks_log = read_bytes(dir.file("masks.log"));
    write_pairs(dir.file("pairs_used.jsonl"), pairs, cfg.seed, "train");
    artifacts.pairs_file = read_bytes(dir.file("pairs_used.jsonl"));

    double dice_acc = 0.0;
    for (const auto& pair : pairs) {
        const GridF support_img = load_image_f32(dir.str(), pair.support.image_path);
        const GridU8 support_mask = load_mask(dir.str(), pair.support.mask_path);
        const GridF query_img = load_image_f32(dir.str(), pair.query.image_path);
        const GridU8 gt = load_mask(dir.str(), pair.query.mask_path);
        const BinaryMask pred = predict(result.params, support_img, support_mask, query_img);
        dice_acc += dice_coefficient(pred, gt);
    }
    artifacts.mean_dice = dice_acc / static_cast<double>(pairs.size());
    return artifacts;
}

ProbeArtifacts g_probe;

Outcome criterion_overfit() {
    g_probe = run_overfit_probe("a");
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "best loss %.4f within %lld steps, train-pair mean Dice %.3f", g_probe.best_loss,
                  static_cast<long long>(g_probe.steps), g_probe.mean_dice);
    const bool pass =
        g_probe.best_loss < 0.05 && g_probe.steps <= 2000 && g_probe.mean_dice >= 0.85;
    return {6, pass, detail, 0};
}

Outcome criterion_determinism() {
    if (!g_probe.ran) {
        return {8, false, "criterion 6 artifacts unavailable", 0};
    }
    const ProbeArtifacts rerun = run_overfit_probe("b");
    const double loss_delta = std::abs(rerun.final_loss - g_probe.final_loss);
    const bool masks_equal = rerun.masks_log == g_probe.masks_log;
    const bool pairs_equal = rerun.pairs_file == g_probe.pairs_file;
    char detail[160];
    std::snprintf(detail, sizeof(detail), "|loss delta| %.2e, masks %s, pairing %s", loss_delta,
                  masks_equal ? "bitwise-identical" : "DIFFER",
                  pairs_equal ? "bitwise-identical" : "DIFFER");
    return {8, loss_delta <= 1e-6 && masks_equal && pairs_equal, detail, 0};
}

// ---------------------------------------------------------------------------
// 7. Generalization trend: SimICL vs single-image
// ---------------------------------------------------------------------------
Outcome criterion_generalization() {
    ScratchDir dir("criterion7");
    build_dataset(dir.str(), SplitCounts{128, 16, 16}, 707);
    const Manifest manifest = read_manifest(dir.file("manifest.jsonl"));
    const auto [support, query] = split_pools(manifest, 707);
    const auto train_pairs = pair_training(support, query, 707); // 64 pairs
    const auto eval_pairs = pair_eval(records_of_split(manifest, Split::Test),
                                      records_of_split(manifest, Split::Validation), 707);

    const ModelConfig model = toy_config(4, 64, 4);
    const int64_t budget = 5000;

    TrainConfig icl;
    icl.mask_ratio = 0.6f;
    icl.loss_variant = LossRegionVariant::MaskedAreas;
    icl.batch_size = 8;
    icl.epochs = 0;
    icl.max_steps = budget;
    icl.seed = 707;
    const TrainResult icl_result = train_run(model, icl, train_pairs, dir.str());
    const MetricsReport icl_report =
        evaluate_run(icl_result.params, eval_pairs, dir.str(), 0.5, 0, 707);

    TrainConfig single;
    single.mode = TrainMode::SingleImage;
    single.batch_size = 8;
    single.epochs = 0;
    single.max_steps = budget;
    single.seed = 707;
    const TrainResult single_result =
        single_image_run(model, single, records_of_split(manifest, Split::Train), dir.str());
    const MetricsReport single_report = evaluate_single_run(
        single_result.params, records_of_split(manifest, Split::Test), dir.str(), 0.5, 0, 707);

    char detail[160];
    std::snprintf(detail, sizeof(detail), "SimICL Dice %.3f vs single-image Dice %.3f on %zu queries",
                  icl_report.mean_dice, single_report.mean_dice, icl_report.n_pairs);
    const bool pass = icl_report.mean_dice >= 0.70 &&
                      icl_report.mean_dice >= single_report.mean_dice - 0.02;
    return {7, pass, detail, 0};
}

// ---------------------------------------------------------------------------
// 9. Round trips
// ---------------------------------------------------------------------------
Outcome criterion_round_trips() {
    ScratchDir dir("criterion9");

    // Composite compose/extract identity (bitwise).
    Rng rng(909);
    GridF support(112, 112), query(112, 112);
    GridU8 smask(112, 112), qmask(112, 112);
    for (auto& v : support.data) v = static_cast<float>(rng.uniform());
    for (auto& v : query.data) v = static_cast<float>(rng.uniform());
    for (auto& v : smask.data) v = static_cast<uint8_t>(rng.below(2));
    for (auto& v : qmask.data) v = static_cast<uint8_t>(rng.below(2));
    const Composite composite = compose_training_composite(support, smask, query, qmask, "rt");
    if (!(extract_quadrant(composite, Quadrant::SupportImage) == support) ||
        !(extract_quadrant(composite, Quadrant::QueryImage) == query) ||
        !(extract_quadrant(composite, Quadrant::SupportMask) == render_mask_image(smask)) ||
        !(extract_quadrant(composite, Quadrant::QueryTarget) == render_mask_image(qmask))) {
        return {9, false, "composite round trip is not bitwise", 0};
    }

    // Checkpoint save/load identity (bitwise).
    const ModelConfig cfg = toy_config(2, 32, 4);
    const ModelParams<float> params = init_params<float>(cfg, 909);
    OptimizerState<float> opt = make_optimizer_state<float>(cfg);
    opt.step = 17;
    save_checkpoint(dir.file("a.ckpt"), params, &opt);
    const Checkpoint loaded = load_checkpoint(dir.file("a.ckpt"));
    save_checkpoint(dir.file("b.ckpt"), loaded.params,
                    loaded.optimizer ? &*loaded.optimizer : nullptr);
    if (read_bytes(dir.file("a.ckpt")) != read_bytes(dir.file("b.ckpt"))) {
        return {9, false, "checkpoint round trip is not byte-exact", 0};
    }

    // Manifest write/read identity (byte-exact).
    build_dataset(dir.file("data"), SplitCounts{5, 2, 2}, 909);
    const Manifest manifest = read_manifest(dir.file("data/manifest.jsonl"));
    write_manifest(dir.file("manifest_copy.jsonl"), manifest);
    if (read_bytes(dir.file("data/manifest.jsonl")) != read_bytes(dir.file("manifest_copy.jsonl"))) {
        return {9, false, "manifest round trip is not byte-exact", 0};
    }
    return {9, true, "composite, checkpoint and manifest round trips all exact", 0};
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            only = std::atoi(argv[i + 1]);
        }
    }
    auto want = [&](int id) { return only == 0 || only == id; };

    if (want(1)) run_criterion(1, "metric oracle equivalence", criterion_metrics);
    if (want(2)) run_criterion(2, "mask-count exactness", criterion_mask_counts);
    if (want(3)) run_criterion(3, "gradient correctness", criterion_gradients);
    if (want(4)) run_criterion(4, "masked-content independence", criterion_masked_independence);
    if (want(5)) run_criterion(5, "degenerate-config refusal", criterion_degenerate_config);
    if (want(6) || want(8)) run_criterion(6, "overfit probe", criterion_overfit);
    if (want(7)) run_criterion(7, "generalization trend", criterion_generalization);
    if (want(8)) run_criterion(8, "determinism", criterion_determinism);
    if (want(9)) run_criterion(9, "round trips", criterion_round_trips);

    int failures = 0;
    for (const auto& outcome : g_outcomes) {
        failures += outcome.pass ? 0 : 1;
    }
    std::printf("%zu criteria run, %d failed\n", g_outcomes.size(), failures);
    return failures == 0 ? 0 : 1;
}
