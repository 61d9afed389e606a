#include "simicl/training.hpp"

#include <json.hpp>

#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <unordered_map>

#include "simicl/composer.hpp"
#include "simicl/rng.hpp"

namespace simicl {

namespace {

using json = nlohmann::ordered_json;

constexpr uint64_t kModelInitTag = 0x4d494e49ULL;  // "MINI"
constexpr uint64_t kShuffleTag = 0x53485546ULL;    // "SHUF"
constexpr uint64_t kSampleMaskTag = 0x534d534bULL; // "SMSK"
constexpr uint64_t kRatioTag = 0x5241544fULL;      // "RATO"
constexpr uint64_t kGradInitTag = 0x47494e49ULL;   // "GINI"
constexpr uint64_t kGradProbeTag = 0x4750524fULL;  // "GPRO"
constexpr uint64_t kGradMaskTag = 0x474d534bULL;   // "GMSK"
constexpr uint64_t kGradDataTag = 0x47444154ULL;   // "GDAT"
constexpr uint64_t kCoverTag = 0x434f5652ULL;      // "COVR"

constexpr float kSingleImageRatios[] = {0.3f, 0.45f, 0.6f, 0.75f};

struct ImageCache {
    std::string root;
    std::unordered_map<std::string, GridF> images;
    std::unordered_map<std::string, GridU8> masks;

    const GridF& image(const std::string& rel_path) {
        auto it = images.find(rel_path);
        if (it == images.end()) {
            it = images.emplace(rel_path, load_image_f32(root, rel_path)).first;
        }
        return it->second;
    }
    const GridU8& mask(const std::string& rel_path) {
        auto it = masks.find(rel_path);
        if (it == masks.end()) {
            it = masks.emplace(rel_path, load_mask(root, rel_path)).first;
        }
        return it->second;
    }
};

uint64_t float_bits(float v) { return std::bit_cast<uint32_t>(v); }

uint64_t train_fingerprint(const ModelConfig& model_config, const TrainConfig& cfg) {
    uint64_t h = mix_seed(model_config.fingerprint(), cfg.seed, float_bits(cfg.mask_ratio),
                          static_cast<uint64_t>(cfg.loss_variant));
    h = mix_seed(h, float_bits(cfg.learning_rate), float_bits(cfg.weight_decay),
                 static_cast<uint64_t>(cfg.batch_size));
    h = mix_seed(h, static_cast<uint64_t>(cfg.mode), static_cast<uint64_t>(cfg.epochs),
                 static_cast<uint64_t>(cfg.max_steps));
    h = mix_seed(h, float_bits(cfg.target_mask_prob));
    return h;
}

using SampleMaker = std::function<TrainSample<float>(size_t item, int epoch, size_t position)>;

TrainResult run_loop(const ModelConfig& model_config, const TrainConfig& cfg, size_t n_items,
                     LossRegionVariant variant, const SampleMaker& make_sample) {
    model_config.validate();
    cfg.validate();
    if (n_items == 0) {
        throw Error(ErrorCode::EmptyPool, "no training items");
    }

    TrainResult result;
    result.params = init_params<float>(model_config, mix_seed(cfg.seed, kModelInitTag));
    result.optimizer = make_optimizer_state<float>(model_config);
    result.log.config_fingerprint = train_fingerprint(model_config, cfg);

    const auto t0 = std::chrono::steady_clock::now();
    auto wall = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    auto save_if_sink = [&](const std::string& name) {
        if (!cfg.out_dir.empty()) {
            save_checkpoint((std::filesystem::path(cfg.out_dir) / name).string(), result.params,
                            &result.optimizer);
        }
    };
    auto flush_logs = [&] {
        if (!cfg.out_dir.empty()) {
            write_train_log((std::filesystem::path(cfg.out_dir) / "train_log.jsonl").string(),
                            result.log);
            write_mask_log((std::filesystem::path(cfg.out_dir) / "masks.log").string(), result.log);
        }
    };

    std::vector<size_t> order(n_items);
    std::iota(order.begin(), order.end(), size_t{0});
    const size_t batch_size = static_cast<size_t>(cfg.batch_size);

    int64_t step = 0;
    bool done = false;
    for (int epoch = 0; !done; ++epoch) {
        if (cfg.max_steps <= 0 && epoch >= cfg.epochs) {
            break;
        }
        if (cfg.max_steps > 0 && cfg.epochs > 0 && epoch >= cfg.epochs) {
            break;
        }
        Rng shuffle_rng = Rng::stream(cfg.seed, kShuffleTag, static_cast<uint64_t>(epoch));
        shuffle_rng.shuffle(order);

        for (size_t start = 0; start < n_items && !done; start += batch_size) {
            const size_t count = std::min(batch_size, n_items - start);
            std::vector<TrainSample<float>> batch;
            batch.reserve(count);
            double ratio_acc = 0.0;
            for (size_t i = 0; i < count; ++i) {
                TrainSample<float> sample = make_sample(order[start + i], epoch, start + i);
                ratio_acc += sample.mask.ratio_requested;
                result.log.masks.push_back(MaskRecord{step + 1, sample.id, mask_to_string(sample.mask)});
                batch.push_back(std::move(sample));
            }

            BatchGradients<float> bg;
            try {
                bg = compute_gradients(result.params, batch, variant);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::NumericalError) {
                    save_if_sink("checkpoint_last_good.ckpt");
                    flush_logs();
                }
                throw;
            }
            if (!std::isfinite(bg.loss)) {
                save_if_sink("checkpoint_last_good.ckpt");
                flush_logs();
                throw Error(ErrorCode::NumericalError,
                            "non-finite training loss at step " + std::to_string(step + 1));
            }

            adamw_step(result.params, bg.grads, result.optimizer, cfg.adam());
            ++step;
            result.log.steps.push_back(StepRecord{step, epoch, static_cast<double>(bg.loss),
                                                  static_cast<float>(ratio_acc / count), wall()});
            result.final_loss = bg.loss;

            if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
                save_if_sink("checkpoint_step" + std::to_string(step) + ".ckpt");
            }
            if (cfg.stop_loss > 0.0f && bg.loss < cfg.stop_loss) {
                done = true;
            }
            if (cfg.max_steps > 0 && step >= cfg.max_steps) {
                done = true;
            }
        }
    }

    result.steps_run = step;
    save_if_sink("checkpoint_final.ckpt");
    flush_logs();
    return result;
}

} // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0f)) {
        throw Error(ErrorCode::ConfigRejected, "learning_rate must be positive");
    }
    if (batch_size < 1) {
        throw Error(ErrorCode::ConfigRejected, "batch_size must be >= 1");
    }
    if (!(mask_ratio >= 0.0f && mask_ratio <= 1.0f)) {
        throw Error(ErrorCode::InvalidRatio, "mask_ratio must lie in [0, 1]");
    }
    if (epochs <= 0 && max_steps <= 0) {
        throw Error(ErrorCode::ConfigRejected, "need a positive epoch or step budget");
    }
    if (mode == TrainMode::SimICL && mask_ratio == 0.0f &&
        loss_variant == LossRegionVariant::MaskedAreas) {
        throw Error(ErrorCode::ConfigRejected,
                    "degenerate setting: mask ratio 0 with loss over masked areas has an empty "
                    "loss region");
    }
}

void write_train_log(const std::string& path, const TrainLog& log) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open train log for writing: " + path);
    }
    json header;
    header["config_fingerprint"] = log.config_fingerprint;
    out << header.dump() << "\n";
    for (const auto& rec : log.steps) {
        json line;
        line["step"] = rec.step;
        line["epoch"] = rec.epoch;
        line["loss"] = rec.loss;
        line["mask_ratio"] = rec.mask_ratio;
        line["wall_time"] = rec.wall_time;
        out << line.dump() << "\n";
    }
}

void write_mask_log(const std::string& path, const TrainLog& log) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open mask log for writing: " + path);
    }
    for (const auto& rec : log.masks) {
        out << "step=" << rec.step << " sample=" << rec.sample_id << " mask=" << rec.mask << "\n";
    }
}

template <class T>
T sample_loss_and_grads(const ModelParams<T>& params, const Grid<T>& input, const Grid<T>& target,
                        const PatchMask& mask, const LossRegion& region, ModelParams<T>* grads,
                        T grad_scale) {
    if (!grads) {
        const Grid<T> recon = vit_forward<T>(params, input, mask, nullptr);
        return mae_loss(recon, target, region);
    }
    ForwardTrace<T> trace;
    const Grid<T> recon = vit_forward<T>(params, input, mask, &trace);
    const T loss = mae_loss(recon, target, region);
    Grid<T> d_recon = mae_loss_gradient(recon, target, region);
    if (grad_scale != T(1)) {
        for (auto& v : d_recon.data) {
            v *= grad_scale;
        }
    }
    const Mat<T> d_tokens = patchify(d_recon, params.config.patch_side);
    vit_backward(params, trace, d_tokens, *grads);
    return loss;
}

template <class T>
BatchGradients<T> compute_gradients(const ModelParams<T>& params,
                                    const std::vector<TrainSample<T>>& batch,
                                    LossRegionVariant variant) {
    if (batch.empty()) {
        throw Error(ErrorCode::EmptyPool, "empty training batch");
    }
    BatchGradients<T> out;
    out.grads = zero_params<T>(params.config);
    const PatchGrid grid = params.config.patch_grid();
    const T scale = T(1) / static_cast<T>(batch.size());
    double loss_acc = 0.0;
    for (const auto& sample : batch) {
        const LossRegion region = loss_pixel_region(variant, sample.mask, grid);
        loss_acc += static_cast<double>(sample_loss_and_grads(params, sample.input, sample.target,
                                                              sample.mask, region, &out.grads, scale));
    }
    out.loss = static_cast<T>(loss_acc / static_cast<double>(batch.size()));
    return out;
}

TrainResult train_run(const ModelConfig& model_config, const TrainConfig& train_config,
                      const std::vector<SamplePair>& pairs, const std::string& data_root) {
    if (train_config.mode != TrainMode::SimICL) {
        throw Error(ErrorCode::ConfigRejected, "train_run drives SimICL mode; use single_image_run");
    }
    if (pairs.empty()) {
        throw Error(ErrorCode::EmptyPool, "no training pairs");
    }
    auto cache = std::make_shared<ImageCache>(ImageCache{data_root, {}, {}});
    const PatchGrid grid = model_config.patch_grid();
    const TrainConfig& cfg = train_config;

    const int quadrant_patches = (grid.rows() / 2) * (grid.cols() / 2);
    const bool can_cover =
        std::lround(static_cast<double>(train_config.mask_ratio) * grid.n_patches()) >=
        quadrant_patches;

    SampleMaker make = [cache, grid, can_cover, &pairs, &cfg](size_t item, int epoch,
                                                              size_t position) {
        const SamplePair& pair = pairs[item];
        const Composite composite = compose_training_composite(
            cache->image(pair.support.image_path), cache->mask(pair.support.mask_path),
            cache->image(pair.query.image_path), cache->mask(pair.query.mask_path), pair.pair_id);
        const uint64_t mask_seed =
            mix_seed(cfg.seed, kSampleMaskTag, static_cast<uint64_t>(epoch), position);
        Rng cover_rng = Rng::stream(cfg.seed, kCoverTag, static_cast<uint64_t>(epoch), position);
        const bool cover = can_cover && cover_rng.uniform() < cfg.target_mask_prob;
        PatchMask mask = cover ? sample_mask_covering_target(grid, cfg.mask_ratio, mask_seed)
                               : sample_mask(grid, cfg.mask_ratio, mask_seed);
        return TrainSample<float>{composite.pixels, composite.pixels, std::move(mask), pair.pair_id};
    };
    return run_loop(model_config, cfg, pairs.size(), cfg.loss_variant, make);
}

TrainResult single_image_run(const ModelConfig& model_config, const TrainConfig& train_config,
                             const std::vector<SampleRecord>& records, const std::string& data_root) {
    if (train_config.mode != TrainMode::SingleImage) {
        throw Error(ErrorCode::ConfigRejected, "single_image_run requires SingleImage mode");
    }
    if (records.empty()) {
        throw Error(ErrorCode::EmptyPool, "no training records");
    }
    auto cache = std::make_shared<ImageCache>(ImageCache{data_root, {}, {}});
    const PatchGrid grid = model_config.patch_grid();
    const int side = model_config.image_side;
    const TrainConfig& cfg = train_config;

    SampleMaker make = [cache, grid, side, &records, &cfg](size_t item, int epoch, size_t position) {
        const SampleRecord& rec = records[item];
        GridF input = resize_image(cache->image(rec.image_path), side, side);
        GridF target = resize_mask_image(render_mask_image(cache->mask(rec.mask_path)), side, side);
        Rng ratio_rng =
            Rng::stream(cfg.seed, kRatioTag, static_cast<uint64_t>(epoch), position);
        const float ratio = kSingleImageRatios[ratio_rng.below(4)];
        const uint64_t mask_seed =
            mix_seed(cfg.seed, kSampleMaskTag, static_cast<uint64_t>(epoch), position);
        PatchMask mask = sample_mask(grid, ratio, mask_seed);
        return TrainSample<float>{std::move(input), std::move(target), std::move(mask), rec.sample_id};
    };
    // The ablation trains with loss over all areas regardless of the
    // configured variant.
    return run_loop(model_config, cfg, records.size(), LossRegionVariant::AllAreas, make);
}

GradCheckReport finite_difference_check(const ModelConfig& config, uint64_t seed, int n_coords,
                                        double fd_step, double kink_margin) {
    config.validate();
    if (config.depth > 4 || config.embed_dim > 64) {
        throw Error(ErrorCode::ConfigRejected,
                    "finite_difference_check runs at toy scale only (depth <= 4, dim <= 64)");
    }

    ModelParams<double> params = init_params<double>(config, mix_seed(seed, kGradInitTag));
    const int side = config.image_side;
    Rng data_rng = Rng::stream(seed, kGradDataTag);
    GridD input(side, side);
    GridD target(side, side);
    for (auto& v : input.data) {
        v = data_rng.uniform();
    }
    for (auto& v : target.data) {
        v = data_rng.uniform();
    }
    const PatchGrid grid = config.patch_grid();
    const PatchMask mask = sample_mask(grid, 0.45f, mix_seed(seed, kGradMaskTag));

    // Freeze the compared loss onto pixels safely away from the L1 kink so
    // the central difference never straddles a sign flip.
    LossRegion region = loss_pixel_region(LossRegionVariant::MaskedAreas, mask, grid);
    const GridD recon0 = vit_forward<double>(params, input, mask, nullptr);
    int excluded = 0;
    for (size_t i = 0; i < region.pixel_set.data.size(); ++i) {
        if (region.pixel_set.data[i] &&
            std::abs(recon0.data[i] - target.data[i]) < kink_margin) {
            region.pixel_set.data[i] = 0;
            ++excluded;
        }
    }
    region.pixel_count = count_nonzero(region.pixel_set);
    if (region.pixel_count == 0) {
        throw Error(ErrorCode::NumericalError, "kink exclusion removed every region pixel");
    }

    ModelParams<double> grads = zero_params<double>(config);
    sample_loss_and_grads<double>(params, input, target, mask, region, &grads, 1.0);

    auto param_refs = collect_tensors(params);
    auto grad_refs = collect_tensors(grads);
    Rng probe_rng = Rng::stream(seed, kGradProbeTag);

    GradCheckReport report;
    report.n_probed = n_coords;
    report.n_excluded_pixels = excluded;
    for (int c = 0; c < n_coords; ++c) {
        auto& tensor = param_refs[static_cast<size_t>(c) % param_refs.size()];
        const size_t idx = probe_rng.below(tensor.size);
        const double original = tensor.data[idx];

        tensor.data[idx] = original + fd_step;
        const double loss_plus =
            sample_loss_and_grads<double>(params, input, target, mask, region, nullptr, 1.0);
        tensor.data[idx] = original - fd_step;
        const double loss_minus =
            sample_loss_and_grads<double>(params, input, target, mask, region, nullptr, 1.0);
        tensor.data[idx] = original;

        const double fd = (loss_plus - loss_minus) / (2.0 * fd_step);
        const double analytic = grad_refs[static_cast<size_t>(c) % grad_refs.size()].data[idx];
        // Error relative to the gradient scale, floored at 1 so coordinates
        // with a vanishing derivative do not dominate the report.
        const double denom = std::max({std::abs(fd), std::abs(analytic), 1.0});
        const double rel = std::abs(fd - analytic) / denom;
        report.max_rel_error = std::max(report.max_rel_error, rel);
    }
    return report;
}

template float sample_loss_and_grads(const ModelParams<float>&, const GridF&, const GridF&,
                                     const PatchMask&, const LossRegion&, ModelParams<float>*, float);
template double sample_loss_and_grads(const ModelParams<double>&, const GridD&, const GridD&,
                                      const PatchMask&, const LossRegion&, ModelParams<double>*,
                                      double);
template BatchGradients<float> compute_gradients(const ModelParams<float>&,
                                                 const std::vector<TrainSample<float>>&,
                                                 LossRegionVariant);
template BatchGradients<double> compute_gradients(const ModelParams<double>&,
                                                  const std::vector<TrainSample<double>>&,
                                                  LossRegionVariant);

} // namespace simicl
