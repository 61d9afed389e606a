#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simicl/checkpoint.hpp"
#include "simicl/loss.hpp"
#include "simicl/manifest.hpp"
#include "simicl/masking.hpp"
#include "simicl/optimizer.hpp"
#include "simicl/pairing.hpp"
#include "simicl/vit.hpp"

namespace simicl {

enum class TrainMode { SimICL, SingleImage };

struct TrainConfig {
    float mask_ratio = 0.6f;
    LossRegionVariant loss_variant = LossRegionVariant::MaskedAreas;
    float learning_rate = 5e-4f;
    float weight_decay = 0.05f;
    int batch_size = 64;
    int epochs = 1;
    uint64_t seed = 0;
    TrainMode mode = TrainMode::SimICL;
    float adam_beta1 = 0.9f;
    float adam_beta2 = 0.999f;
    float adam_eps = 1e-8f;

    int64_t max_steps = 0;     // 0: bounded by epochs only
    float stop_loss = 0.0f;    // 0: no early stop
    int checkpoint_every = 0;  // steps between periodic checkpoints; 0: final only
    std::string out_dir;       // optional sink for checkpoints/logs

    // Fraction of SimICL samples whose random mask is drawn covering the
    // whole target quadrant (count unchanged). Inference hides that quadrant
    // completely, so training has to visit that configuration too.
    float target_mask_prob = 0.5f;

    AdamSettings adam() const {
        return AdamSettings{learning_rate, weight_decay, adam_beta1, adam_beta2, adam_eps};
    }
    // Rejects the Table-2 degenerate setting (ratio 0 with loss over masked
    // areas) before any work starts.
    void validate() const;
};

struct StepRecord {
    int64_t step = 0;
    int epoch = 0;
    double loss = 0.0;
    float mask_ratio = 0.0f;
    double wall_time = 0.0;
};

struct MaskRecord {
    int64_t step = 0;
    std::string sample_id;
    std::string mask;
};

struct TrainLog {
    std::vector<StepRecord> steps;
    std::vector<MaskRecord> masks;
    uint64_t config_fingerprint = 0;
};

void write_train_log(const std::string& path, const TrainLog& log);
void write_mask_log(const std::string& path, const TrainLog& log);

struct TrainResult {
    ModelParams<float> params;
    OptimizerState<float> optimizer;
    TrainLog log;
    double final_loss = 0.0;
    int64_t steps_run = 0;
};

// One training example: model input, reconstruction target, patch mask.
template <class T>
struct TrainSample {
    Grid<T> input;
    Grid<T> target;
    PatchMask mask;
    std::string id;
};

template <class T>
struct BatchGradients {
    T loss = T(0);
    ModelParams<T> grads;
};

// Loss and, optionally, parameter gradients for one sample against an
// explicit pixel region. grad_scale folds in the batch-mean factor.
template <class T>
T sample_loss_and_grads(const ModelParams<T>& params, const Grid<T>& input, const Grid<T>& target,
                        const PatchMask& mask, const LossRegion& region, ModelParams<T>* grads,
                        T grad_scale);

// Batch-mean MAE loss and exact reverse-mode gradients. Each sample's region
// comes from its own patch mask under the given variant.
template <class T>
BatchGradients<T> compute_gradients(const ModelParams<T>& params,
                                    const std::vector<TrainSample<T>>& batch,
                                    LossRegionVariant variant);

// SimICL: per epoch, deterministic pair shuffle; per sample, a fresh random
// patch mask at the configured ratio over the 2x2 composite; the composite is
// both the masking substrate and the reconstruction target.
TrainResult train_run(const ModelConfig& model_config, const TrainConfig& train_config,
                      const std::vector<SamplePair>& pairs, const std::string& data_root);

// Single-image ablation: the image alone is the input, its rendered mask the
// target, per-sample mask ratio drawn from {0.3, 0.45, 0.6, 0.75}, loss over
// all areas.
TrainResult single_image_run(const ModelConfig& model_config, const TrainConfig& train_config,
                             const std::vector<SampleRecord>& records, const std::string& data_root);

struct GradCheckReport {
    double max_rel_error = 0.0;
    int n_probed = 0;
    int n_excluded_pixels = 0;
};

// Central finite differences on the f64 shadow path against the analytic
// gradients, probing coordinates round-robin across every tensor. Pixels
// within kink_margin of the L1 kink are excluded from the compared loss.
GradCheckReport finite_difference_check(const ModelConfig& config, uint64_t seed, int n_coords = 50,
                                        double fd_step = 1e-3, double kink_margin = 1e-2);

} // namespace simicl
