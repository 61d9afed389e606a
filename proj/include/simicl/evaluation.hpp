#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simicl/grid.hpp"
#include "simicl/manifest.hpp"
#include "simicl/pairing.hpp"
#include "simicl/vit.hpp"

namespace simicl {

// Binary segmentation masks are {0,1} grids.
using BinaryMask = GridU8;

struct OverlapCounts {
    uint64_t intersection = 0;
    uint64_t pred_count = 0;
    uint64_t gt_count = 0;
    uint64_t union_count() const { return pred_count + gt_count - intersection; }
};

OverlapCounts overlap_counts(const BinaryMask& pred, const BinaryMask& gt);

// 2|P∩G| / (|P|+|G|); both-empty convention 1.0.
double dice_coefficient(const BinaryMask& pred, const BinaryMask& gt);

// |P∩G| / |P∪G|; both-empty convention 1.0.
double jaccard_index(const BinaryMask& pred, const BinaryMask& gt);

struct PairMetrics {
    std::string pair_id;
    double dice = 0.0;
    double iou = 0.0;
};

struct MetricsReport {
    std::vector<PairMetrics> per_pair; // sorted by pair_id
    double mean_dice = 0.0;
    double mean_iou = 0.0;
    size_t n_pairs = 0;
    uint64_t checkpoint_hash = 0;
    uint64_t eval_seed = 0;
    double threshold = 0.5;
};

// Inference composite -> forward with the full target-quadrant token mask ->
// clamp -> extract the target quadrant -> threshold.
BinaryMask predict(const ModelParams<float>& params, const GridF& support_img,
                   const GridU8& support_mask, const GridF& query_img, float threshold = 0.5f);

// Single-image ablation inference: the resized query alone, no token masking;
// output resized back to the query-mask resolution before thresholding.
BinaryMask predict_single(const ModelParams<float>& params, const GridF& query_img, int out_side,
                          float threshold = 0.5f);

MetricsReport evaluate_run(const ModelParams<float>& params, const std::vector<SamplePair>& eval_pairs,
                           const std::string& data_root, double threshold, uint64_t checkpoint_hash,
                           uint64_t eval_seed);

MetricsReport evaluate_single_run(const ModelParams<float>& params,
                                  const std::vector<SampleRecord>& records,
                                  const std::string& data_root, double threshold,
                                  uint64_t checkpoint_hash, uint64_t eval_seed);

void write_report_json(const std::string& path, const MetricsReport& report);
void write_report_csv(const std::string& path, const MetricsReport& report);

} // namespace simicl
