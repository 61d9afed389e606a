#include "simicl/evaluation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "simicl/composer.hpp"
#include "simicl/error.hpp"
#include "simicl/masking.hpp"

namespace simicl {

namespace {

using json = nlohmann::ordered_json;

void check_threshold(double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw Error(ErrorCode::InvalidRatio, "threshold must lie in (0, 1)");
    }
}

BinaryMask threshold_grid(const GridF& values, float threshold) {
    BinaryMask out(values.rows, values.cols);
    for (size_t i = 0; i < values.data.size(); ++i) {
        out.data[i] = values.data[i] >= threshold ? 1 : 0;
    }
    return out;
}

GridU8 gt_at_resolution(const GridU8& gt, int side) {
    if (gt.rows == side && gt.cols == side) {
        return gt;
    }
    const GridF resized = resize_mask_image(render_mask_image(gt), side, side);
    GridU8 out(side, side);
    for (size_t i = 0; i < resized.data.size(); ++i) {
        out.data[i] = resized.data[i] >= 0.5f ? 1 : 0;
    }
    return out;
}

MetricsReport finalize_report(std::vector<PairMetrics> per_pair, double threshold,
                              uint64_t checkpoint_hash, uint64_t eval_seed) {
    if (per_pair.empty()) {
        throw Error(ErrorCode::EmptyEvaluation, "no pairs to evaluate");
    }
    std::sort(per_pair.begin(), per_pair.end(),
              [](const PairMetrics& a, const PairMetrics& b) { return a.pair_id < b.pair_id; });
    MetricsReport report;
    report.n_pairs = per_pair.size();
    double dice_acc = 0.0;
    double iou_acc = 0.0;
    for (const auto& pm : per_pair) {
        dice_acc += pm.dice;
        iou_acc += pm.iou;
    }
    report.mean_dice = dice_acc / static_cast<double>(per_pair.size());
    report.mean_iou = iou_acc / static_cast<double>(per_pair.size());
    report.per_pair = std::move(per_pair);
    report.checkpoint_hash = checkpoint_hash;
    report.eval_seed = eval_seed;
    report.threshold = threshold;
    return report;
}

} // namespace

OverlapCounts overlap_counts(const BinaryMask& pred, const BinaryMask& gt) {
    if (!pred.same_shape(gt)) {
        throw Error(ErrorCode::InvalidDimension, "mask dimensions differ");
    }
    OverlapCounts counts;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const bool p = pred.data[i] != 0;
        const bool g = gt.data[i] != 0;
        counts.pred_count += p;
        counts.gt_count += g;
        counts.intersection += p && g;
    }
    return counts;
}

double dice_coefficient(const BinaryMask& pred, const BinaryMask& gt) {
    const OverlapCounts c = overlap_counts(pred, gt);
    if (c.pred_count + c.gt_count == 0) {
        return 1.0;
    }
    return 2.0 * static_cast<double>(c.intersection) /
           static_cast<double>(c.pred_count + c.gt_count);
}

double jaccard_index(const BinaryMask& pred, const BinaryMask& gt) {
    const OverlapCounts c = overlap_counts(pred, gt);
    if (c.union_count() == 0) {
        return 1.0;
    }
    return static_cast<double>(c.intersection) / static_cast<double>(c.union_count());
}

BinaryMask predict(const ModelParams<float>& params, const GridF& support_img,
                   const GridU8& support_mask, const GridF& query_img, float threshold) {
    if (params.config.image_side != kCompositeSide) {
        throw Error(ErrorCode::ConfigMismatch, "checkpoint image side does not match the composite");
    }
    const Composite composite = compose_inference_composite(support_img, support_mask, query_img);
    const PatchMask mask = inference_mask(params.config.patch_grid());
    GridF recon = vit_forward<float>(params, composite.pixels, mask, nullptr);
    for (auto& v : recon.data) {
        v = std::clamp(v, 0.0f, 1.0f);
    }
    const GridF target_quadrant = extract_quadrant(Composite{std::move(recon), ""}, Quadrant::QueryTarget);
    return threshold_grid(target_quadrant, threshold);
}

BinaryMask predict_single(const ModelParams<float>& params, const GridF& query_img, int out_side,
                          float threshold) {
    const int side = params.config.image_side;
    const GridF input = resize_image(query_img, side, side);
    PatchMask no_mask;
    no_mask.masked.assign(static_cast<size_t>(params.config.n_patches()), 0);
    no_mask.ratio_requested = 0.0f;
    GridF recon = vit_forward<float>(params, input, no_mask, nullptr);
    for (auto& v : recon.data) {
        v = std::clamp(v, 0.0f, 1.0f);
    }
    const GridF scaled = resize_image(recon, out_side, out_side);
    return threshold_grid(scaled, threshold);
}

MetricsReport evaluate_run(const ModelParams<float>& params, const std::vector<SamplePair>& eval_pairs,
                           const std::string& data_root, double threshold, uint64_t checkpoint_hash,
                           uint64_t eval_seed) {
    check_threshold(threshold);
    if (eval_pairs.empty()) {
        throw Error(ErrorCode::EmptyEvaluation, "empty evaluation pair list");
    }
    std::vector<PairMetrics> per_pair;
    per_pair.reserve(eval_pairs.size());
    for (const auto& pair : eval_pairs) {
        const GridF support_img = load_image_f32(data_root, pair.support.image_path);
        const GridU8 support_mask = load_mask(data_root, pair.support.mask_path);
        const GridF query_img = load_image_f32(data_root, pair.query.image_path);
        const GridU8 gt = load_mask(data_root, pair.query.mask_path);

        const BinaryMask pred =
            predict(params, support_img, support_mask, query_img, static_cast<float>(threshold));
        const GridU8 gt_sized = gt_at_resolution(gt, pred.rows);
        per_pair.push_back(
            PairMetrics{pair.pair_id, dice_coefficient(pred, gt_sized), jaccard_index(pred, gt_sized)});
    }
    return finalize_report(std::move(per_pair), threshold, checkpoint_hash, eval_seed);
}

MetricsReport evaluate_single_run(const ModelParams<float>& params,
                                  const std::vector<SampleRecord>& records,
                                  const std::string& data_root, double threshold,
                                  uint64_t checkpoint_hash, uint64_t eval_seed) {
    check_threshold(threshold);
    if (records.empty()) {
        throw Error(ErrorCode::EmptyEvaluation, "empty evaluation record list");
    }
    std::vector<PairMetrics> per_pair;
    per_pair.reserve(records.size());
    for (const auto& rec : records) {
        const GridF query_img = load_image_f32(data_root, rec.image_path);
        const GridU8 gt = load_mask(data_root, rec.mask_path);
        const BinaryMask pred =
            predict_single(params, query_img, gt.rows, static_cast<float>(threshold));
        per_pair.push_back(
            PairMetrics{rec.sample_id, dice_coefficient(pred, gt), jaccard_index(pred, gt)});
    }
    return finalize_report(std::move(per_pair), threshold, checkpoint_hash, eval_seed);
}

void write_report_json(const std::string& path, const MetricsReport& report) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open report for writing: " + path);
    }
    json doc;
    doc["n_pairs"] = report.n_pairs;
    doc["mean_dice"] = report.mean_dice;
    doc["mean_iou"] = report.mean_iou;
    doc["threshold"] = report.threshold;
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(report.checkpoint_hash));
    doc["checkpoint_hash"] = hash_hex;
    doc["eval_seed"] = report.eval_seed;
    json rows = json::array();
    for (const auto& pm : report.per_pair) {
        json row;
        row["pair_id"] = pm.pair_id;
        row["dice"] = pm.dice;
        row["iou"] = pm.iou;
        rows.push_back(std::move(row));
    }
    doc["per_pair"] = std::move(rows);
    out << doc.dump(2) << "\n";
}

void write_report_csv(const std::string& path, const MetricsReport& report) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open CSV report for writing: " + path);
    }
    out << "pair_id,dice,iou\n";
    char buf[64];
    for (const auto& pm : report.per_pair) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f", pm.dice, pm.iou);
        out << pm.pair_id << "," << buf << "\n";
    }
}

} // namespace simicl
