#include <doctest.h>

#include "simicl/composer.hpp"
#include "simicl/error.hpp"
#include "simicl/evaluation.hpp"
#include "simicl/rng.hpp"
#include "test_util.hpp"

using namespace simicl;
using simicl_test::TempDir;
using simicl_test::read_file;

namespace {

BinaryMask mask_from(std::initializer_list<std::pair<int, int>> pixels, int side) {
    BinaryMask m(side, side, 0);
    for (const auto& [r, c] : pixels) {
        m.at(r, c) = 1;
    }
    return m;
}

BinaryMask random_mask(int side, uint64_t seed, double density) {
    BinaryMask m(side, side);
    Rng rng(seed);
    for (auto& v : m.data) {
        v = rng.uniform() < density ? 1 : 0;
    }
    return m;
}

// Independent double-loop counting oracle.
struct OracleCounts {
    uint64_t inter = 0, pred = 0, gt = 0;
};
OracleCounts count_oracle(const BinaryMask& a, const BinaryMask& b) {
    OracleCounts c;
    for (int r = 0; r < a.rows; ++r) {
        for (int col = 0; col < a.cols; ++col) {
            const bool pa = a.at(r, col) != 0;
            const bool pb = b.at(r, col) != 0;
            c.pred += pa;
            c.gt += pb;
            c.inter += pa && pb;
        }
    }
    return c;
}

ModelConfig toy_config() {
    ModelConfig cfg;
    cfg.depth = 1;
    cfg.embed_dim = 16;
    cfg.n_heads = 4;
    return cfg;
}

} // namespace

TEST_CASE("dice and iou on the 4x4 reference case") {
    const BinaryMask pred = mask_from({{1, 1}, {1, 2}, {2, 1}, {2, 2}}, 4);
    const BinaryMask gt = mask_from({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, 4);
    CHECK(dice_coefficient(pred, gt) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(jaccard_index(pred, gt) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("identical masks score 1.0, disjoint masks 0.0, empty-empty 1.0") {
    const BinaryMask a = mask_from({{0, 0}, {1, 1}}, 4);
    const BinaryMask b = mask_from({{2, 2}, {3, 3}}, 4);
    const BinaryMask empty(4, 4, 0);
    CHECK(dice_coefficient(a, a) == 1.0);
    CHECK(jaccard_index(a, a) == 1.0);
    CHECK(dice_coefficient(a, b) == 0.0);
    CHECK(jaccard_index(a, b) == 0.0);
    CHECK(dice_coefficient(empty, empty) == 1.0);
    CHECK(jaccard_index(empty, empty) == 1.0);
}

TEST_CASE("metrics equal the double-loop oracle exactly on random masks") {
    Rng rng(50);
    for (int trial = 0; trial < 60; ++trial) {
        const BinaryMask a = random_mask(112, rng.next_u64(), 0.2);
        const BinaryMask b = random_mask(112, rng.next_u64(), 0.2);
        const OverlapCounts counts = overlap_counts(a, b);
        const OracleCounts oracle = count_oracle(a, b);
        CHECK(counts.intersection == oracle.inter);
        CHECK(counts.pred_count == oracle.pred);
        CHECK(counts.gt_count == oracle.gt);

        const double dice = dice_coefficient(a, b);
        const double iou = jaccard_index(a, b);
        CHECK(dice ==
              2.0 * static_cast<double>(oracle.inter) / static_cast<double>(oracle.pred + oracle.gt));
        // symmetry
        CHECK(dice == dice_coefficient(b, a));
        CHECK(iou == jaccard_index(b, a));
        // per-pair algebraic identity
        CHECK(std::abs(iou - dice / (2.0 - dice)) < 1e-9);
        CHECK(dice >= 0.0);
        CHECK(dice <= 1.0);
        CHECK(iou >= 0.0);
        CHECK(iou <= 1.0);
    }
}

TEST_CASE("metrics reject mismatched dimensions") {
    CHECK_THROWS_AS(dice_coefficient(BinaryMask(4, 4, 0), BinaryMask(5, 5, 0)), Error);
}

TEST_CASE("predict emits a 112x112 mask independent of the target-quadrant filler") {
    const ModelConfig cfg = toy_config();
    const ModelParams<float> params = init_params<float>(cfg, 91);
    Rng rng(92);
    GridF support(112, 112), query(112, 112);
    GridU8 smask(112, 112, 0);
    for (auto& v : support.data) v = static_cast<float>(rng.uniform());
    for (auto& v : query.data) v = static_cast<float>(rng.uniform());

    const BinaryMask pred = predict(params, support, smask, query);
    CHECK(pred.rows == 112);
    CHECK(pred.cols == 112);

    // Rebuild the composite with a different filler in the target quadrant;
    // that quadrant is fully token-masked, so the prediction cannot change.
    Composite noisy = compose_inference_composite(support, smask, query);
    const QuadrantRect rect = quadrant_rect(Quadrant::QueryTarget);
    for (int r = 0; r < rect.side; ++r) {
        for (int c = 0; c < rect.side; ++c) {
            noisy.pixels.at(rect.row0 + r, rect.col0 + c) = static_cast<float>(rng.uniform());
        }
    }
    GridF recon = vit_forward<float>(params, noisy.pixels, inference_mask(cfg.patch_grid()), nullptr);
    for (auto& v : recon.data) {
        v = std::clamp(v, 0.0f, 1.0f);
    }
    const GridF quad = extract_quadrant(Composite{std::move(recon), ""}, Quadrant::QueryTarget);
    BinaryMask pred_noisy(112, 112);
    for (size_t i = 0; i < quad.data.size(); ++i) {
        pred_noisy.data[i] = quad.data[i] >= 0.5f ? 1 : 0;
    }
    CHECK(pred == pred_noisy);
}

TEST_CASE("evaluate_run refuses an empty pair list") {
    const ModelParams<float> params = init_params<float>(toy_config(), 1);
    CHECK_THROWS_AS(evaluate_run(params, {}, ".", 0.5, 0, 0), Error);
    try {
        evaluate_run(params, {}, ".", 0.5, 0, 0);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyEvaluation);
    }
    CHECK_THROWS_AS(evaluate_run(params, {}, ".", 1.5, 0, 0), Error);
}

TEST_CASE("reports carry sorted rows, means, and serialize to JSON/CSV") {
    TempDir dir("report");
    MetricsReport report;
    report.per_pair = {{"b", 0.5, 0.5 / 1.5}, {"a", 1.0, 1.0}};
    std::sort(report.per_pair.begin(), report.per_pair.end(),
              [](const PairMetrics& x, const PairMetrics& y) { return x.pair_id < y.pair_id; });
    report.n_pairs = 2;
    report.mean_dice = 0.75;
    report.mean_iou = (0.5 / 1.5 + 1.0) / 2.0;
    report.threshold = 0.5;

    write_report_json(dir.file("report.json"), report);
    write_report_csv(dir.file("report.csv"), report);
    const std::string json_text = read_file(dir.file("report.json"));
    CHECK(json_text.find("\"mean_dice\": 0.75") != std::string::npos);
    const std::string csv_text = read_file(dir.file("report.csv"));
    CHECK(csv_text.find("pair_id,dice,iou") == 0);
    CHECK(csv_text.find("a,1.000000,1.000000") != std::string::npos);
}
