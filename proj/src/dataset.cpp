#include "simicl/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "simicl/png_io.hpp"
#include "simicl/rng.hpp"
#include "simicl/synthetic.hpp"

namespace simicl {

namespace {

constexpr const char* kGeneratorVersion = "simicl-synth-1";
constexpr uint64_t kSubjectTag = 0x53554244ULL; // "SUBJ"

std::string format_id(const char* prefix, int index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%05d", prefix, index);
    return buf;
}

// Subject sizes of 3-10 with a remainder never smaller than 3 (when the split
// itself has at least 3 records).
int draw_subject_size(Rng& rng, int remaining) {
    if (remaining <= 10) {
        return remaining;
    }
    const int hi = std::min(10, remaining - 3);
    return 3 + static_cast<int>(rng.below(static_cast<uint64_t>(hi - 3 + 1)));
}

} // namespace

Manifest build_dataset(const std::string& out_dir, const SplitCounts& counts, uint64_t seed,
                       int side) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "images", ec);
    fs::create_directories(fs::path(out_dir) / "masks", ec);
    if (ec) {
        throw Error(ErrorCode::IoError, "cannot create dataset directories under " + out_dir);
    }

    Manifest manifest;
    manifest.created_seed = seed;
    manifest.generator_version = kGeneratorVersion;

    const std::pair<Split, int> plan[] = {
        {Split::Train, counts.train},
        {Split::Validation, counts.validation},
        {Split::Test, counts.test},
    };

    int subject_counter = 0;
    for (const auto& [split, count] : plan) {
        Rng subject_rng = Rng::stream(seed, kSubjectTag, static_cast<uint64_t>(split));
        int remaining = count;
        int local_index = 0;
        while (remaining > 0) {
            const int subject_size = draw_subject_size(subject_rng, remaining);
            const std::string subject_id = format_id("subj", subject_counter);
            for (int f = 0; f < subject_size; ++f) {
                SampleRecord rec;
                rec.sample_id = format_id(split_name(split), local_index++);
                rec.subject_id = subject_id;
                rec.split = split;
                rec.image_path = "images/" + rec.sample_id + ".png";
                rec.mask_path = "masks/" + rec.sample_id + ".png";

                // Index blocks of 16 align generator subjects with manifest
                // subjects, so frames of one subject share base anatomy.
                const uint32_t sample_index = static_cast<uint32_t>(subject_counter) * 16u +
                                              static_cast<uint32_t>(f);
                const SyntheticSample sample = generate_synthetic_sample(seed, sample_index, side);
                GridU8 mask255(sample.mask.rows, sample.mask.cols);
                for (size_t i = 0; i < sample.mask.data.size(); ++i) {
                    mask255.data[i] = sample.mask.data[i] ? 255 : 0;
                }
                write_png_gray8((fs::path(out_dir) / rec.image_path).string(), quantize_u8(sample.image));
                write_png_gray8((fs::path(out_dir) / rec.mask_path).string(), mask255);
                manifest.records.push_back(std::move(rec));
            }
            remaining -= subject_size;
            ++subject_counter;
        }
    }

    std::sort(manifest.records.begin(), manifest.records.end(),
              [](const SampleRecord& a, const SampleRecord& b) { return a.sample_id < b.sample_id; });
    write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), manifest);
    return manifest;
}

} // namespace simicl
