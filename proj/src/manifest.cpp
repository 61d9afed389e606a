#include "simicl/manifest.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "simicl/png_io.hpp"
#include "simicl/rng.hpp"

namespace simicl {

namespace {

using json = nlohmann::ordered_json;

constexpr uint64_t kSubsetTag = 0x535542534554ULL; // "SUBSET"

} // namespace

const char* split_name(Split split) {
    switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
    }
    return "train";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "validation") return Split::Validation;
    if (name == "test") return Split::Test;
    throw Error(ErrorCode::ParseError, "unknown split name: " + name);
}

void write_manifest(const std::string& path, const Manifest& manifest) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open manifest for writing: " + path);
    }
    json header;
    header["version"] = manifest.generator_version;
    header["created_seed"] = manifest.created_seed;
    out << header.dump() << "\n";
    for (const auto& rec : manifest.records) {
        json line;
        line["sample_id"] = rec.sample_id;
        line["image_path"] = rec.image_path;
        line["mask_path"] = rec.mask_path;
        line["subject_id"] = rec.subject_id;
        line["split"] = split_name(rec.split);
        out << line.dump() << "\n";
    }
    if (!out) {
        throw Error(ErrorCode::IoError, "short manifest write: " + path);
    }
}

Manifest read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open manifest for reading: " + path);
    }
    Manifest manifest;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        json value;
        try {
            value = json::parse(line);
        } catch (const std::exception& e) {
            throw Error(ErrorCode::ParseError, std::string("bad manifest line: ") + e.what());
        }
        if (!have_header) {
            manifest.generator_version = value.at("version").get<std::string>();
            manifest.created_seed = value.at("created_seed").get<uint64_t>();
            have_header = true;
            continue;
        }
        SampleRecord rec;
        rec.sample_id = value.at("sample_id").get<std::string>();
        rec.image_path = value.at("image_path").get<std::string>();
        rec.mask_path = value.at("mask_path").get<std::string>();
        rec.subject_id = value.at("subject_id").get<std::string>();
        rec.split = split_from_name(value.at("split").get<std::string>());
        manifest.records.push_back(std::move(rec));
    }
    if (!have_header) {
        throw Error(ErrorCode::ParseError, "manifest missing header line: " + path);
    }
    return manifest;
}

void validate_manifest(const Manifest& manifest) {
    std::unordered_set<std::string> ids;
    std::unordered_map<std::string, Split> subject_split;
    const SampleRecord* prev = nullptr;
    for (const auto& rec : manifest.records) {
        if (!ids.insert(rec.sample_id).second) {
            throw Error(ErrorCode::ParseError, "duplicate sample_id: " + rec.sample_id);
        }
        if (prev && !(prev->sample_id < rec.sample_id)) {
            throw Error(ErrorCode::ParseError, "manifest not sorted by sample_id at: " + rec.sample_id);
        }
        auto [it, inserted] = subject_split.emplace(rec.subject_id, rec.split);
        if (!inserted && it->second != rec.split) {
            throw Error(ErrorCode::ParseError, "subject spans multiple splits: " + rec.subject_id);
        }
        prev = &rec;
    }
}

std::vector<SampleRecord> records_of_split(const Manifest& manifest, Split split) {
    std::vector<SampleRecord> out;
    for (const auto& rec : manifest.records) {
        if (rec.split == split) {
            out.push_back(rec);
        }
    }
    return out;
}

std::vector<SampleRecord> subset_train_records(const std::vector<SampleRecord>& train_records,
                                               double fraction, uint64_t seed) {
    if (fraction >= 1.0) {
        return train_records;
    }
    if (fraction <= 0.0) {
        throw Error(ErrorCode::InvalidRatio, "subset fraction must be in (0, 1]");
    }
    std::unordered_map<std::string, std::vector<size_t>> by_subject;
    std::vector<std::string> subject_order;
    for (size_t i = 0; i < train_records.size(); ++i) {
        auto& bucket = by_subject[train_records[i].subject_id];
        if (bucket.empty()) {
            subject_order.push_back(train_records[i].subject_id);
        }
        bucket.push_back(i);
    }
    std::vector<SampleRecord> out;
    uint64_t subject_counter = 0;
    for (const auto& subject : subject_order) {
        auto& indices = by_subject[subject];
        const size_t keep = std::max<size_t>(
            1, static_cast<size_t>(std::lround(fraction * static_cast<double>(indices.size()))));
        Rng rng = Rng::stream(seed, kSubsetTag, subject_counter++);
        rng.shuffle(indices);
        indices.resize(std::min(keep, indices.size()));
        std::sort(indices.begin(), indices.end());
        for (size_t idx : indices) {
            out.push_back(train_records[idx]);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const SampleRecord& a, const SampleRecord& b) { return a.sample_id < b.sample_id; });
    return out;
}

GridF load_image_f32(const std::string& root_dir, const std::string& rel_path) {
    const auto full = std::filesystem::path(root_dir) / rel_path;
    return to_float(read_png_gray8(full.string()));
}

GridU8 load_mask(const std::string& root_dir, const std::string& rel_path) {
    const auto full = std::filesystem::path(root_dir) / rel_path;
    return binarize_u8(read_png_gray8(full.string()));
}

} // namespace simicl
