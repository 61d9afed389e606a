#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simicl/grid.hpp"

namespace simicl {

enum class Split { Train, Validation, Test };

const char* split_name(Split split);
Split split_from_name(const std::string& name);

struct SampleRecord {
    std::string sample_id;
    std::string image_path; // relative to the manifest directory
    std::string mask_path;
    std::string subject_id;
    Split split = Split::Train;
};

struct Manifest {
    std::vector<SampleRecord> records; // sorted by sample_id
    uint64_t created_seed = 0;
    std::string generator_version;
};

// JSON-lines manifest: one header object, then one record object per line.
void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

// Checks id uniqueness, sample_id ordering, and one-split-per-subject.
void validate_manifest(const Manifest& manifest);

std::vector<SampleRecord> records_of_split(const Manifest& manifest, Split split);

// Keeps a per-subject fraction of the train records, deterministic in seed.
// Other splits pass through untouched.
std::vector<SampleRecord> subset_train_records(const std::vector<SampleRecord>& train_records,
                                               double fraction, uint64_t seed);

// Image loading relative to a manifest directory; masks are binarized to {0,1}.
GridF load_image_f32(const std::string& root_dir, const std::string& rel_path);
GridU8 load_mask(const std::string& root_dir, const std::string& rel_path);

} // namespace simicl
