#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "simicl/manifest.hpp"

namespace simicl {

struct SamplePair {
    SampleRecord support;
    SampleRecord query;
    std::string pair_id;
};

// Partitions the train split into disjoint support/query pools whose sizes
// differ by at most one. Deterministic in (manifest, seed).
std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split_pools(const Manifest& manifest,
                                                                            uint64_t seed);

// One pair per query-pool record; supports come from a seeded shuffle of the
// support pool, cycled when the query pool is larger.
std::vector<SamplePair> pair_training(const std::vector<SampleRecord>& support_pool,
                                      const std::vector<SampleRecord>& query_pool, uint64_t seed);

// One pair per test record; the support is drawn uniformly from the
// validation records so no test image can leak into its own prompt.
std::vector<SamplePair> pair_eval(const std::vector<SampleRecord>& test_records,
                                  const std::vector<SampleRecord>& validation_records,
                                  uint64_t seed);

// JSON-lines pair file: header {version, seed, kind}, then
// {pair_id, support_id, query_id} per line.
void write_pairs(const std::string& path, const std::vector<SamplePair>& pairs, uint64_t seed,
                 const std::string& kind);
std::vector<SamplePair> read_pairs(const std::string& path, const Manifest& manifest);

} // namespace simicl
