#include "simicl/pairing.hpp"

#include <json.hpp>

#include <fstream>
#include <unordered_map>

#include "simicl/rng.hpp"

namespace simicl {

namespace {

using json = nlohmann::ordered_json;

constexpr uint64_t kPoolTag = 0x504f4f4cULL;     // "POOL"
constexpr uint64_t kTrainPairTag = 0x5452504bULL; // "TRPK"
constexpr uint64_t kEvalPairTag = 0x4556504bULL;  // "EVPK"

std::string make_pair_id(const SampleRecord& query, const SampleRecord& support) {
    return query.sample_id + "@" + support.sample_id;
}

} // namespace

std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split_pools(const Manifest& manifest,
                                                                            uint64_t seed) {
    std::vector<SampleRecord> train = records_of_split(manifest, Split::Train);
    if (train.empty()) {
        throw Error(ErrorCode::EmptySplit, "train split is empty; cannot form pools");
    }
    Rng rng = Rng::stream(seed, kPoolTag);
    rng.shuffle(train);
    const size_t support_size = (train.size() + 1) / 2;
    std::vector<SampleRecord> support(train.begin(), train.begin() + support_size);
    std::vector<SampleRecord> query(train.begin() + support_size, train.end());
    return {std::move(support), std::move(query)};
}

std::vector<SamplePair> pair_training(const std::vector<SampleRecord>& support_pool,
                                      const std::vector<SampleRecord>& query_pool, uint64_t seed) {
    if (support_pool.empty() || query_pool.empty()) {
        throw Error(ErrorCode::EmptyPool, "pair_training needs non-empty support and query pools");
    }
    std::vector<SampleRecord> shuffled = support_pool;
    Rng rng = Rng::stream(seed, kTrainPairTag);
    rng.shuffle(shuffled);

    std::vector<SamplePair> pairs;
    pairs.reserve(query_pool.size());
    for (size_t i = 0; i < query_pool.size(); ++i) {
        const SampleRecord& support = shuffled[i % shuffled.size()];
        const SampleRecord& query = query_pool[i];
        pairs.push_back(SamplePair{support, query, make_pair_id(query, support)});
    }
    return pairs;
}

std::vector<SamplePair> pair_eval(const std::vector<SampleRecord>& test_records,
                                  const std::vector<SampleRecord>& validation_records,
                                  uint64_t seed) {
    if (validation_records.empty()) {
        throw Error(ErrorCode::EmptyPool, "pair_eval needs a non-empty validation set");
    }
    if (test_records.empty()) {
        throw Error(ErrorCode::EmptyPool, "pair_eval needs a non-empty test set");
    }
    Rng rng = Rng::stream(seed, kEvalPairTag);
    std::vector<SamplePair> pairs;
    pairs.reserve(test_records.size());
    for (const auto& query : test_records) {
        const SampleRecord& support = validation_records[rng.below(validation_records.size())];
        pairs.push_back(SamplePair{support, query, make_pair_id(query, support)});
    }
    return pairs;
}

void write_pairs(const std::string& path, const std::vector<SamplePair>& pairs, uint64_t seed,
                 const std::string& kind) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open pair file for writing: " + path);
    }
    json header;
    header["version"] = 1;
    header["seed"] = seed;
    header["kind"] = kind;
    out << header.dump() << "\n";
    for (const auto& pair : pairs) {
        json line;
        line["pair_id"] = pair.pair_id;
        line["support_id"] = pair.support.sample_id;
        line["query_id"] = pair.query.sample_id;
        out << line.dump() << "\n";
    }
    if (!out) {
        throw Error(ErrorCode::IoError, "short pair file write: " + path);
    }
}

std::vector<SamplePair> read_pairs(const std::string& path, const Manifest& manifest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open pair file for reading: " + path);
    }
    std::unordered_map<std::string, const SampleRecord*> by_id;
    for (const auto& rec : manifest.records) {
        by_id.emplace(rec.sample_id, &rec);
    }
    auto resolve = [&](const std::string& id) -> const SampleRecord& {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw Error(ErrorCode::ParseError, "pair references unknown sample_id: " + id);
        }
        return *it->second;
    };

    std::vector<SamplePair> pairs;
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
            throw Error(ErrorCode::ParseError, std::string("bad pair line: ") + e.what());
        }
        if (!have_header) {
            have_header = true;
            continue;
        }
        SamplePair pair;
        pair.pair_id = value.at("pair_id").get<std::string>();
        pair.support = resolve(value.at("support_id").get<std::string>());
        pair.query = resolve(value.at("query_id").get<std::string>());
        pairs.push_back(std::move(pair));
    }
    if (!have_header) {
        throw Error(ErrorCode::ParseError, "pair file missing header: " + path);
    }
    return pairs;
}

} // namespace simicl
