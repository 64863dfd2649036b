#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "demb/corpus.hpp"

namespace demb {

class Tokenizer;

// One (a, p, n) training example. All texts non-empty, anchor != positive,
// positive != negative.
struct Triplet {
    std::string id;
    std::string anchor;
    std::string positive;
    std::string negative;
    std::optional<std::string> topic;
};

struct QueryPassagePair {
    std::string query;
    std::string gold_chunk_id;
    std::vector<std::string> hard_negative_ids;
    std::map<std::string, std::string> provenance;
};

struct FieldStats {
    double avg_tokens = 0.0;
    std::size_t min_tokens = 0;
    std::size_t max_tokens = 0;
};

// Token statistics per triplet field plus the distinct-token count over all
// fields, relative to whichever tokenizer is supplied.
struct DatasetStats {
    FieldStats anchor;
    FieldStats positive;
    FieldStats negative;
    std::size_t vocab_size = 0;
};

struct MiningConfig {
    std::size_t shingle_len = 5;
    double positive_guard = 0.9;  // candidates this close to the positive are excluded
};

void save_triplets(const std::vector<Triplet>& triplets, const std::string& path);
std::vector<Triplet> load_triplets(const std::string& path);

DatasetStats compute_stats(const std::vector<Triplet>& triplets, const Tokenizer& tok);

// Candidates ranked by descending token-set Jaccard with the anchor
// (whitespace-split, ASCII-lowercased), near-duplicates of the positive
// excluded, ties by ascending chunk_id.
std::vector<std::string> mine_hard_negatives(const std::string& anchor,
                                             const std::string& positive,
                                             const std::vector<Chunk>& candidates,
                                             std::size_t k, const MiningConfig& cfg = {});

// Offline query generator: "What does <t1> specify regarding <t2>?" from the
// two highest-TF-IDF content terms of the chunk, IDF taken over the corpus
// given at construction.
class StubQueryGenerator {
public:
    explicit StubQueryGenerator(const std::vector<Chunk>& corpus);
    std::string generate(const Chunk& chunk) const;

private:
    std::map<std::string, double> idf_;
    double n_docs_ = 1.0;
};

struct GeneratedQuery {
    std::string query;
    std::map<std::string, std::string> provenance;
};

using QueryGenerator = std::function<GeneratedQuery(const Chunk&)>;

QueryGenerator make_stub_querygen(const StubQueryGenerator& gen);

// One pair per chunk, negatives mined against the query text with the gold
// chunk excluded. The seed is recorded in provenance; construction itself is
// fully deterministic.
std::vector<QueryPassagePair> build_retrieval_benchmark(const std::vector<Chunk>& chunks,
                                                        const QueryGenerator& querygen,
                                                        std::size_t negatives_per_query,
                                                        std::uint64_t seed,
                                                        const MiningConfig& cfg = {});

void save_benchmark(const std::vector<QueryPassagePair>& pairs, const std::string& path);
std::vector<QueryPassagePair> load_benchmark(const std::string& path);

}  // namespace demb
