#include "demb/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "demb/error.hpp"
#include "demb/text.hpp"
#include "demb/tokenizer.hpp"

using nlohmann::json;

namespace demb {

namespace {

void check_triplet(const Triplet& t) {
    if (t.anchor.empty() || t.positive.empty() || t.negative.empty())
        raise("InvariantViolation", "triplet '" + t.id + "' has an empty field");
    if (t.anchor == t.positive)
        raise("InvariantViolation", "triplet '" + t.id + "' has anchor == positive");
    if (t.positive == t.negative)
        raise("InvariantViolation", "triplet '" + t.id + "' has positive == negative");
}

std::set<std::string> lower_token_set(const std::string& text) {
    std::set<std::string> out;
    for (const auto& w : split_words(text)) out.insert(to_lower(w));
    return out;
}

double set_jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

FieldStats field_stats(const std::vector<std::size_t>& counts) {
    FieldStats s;
    s.min_tokens = *std::min_element(counts.begin(), counts.end());
    s.max_tokens = *std::max_element(counts.begin(), counts.end());
    std::size_t sum = 0;
    for (const auto c : counts) sum += c;
    s.avg_tokens = static_cast<double>(sum) / static_cast<double>(counts.size());
    return s;
}

}  // namespace

void save_triplets(const std::vector<Triplet>& triplets, const std::string& path) {
    for (const auto& t : triplets) check_triplet(t);
    std::ofstream out(path, std::ios::binary);
    if (!out) raise("IoError", "cannot open '" + path + "' for writing");
    for (const auto& t : triplets) {
        json j;
        j["id"] = t.id;
        j["anchor"] = t.anchor;
        j["positive"] = t.positive;
        j["negative"] = t.negative;
        j["topic"] = t.topic ? json(*t.topic) : json(nullptr);
        out << j.dump() << '\n';
    }
    if (!out) raise("IoError", "write failed for '" + path + "'");
}

std::vector<Triplet> load_triplets(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise("IoError", "cannot open '" + path + "'");
    std::vector<Triplet> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("anchor") ||
            !j.contains("positive") || !j.contains("negative"))
            raise("ParseError",
                  "bad triplet record at " + path + ":" + std::to_string(lineno));
        Triplet t;
        t.id = j["id"].get<std::string>();
        t.anchor = j["anchor"].get<std::string>();
        t.positive = j["positive"].get<std::string>();
        t.negative = j["negative"].get<std::string>();
        if (j.contains("topic") && !j["topic"].is_null())
            t.topic = j["topic"].get<std::string>();
        check_triplet(t);
        out.push_back(std::move(t));
    }
    return out;
}

DatasetStats compute_stats(const std::vector<Triplet>& triplets, const Tokenizer& tok) {
    if (triplets.empty()) raise("EmptyDataset", "no triplets to measure");
    std::vector<std::size_t> na, np, nn;
    std::unordered_set<std::uint32_t> vocab;
    for (const auto& t : triplets) {
        for (const auto* field : {&t.anchor, &t.positive, &t.negative}) {
            const auto ids = tok.tokenize(*field);
            vocab.insert(ids.begin(), ids.end());
            if (field == &t.anchor)
                na.push_back(ids.size());
            else if (field == &t.positive)
                np.push_back(ids.size());
            else
                nn.push_back(ids.size());
        }
    }
    DatasetStats s;
    s.anchor = field_stats(na);
    s.positive = field_stats(np);
    s.negative = field_stats(nn);
    s.vocab_size = vocab.size();
    return s;
}

std::vector<std::string> mine_hard_negatives(const std::string& anchor,
                                             const std::string& positive,
                                             const std::vector<Chunk>& candidates,
                                             std::size_t k, const MiningConfig& cfg) {
    if (k == 0) raise("BadConfig", "k must be >= 1");
    const auto anchor_tokens = lower_token_set(anchor);

    struct Scored {
        double score;
        const Chunk* chunk;
    };
    std::vector<Scored> scored;
    scored.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (shingle_jaccard(c.text, positive, cfg.shingle_len) >= cfg.positive_guard) continue;
        scored.push_back({set_jaccard(anchor_tokens, lower_token_set(c.text)), &c});
    }
    if (scored.empty())
        raise("NoCandidates", "every candidate is excluded as a near-duplicate of the positive");

    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.chunk->chunk_id < b.chunk->chunk_id;
    });
    std::vector<std::string> out;
    out.reserve(std::min(k, scored.size()));
    for (std::size_t i = 0; i < scored.size() && i < k; ++i)
        out.push_back(scored[i].chunk->chunk_id);
    return out;
}

StubQueryGenerator::StubQueryGenerator(const std::vector<Chunk>& corpus) {
    // idf_ holds document frequencies until the cutover below
    for (const auto& c : corpus)
        for (const auto& t : lower_token_set(c.text)) idf_[t] += 1.0;
    const double n = std::max<double>(1.0, static_cast<double>(corpus.size()));
    for (auto& [term, df] : idf_) df = std::log(n / df);
    n_docs_ = n;
}

std::string StubQueryGenerator::generate(const Chunk& chunk) const {
    std::map<std::string, std::size_t> tf;
    for (const auto& w : split_words(chunk.text)) ++tf[to_lower(w)];
    if (tf.empty()) raise("EmptyChunk", "chunk '" + chunk.chunk_id + "' has no tokens");

    auto has_letter = [](const std::string& s) {
        return std::any_of(s.begin(), s.end(), [](char c) { return ascii_alpha(c); });
    };
    bool any_letters = false;
    for (const auto& [term, count] : tf)
        if (has_letter(term)) any_letters = true;

    // top two terms by tf-idf; unseen terms read as maximally rare; ties go to
    // the lexicographically smaller term
    std::string t1, t2;
    double s1 = -1.0, s2 = -1.0;
    for (const auto& [term, count] : tf) {
        if (any_letters && !has_letter(term)) continue;
        const auto it = idf_.find(term);
        const double idf = it != idf_.end() ? it->second : std::log(n_docs_);
        const double score = static_cast<double>(count) * idf;
        if (score > s1 || (score == s1 && term < t1)) {
            t2 = std::move(t1);
            s2 = s1;
            t1 = term;
            s1 = score;
        } else if (score > s2 || (score == s2 && term < t2)) {
            t2 = term;
            s2 = score;
        }
    }
    if (t2.empty()) t2 = t1;  // single-term chunk
    return "What does " + t1 + " specify regarding " + t2 + "?";
}

QueryGenerator make_stub_querygen(const StubQueryGenerator& gen) {
    return [&gen](const Chunk& chunk) {
        GeneratedQuery q;
        q.query = gen.generate(chunk);
        q.provenance["generator"] = "stub";
        return q;
    };
}

std::vector<QueryPassagePair> build_retrieval_benchmark(const std::vector<Chunk>& chunks,
                                                        const QueryGenerator& querygen,
                                                        std::size_t negatives_per_query,
                                                        std::uint64_t seed,
                                                        const MiningConfig& cfg) {
    if (chunks.size() < negatives_per_query + 1)
        raise("CorpusTooSmall", "need at least negatives_per_query + 1 chunks");

    std::vector<QueryPassagePair> out;
    out.reserve(chunks.size());
    for (const auto& gold : chunks) {
        GeneratedQuery gen = querygen(gold);
        if (word_count(gen.query) > 20)
            raise("InvariantViolation",
                  "generated query exceeds 20 words for chunk '" + gold.chunk_id + "'");
        QueryPassagePair pair;
        pair.query = std::move(gen.query);
        pair.gold_chunk_id = gold.chunk_id;
        if (negatives_per_query > 0) {
            std::vector<Chunk> candidates;
            candidates.reserve(chunks.size() - 1);
            for (const auto& c : chunks)
                if (c.chunk_id != gold.chunk_id) candidates.push_back(c);
            pair.hard_negative_ids =
                mine_hard_negatives(pair.query, gold.text, candidates, negatives_per_query, cfg);
        }
        pair.provenance = std::move(gen.provenance);
        pair.provenance["seed"] = std::to_string(seed);
        out.push_back(std::move(pair));
    }
    return out;
}

namespace {

void check_pair(const QueryPassagePair& p) {
    for (const auto& id : p.hard_negative_ids)
        if (id == p.gold_chunk_id)
            raise("InvariantViolation",
                  "gold chunk '" + p.gold_chunk_id + "' appears among its hard negatives");
    if (word_count(p.query) > 20)
        raise("InvariantViolation", "query for '" + p.gold_chunk_id + "' exceeds 20 words");
}

}  // namespace

void save_benchmark(const std::vector<QueryPassagePair>& pairs, const std::string& path) {
    for (const auto& p : pairs) check_pair(p);
    std::ofstream out(path, std::ios::binary);
    if (!out) raise("IoError", "cannot open '" + path + "' for writing");
    for (const auto& p : pairs) {
        json j;
        j["query"] = p.query;
        j["gold_chunk_id"] = p.gold_chunk_id;
        j["hard_negative_ids"] = p.hard_negative_ids;
        j["provenance"] = p.provenance;
        out << j.dump() << '\n';
    }
    if (!out) raise("IoError", "write failed for '" + path + "'");
}

std::vector<QueryPassagePair> load_benchmark(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise("IoError", "cannot open '" + path + "'");
    std::vector<QueryPassagePair> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("query") ||
            !j.contains("gold_chunk_id") || !j.contains("hard_negative_ids"))
            raise("ParseError",
                  "bad benchmark record at " + path + ":" + std::to_string(lineno));
        QueryPassagePair p;
        p.query = j["query"].get<std::string>();
        p.gold_chunk_id = j["gold_chunk_id"].get<std::string>();
        p.hard_negative_ids = j["hard_negative_ids"].get<std::vector<std::string>>();
        if (j.contains("provenance"))
            p.provenance = j["provenance"].get<std::map<std::string, std::string>>();
        check_pair(p);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace demb
