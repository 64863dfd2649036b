#include "demb/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "demb/error.hpp"

using nlohmann::json;

namespace demb {

namespace {

bool ws_byte(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

std::uint64_t pair_key(std::uint32_t l, std::uint32_t r) {
    return (static_cast<std::uint64_t>(l) << 32) | r;
}

// Token strings are raw byte sequences; files store them with each byte mapped
// to code point U+0000..U+00FF so the JSON stays valid UTF-8.
std::string bytes_to_utf8(const std::string& bytes) {
    std::string out;
    out.reserve(bytes.size());
    for (char c : bytes) {
        const auto b = static_cast<unsigned char>(c);
        if (b < 0x80) {
            out.push_back(c);
        } else {
            out.push_back(static_cast<char>(0xC0 | (b >> 6)));
            out.push_back(static_cast<char>(0x80 | (b & 0x3F)));
        }
    }
    return out;
}

std::string utf8_to_bytes(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto b = static_cast<unsigned char>(s[i]);
        if (b < 0x80) {
            out.push_back(s[i]);
            i += 1;
        } else if ((b & 0xE0) == 0xC0 && i + 1 < s.size()) {
            const auto b2 = static_cast<unsigned char>(s[i + 1]);
            const unsigned cp = ((b & 0x1Fu) << 6) | (b2 & 0x3Fu);
            if (cp > 0xFF) raise("FormatError", "token string holds a code point above U+00FF");
            out.push_back(static_cast<char>(cp));
            i += 2;
        } else {
            raise("FormatError", "token string holds a code point above U+00FF");
        }
    }
    return out;
}

// Replaces every adjacent (l, r) in-place, left to right without overlap.
void apply_merge(std::vector<std::uint32_t>& seq, std::uint32_t l, std::uint32_t r,
                 std::uint32_t merged) {
    std::size_t w = 0;
    for (std::size_t i = 0; i < seq.size();) {
        if (i + 1 < seq.size() && seq[i] == l && seq[i + 1] == r) {
            seq[w++] = merged;
            i += 2;
        } else {
            seq[w++] = seq[i++];
        }
    }
    seq.resize(w);
}

}  // namespace

Tokenizer Tokenizer::byte_base() {
    Tokenizer t;
    t.id_to_token_.reserve(256);
    for (unsigned b = 0; b < 256; ++b) {
        t.id_to_token_.emplace_back(1, static_cast<char>(b));
        t.token_to_id_.emplace(t.id_to_token_.back(), b);
    }
    return t;
}

void Tokenizer::rebuild_ranks() {
    pair_rank_.clear();
    pair_rank_.reserve(merges_.size());
    for (std::size_t rank = 0; rank < merges_.size(); ++rank) {
        const auto l = token_to_id_.find(merges_[rank].first);
        const auto r = token_to_id_.find(merges_[rank].second);
        const auto m = token_to_id_.find(merges_[rank].first + merges_[rank].second);
        if (l == token_to_id_.end() || r == token_to_id_.end() || m == token_to_id_.end())
            raise("FormatError", "merge rule references a token missing from the vocab");
        pair_rank_.emplace(pair_key(l->second, r->second),
                           std::make_pair(static_cast<std::uint32_t>(rank), m->second));
    }
}

Tokenizer Tokenizer::train_bpe(const std::vector<std::string>& corpus, std::size_t vocab_size) {
    if (corpus.empty()) raise("CorpusEmpty", "training corpus has no documents");
    if (vocab_size < 256) raise("BadConfig", "vocab_size must be at least 256");

    Tokenizer t = byte_base();

    // Unique pieces with multiplicities; ordered so pair counting is stable.
    std::map<std::string, long long> piece_counts;
    for (const auto& doc : corpus) {
        std::size_t i = 0;
        while (i < doc.size()) {
            while (i < doc.size() && ws_byte(doc[i])) ++i;
            std::size_t j = i;
            while (j < doc.size() && !ws_byte(doc[j])) ++j;
            if (j > i) ++piece_counts[doc.substr(i, j - i)];
            i = j;
        }
    }

    std::vector<std::vector<std::uint32_t>> seqs;
    std::vector<long long> mults;
    seqs.reserve(piece_counts.size());
    for (const auto& [piece, count] : piece_counts) {
        std::vector<std::uint32_t> seq;
        seq.reserve(piece.size());
        for (char c : piece) seq.push_back(static_cast<unsigned char>(c));
        seqs.push_back(std::move(seq));
        mults.push_back(count);
    }

    while (t.id_to_token_.size() < vocab_size) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, long long> counts;
        for (std::size_t s = 0; s < seqs.size(); ++s) {
            const auto& seq = seqs[s];
            for (std::size_t i = 0; i + 1 < seq.size(); ++i)
                counts[{seq[i], seq[i + 1]}] += mults[s];
        }
        if (counts.empty()) break;

        long long best_count = 0;
        std::pair<std::uint32_t, std::uint32_t> best{};
        std::pair<std::string, std::string> best_str;
        for (const auto& [pr, count] : counts) {
            if (count < best_count) continue;
            std::pair<std::string, std::string> str{t.id_to_token_[pr.first],
                                                    t.id_to_token_[pr.second]};
            if (count > best_count || str < best_str) {
                best_count = count;
                best = pr;
                best_str = std::move(str);
            }
        }
        if (best_count < 2) break;

        const std::string merged_str = best_str.first + best_str.second;
        std::uint32_t merged_id;
        if (const auto it = t.token_to_id_.find(merged_str); it != t.token_to_id_.end()) {
            merged_id = it->second;  // same string reachable through two merge paths
        } else {
            merged_id = static_cast<std::uint32_t>(t.id_to_token_.size());
            t.id_to_token_.push_back(merged_str);
            t.token_to_id_.emplace(merged_str, merged_id);
        }
        t.merges_.emplace_back(std::move(best_str.first), std::move(best_str.second));
        for (auto& seq : seqs) apply_merge(seq, best.first, best.second, merged_id);
    }

    t.rebuild_ranks();
    return t;
}

std::vector<std::uint32_t> Tokenizer::merge_piece(const std::string& piece) const {
    if (const auto it = token_to_id_.find(piece); it != token_to_id_.end()) return {it->second};
    std::vector<std::uint32_t> seq;
    seq.reserve(piece.size());
    for (char c : piece) seq.push_back(static_cast<unsigned char>(c));
    while (seq.size() > 1) {
        std::uint32_t best_rank = UINT32_MAX;
        std::uint32_t merged_id = 0;
        std::pair<std::uint32_t, std::uint32_t> best{};
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
            const auto it = pair_rank_.find(pair_key(seq[i], seq[i + 1]));
            if (it != pair_rank_.end() && it->second.first < best_rank) {
                best_rank = it->second.first;
                merged_id = it->second.second;
                best = {seq[i], seq[i + 1]};
            }
        }
        if (best_rank == UINT32_MAX) break;
        apply_merge(seq, best.first, best.second, merged_id);
    }
    return seq;
}

std::vector<std::uint32_t> Tokenizer::tokenize(const std::string& text) const {
    if (id_to_token_.empty()) raise("NotTrained", "tokenizer has an empty vocab");
    std::vector<std::uint32_t> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (ws_byte(text[i])) {
            out.push_back(static_cast<unsigned char>(text[i]));
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && !ws_byte(text[j])) ++j;
        const auto ids = merge_piece(text.substr(i, j - i));
        out.insert(out.end(), ids.begin(), ids.end());
        i = j;
    }
    return out;
}

std::string Tokenizer::detokenize(const std::vector<std::uint32_t>& ids) const {
    std::string out;
    for (const auto id : ids) {
        if (id >= id_to_token_.size())
            raise("IdOutOfRange", "token id " + std::to_string(id) + " exceeds vocab");
        out += id_to_token_[id];
    }
    return out;
}

const std::string& Tokenizer::token_string(std::uint32_t id) const {
    if (id >= id_to_token_.size())
        raise("IdOutOfRange", "token id " + std::to_string(id) + " exceeds vocab");
    return id_to_token_[id];
}

std::optional<std::uint32_t> Tokenizer::find_token(const std::string& token) const {
    const auto it = token_to_id_.find(token);
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
}

std::pair<Tokenizer, VocabExtension> Tokenizer::extend_vocab(
    const std::vector<std::string>& terms) const {
    Tokenizer ext = *this;
    VocabExtension result;
    result.id_offset = id_to_token_.size();
    result.shared_ids.resize(id_to_token_.size());
    for (std::uint32_t i = 0; i < result.shared_ids.size(); ++i) result.shared_ids[i] = i;

    for (const auto& term : terms) {
        if (term.empty() || std::any_of(term.begin(), term.end(), ws_byte))
            raise("BadTerm", "extension term must be non-empty without whitespace: '" + term +
                                 "'");
        if (ext.token_to_id_.count(term)) {
            result.skipped_terms.push_back(term);
            continue;
        }
        const auto id = static_cast<std::uint32_t>(ext.id_to_token_.size());
        ext.id_to_token_.push_back(term);
        ext.token_to_id_.emplace(term, id);
        result.new_terms.push_back(term);
    }
    ext.extension_ = result;
    return {std::move(ext), std::move(result)};
}

void Tokenizer::save(const std::string& path) const {
    json j;
    json vocab = json::object();
    for (std::size_t id = 0; id < id_to_token_.size(); ++id)
        vocab[bytes_to_utf8(id_to_token_[id])] = id;
    j["vocab"] = std::move(vocab);
    json merges = json::array();
    for (const auto& [l, r] : merges_)
        merges.push_back(json::array({bytes_to_utf8(l), bytes_to_utf8(r)}));
    j["merges"] = std::move(merges);
    j["byte_fallback"] = true;
    j["version"] = format_version;
    if (extension_) {
        j["extension"] = {{"id_offset", extension_->id_offset}, {"new_terms", json::array()}};
        for (const auto& t : extension_->new_terms)
            j["extension"]["new_terms"].push_back(bytes_to_utf8(t));
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) raise("IoError", "cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) raise("IoError", "write failed for '" + path + "'");
}

Tokenizer Tokenizer::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise("IoError", "cannot open '" + path + "'");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) raise("ParseError", "'" + path + "' is not valid JSON");
    if (!j.is_object() || !j.contains("vocab") || !j.contains("merges") ||
        !j.contains("version"))
        raise("FormatError", "'" + path + "' lacks required tokenizer fields");
    if (j["version"].get<std::uint32_t>() != format_version)
        raise("FormatError", "unsupported tokenizer version in '" + path + "'");

    Tokenizer t;
    const auto& vocab = j["vocab"];
    t.id_to_token_.resize(vocab.size());
    std::vector<bool> seen(vocab.size(), false);
    for (const auto& [key, val] : vocab.items()) {
        const auto id = val.get<std::uint64_t>();
        if (id >= t.id_to_token_.size() || seen[id])
            raise("FormatError", "vocab ids must be dense 0..V-1 in '" + path + "'");
        seen[id] = true;
        t.id_to_token_[id] = utf8_to_bytes(key);
    }
    for (std::size_t id = 0; id < t.id_to_token_.size(); ++id)
        t.token_to_id_.emplace(t.id_to_token_[id], static_cast<std::uint32_t>(id));
    if (t.token_to_id_.size() != t.id_to_token_.size())
        raise("FormatError", "vocab holds duplicate token strings in '" + path + "'");

    for (const auto& m : j["merges"]) {
        if (!m.is_array() || m.size() != 2)
            raise("FormatError", "merge entries must be [left, right] in '" + path + "'");
        t.merges_.emplace_back(utf8_to_bytes(m[0].get<std::string>()),
                               utf8_to_bytes(m[1].get<std::string>()));
    }
    if (j.contains("extension")) {
        VocabExtension ext;
        ext.id_offset = j["extension"]["id_offset"].get<std::size_t>();
        for (const auto& term : j["extension"]["new_terms"])
            ext.new_terms.push_back(utf8_to_bytes(term.get<std::string>()));
        ext.shared_ids.resize(ext.id_offset);
        for (std::uint32_t i = 0; i < ext.id_offset; ++i) ext.shared_ids[i] = i;
        t.extension_ = std::move(ext);
    }
    t.rebuild_ranks();
    return t;
}

}  // namespace demb
