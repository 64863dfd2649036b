#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace demb {

// Result of a vocabulary extension. New term ids occupy
// id_offset..id_offset+|new_terms|-1; shared_ids are the untouched base ids.
struct VocabExtension {
    std::vector<std::string> new_terms;
    std::size_t id_offset = 0;
    std::vector<std::uint32_t> shared_ids;
    std::vector<std::string> skipped_terms;  // already atomic in the base vocab
};

// Byte-level BPE tokenizer. Ids 0..255 are the raw bytes, merge products and
// extension terms follow densely. Models are immutable once trained; extension
// produces a new model. Any byte sequence round-trips exactly.
class Tokenizer {
public:
    Tokenizer() = default;

    // Standard BPE: most frequent adjacent pair merges first, ties broken by
    // ascending lexicographic (left, right) token strings; stops at vocab_size
    // or when no pair occurs at least twice. Pairs never span whitespace.
    static Tokenizer train_bpe(const std::vector<std::string>& corpus, std::size_t vocab_size);

    // Whitespace bytes pass through as byte tokens; each non-whitespace piece
    // that is itself a vocab entry becomes that single token, otherwise merges
    // apply greedily in rank order.
    std::vector<std::uint32_t> tokenize(const std::string& text) const;
    std::string detokenize(const std::vector<std::uint32_t>& ids) const;

    // Adds whole-word atomic tokens. Terms already atomic are skipped and
    // reported; empty or whitespace-containing terms raise BadTerm.
    std::pair<Tokenizer, VocabExtension> extend_vocab(const std::vector<std::string>& terms) const;

    std::size_t vocab_size() const { return id_to_token_.size(); }
    const std::string& token_string(std::uint32_t id) const;
    std::optional<std::uint32_t> find_token(const std::string& token) const;
    const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
    bool byte_fallback() const { return true; }
    const std::optional<VocabExtension>& extension() const { return extension_; }

    void save(const std::string& path) const;
    static Tokenizer load(const std::string& path);

    static constexpr std::uint32_t format_version = 1;

private:
    static Tokenizer byte_base();
    void rebuild_ranks();
    std::vector<std::uint32_t> merge_piece(const std::string& piece) const;

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, std::uint32_t> token_to_id_;
    std::vector<std::pair<std::string, std::string>> merges_;
    std::optional<VocabExtension> extension_;

    // (left_id, right_id) -> (rank, merged_id)
    std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>> pair_rank_;
};

}  // namespace demb
