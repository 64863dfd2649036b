#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace demb {

enum class SourceKind { rfc, vendor_manual, other };

std::string to_string(SourceKind k);
SourceKind source_kind_from_string(const std::string& s);

struct RawDocument {
    std::string doc_id;
    SourceKind source_kind = SourceKind::other;
    std::string text;
    std::map<std::string, std::string> metadata;
};

// The retrieval unit: a provenance-tagged passage of one source document.
struct Chunk {
    std::string chunk_id;
    std::string doc_id;
    std::vector<std::string> section_path;
    std::string text;
    std::size_t char_len = 0;  // code points, kept equal to the text
    std::map<std::string, std::string> provenance;
};

struct ChunkConfig {
    std::size_t min_chars = 200;
    std::size_t max_chars = 2000;
    double art_line_ratio = 0.7;   // drop lines above this non-alphanumeric ratio
    double dedup_jaccard = 0.9;    // drop later chunk at or above this shingle overlap
    std::size_t shingle_len = 5;   // character shingle length for dedup
    double min_alpha_ratio = 0.4;  // boilerplate filter: alphabetic-character floor
    std::vector<std::string> prefix_blocklist = {"Copyright", "Table of Contents",
                                                 "Status of This Memo"};

    void validate() const;
};

// Removes NULs, drops ASCII-art lines (non-alphanumeric ratio above
// art_line_ratio), collapses space/tab runs to one space and runs of more
// than two blank lines to a single blank line. Idempotent.
std::string clean_text(const std::string& text, const ChunkConfig& cfg = {});

// Splits cleaned text at numbered headings ("2.1 Scope"), short all-caps
// headings, and blank lines once a chunk would pass max_chars. Heading lines
// become section_path entries, not chunk text. Chunks below min_chars are
// merged into the following chunk; a short trailing chunk merges backward.
std::vector<Chunk> chunk_document(const RawDocument& doc, const ChunkConfig& cfg);

// Keep-first near-duplicate removal by character-shingle Jaccard.
std::vector<Chunk> dedup_chunks(const std::vector<Chunk>& chunks, const ChunkConfig& cfg);

struct FilterReport {
    std::size_t removed_short = 0;
    std::size_t removed_low_alpha = 0;
    std::size_t removed_blocklist = 0;
    std::size_t kept = 0;
};

std::vector<Chunk> filter_boilerplate(const std::vector<Chunk>& chunks, const ChunkConfig& cfg,
                                      FilterReport* report = nullptr);

// Jaccard similarity of the two texts' character shingle sets. Texts shorter
// than shingle_len contribute themselves as a single shingle.
double shingle_jaccard(const std::string& a, const std::string& b, std::size_t shingle_len);

// Full pipeline over one document: clean, chunk, dedup, filter.
std::vector<Chunk> process_document(const RawDocument& doc, const ChunkConfig& cfg,
                                    FilterReport* report = nullptr);

// JSON Lines persistence (fields chunk_id, doc_id, section_path, text, provenance).
void save_chunks(const std::vector<Chunk>& chunks, const std::string& path);
std::vector<Chunk> load_chunks(const std::string& path);

// Reads one document per *.txt file in a directory (doc_id = file stem) with
// an optional key=value sidecar <doc_id>.meta. Rejects invalid UTF-8.
std::vector<RawDocument> read_corpus_dir(const std::string& dir);

}  // namespace demb
