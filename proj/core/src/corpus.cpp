#include "demb/corpus.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "demb/error.hpp"
#include "demb/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace demb {

std::string to_string(SourceKind k) {
    switch (k) {
        case SourceKind::rfc: return "rfc";
        case SourceKind::vendor_manual: return "vendor_manual";
        case SourceKind::other: return "other";
    }
    return "other";
}

SourceKind source_kind_from_string(const std::string& s) {
    if (s == "rfc") return SourceKind::rfc;
    if (s == "vendor_manual") return SourceKind::vendor_manual;
    if (s == "other") return SourceKind::other;
    raise("ParseError", "unknown source_kind '" + s + "'");
}

void ChunkConfig::validate() const {
    if (min_chars == 0 || min_chars > max_chars)
        raise("BadConfig", "require 0 < min_chars <= max_chars");
    if (art_line_ratio < 0.0 || art_line_ratio > 1.0 || dedup_jaccard < 0.0 ||
        dedup_jaccard > 1.0 || min_alpha_ratio < 0.0 || min_alpha_ratio > 1.0)
        raise("BadConfig", "ratios must lie in [0,1]");
    if (shingle_len == 0) raise("BadConfig", "shingle_len must be positive");
}

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty() && cur.back() == '\r') cur.pop_back();
    lines.push_back(std::move(cur));
    return lines;
}

// Stray carriage returns count as whitespace here so cleaning normalizes them.
bool blankish(char c) { return ascii_space(c) || c == '\r'; }

bool whitespace_only(const std::string& line) {
    return std::all_of(line.begin(), line.end(), blankish);
}

double non_alnum_ratio(const std::string& line) {
    const auto cps = codepoints(line);
    if (cps.empty()) return 0.0;
    std::size_t non = 0;
    for (const auto& cp : cps) {
        if (!(cp.size() == 1 && ascii_alnum(cp[0]))) ++non;
    }
    return static_cast<double>(non) / static_cast<double>(cps.size());
}

std::string collapse_spaces(const std::string& line) {
    std::string out;
    out.reserve(line.size());
    bool in_run = false;
    for (char c : line) {
        if (blankish(c)) {
            in_run = true;
        } else {
            if (in_run && !out.empty()) out.push_back(' ');
            in_run = false;
            out.push_back(c);
        }
    }
    return out;
}

// "2.1 Scope" or "3. Overview"; returns the nesting level (count of numeric
// components) or 0 if the line is not a numbered heading.
std::size_t numbered_heading_level(const std::string& line) {
    std::size_t i = 0;
    std::size_t level = 0;
    while (true) {
        std::size_t start = i;
        while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
        if (i == start) return 0;
        ++level;
        if (i < line.size() && line[i] == '.') {
            if (i + 1 < line.size() && line[i + 1] >= '0' && line[i + 1] <= '9') {
                ++i;
                continue;
            }
            ++i;  // trailing dot, as in "1. Introduction"
        }
        break;
    }
    if (i >= line.size() || line[i] != ' ') return 0;
    while (i < line.size() && line[i] == ' ') ++i;
    return i < line.size() ? level : 0;
}

bool allcaps_heading(const std::string& line) {
    if (line.empty()) return false;
    bool has_upper = false;
    for (char c : line) {
        if (c >= 'a' && c <= 'z') return false;
        if (c >= 'A' && c <= 'Z') has_upper = true;
    }
    if (!has_upper) return false;
    return word_count(line) <= 8;
}

struct Heading {
    std::size_t level;
    std::string text;
};

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

// Sorted unique 64-bit shingle hashes; the basis for Jaccard overlap.
std::vector<std::uint64_t> shingle_hashes(const std::string& text, std::size_t shingle_len) {
    const auto cps = codepoints(text);
    std::vector<std::uint64_t> out;
    if (cps.size() < shingle_len) {
        out.push_back(fnv1a(text));
    } else {
        out.reserve(cps.size());
        for (std::size_t i = 0; i + shingle_len <= cps.size(); ++i) {
            const char* begin = cps[i].data();
            const char* end = cps[i + shingle_len - 1].data() + cps[i + shingle_len - 1].size();
            out.push_back(fnv1a(std::string_view(begin, static_cast<std::size_t>(end - begin))));
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double jaccard_sorted(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
    std::size_t inter = 0, i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
            ++inter;
            ++i;
            ++j;
        } else if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

std::string clean_text(const std::string& text, const ChunkConfig& cfg) {
    std::string no_nul;
    no_nul.reserve(text.size());
    for (char c : text) {
        if (c != '\0') no_nul.push_back(c);
    }

    std::vector<std::string> lines = split_lines(no_nul);
    std::vector<std::string> kept;
    kept.reserve(lines.size());
    for (auto& line : lines) {
        if (whitespace_only(line)) {
            kept.emplace_back();  // keep as a paragraph boundary
            continue;
        }
        if (non_alnum_ratio(line) > cfg.art_line_ratio) continue;
        kept.push_back(collapse_spaces(line));
    }

    // Runs of more than two blank lines shrink to a single blank line.
    std::vector<std::string> out;
    out.reserve(kept.size());
    std::size_t run = 0;
    for (auto& line : kept) {
        if (line.empty()) {
            ++run;
            continue;
        }
        if (run > 0) {
            const std::size_t emit = run > 2 ? 1 : run;
            for (std::size_t k = 0; k < emit; ++k) out.emplace_back();
            run = 0;
        }
        out.push_back(std::move(line));
    }
    if (run > 0) {
        const std::size_t emit = run > 2 ? 1 : run;
        for (std::size_t k = 0; k < emit; ++k) out.emplace_back();
    }

    std::string joined;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (i) joined.push_back('\n');
        joined += out[i];
    }
    return joined;
}

std::vector<Chunk> chunk_document(const RawDocument& doc, const ChunkConfig& cfg) {
    cfg.validate();
    if (doc.text.empty()) raise("EmptyDocument", "document '" + doc.doc_id + "' has no text");

    const std::vector<std::string> lines = split_lines(doc.text);

    std::vector<Heading> stack;
    struct Draft {
        std::vector<std::string> section_path;
        std::string text;
    };
    std::vector<Draft> drafts;

    std::string chunk_text;
    std::string para;

    auto path_of = [&stack]() {
        std::vector<std::string> p;
        p.reserve(stack.size());
        for (const auto& h : stack) p.push_back(h.text);
        return p;
    };
    auto close_para = [&]() {
        if (para.empty()) return;
        // Paragraph boundary splits only once max_chars would be passed.
        if (!chunk_text.empty() &&
            count_codepoints(chunk_text) + 2 + count_codepoints(para) > cfg.max_chars) {
            drafts.push_back({path_of(), chunk_text});
            chunk_text.clear();
        }
        if (!chunk_text.empty()) chunk_text += "\n\n";
        chunk_text += para;
        para.clear();
    };
    auto flush_chunk = [&]() {
        close_para();
        if (!chunk_text.empty()) {
            drafts.push_back({path_of(), chunk_text});
            chunk_text.clear();
        }
    };

    for (const auto& line : lines) {
        if (line.empty()) {
            close_para();
            continue;
        }
        const std::size_t num_level = numbered_heading_level(line);
        const bool caps = num_level == 0 && allcaps_heading(line);
        if (num_level > 0 || caps) {
            flush_chunk();
            const std::size_t level = caps ? 1 : num_level;
            while (!stack.empty() && stack.back().level >= level) stack.pop_back();
            stack.push_back({level, line});
            continue;
        }
        if (!para.empty()) para.push_back('\n');
        para += line;
    }
    flush_chunk();

    // Short chunks merge forward; the receiving chunk keeps its section path.
    std::vector<Draft> merged;
    std::string carry;
    for (std::size_t i = 0; i < drafts.size(); ++i) {
        std::string text = carry.empty() ? std::move(drafts[i].text)
                                         : carry + "\n\n" + drafts[i].text;
        carry.clear();
        if (count_codepoints(text) < cfg.min_chars && i + 1 < drafts.size()) {
            carry = std::move(text);
            continue;
        }
        merged.push_back({std::move(drafts[i].section_path), std::move(text)});
    }
    if (!merged.empty() && count_codepoints(merged.back().text) < cfg.min_chars &&
        merged.size() > 1) {
        auto last = std::move(merged.back());
        merged.pop_back();
        merged.back().text += "\n\n" + last.text;
    }

    std::vector<Chunk> chunks;
    chunks.reserve(merged.size());
    for (std::size_t i = 0; i < merged.size(); ++i) {
        Chunk c;
        std::ostringstream id;
        id << doc.doc_id << '#';
        id.width(4);
        id.fill('0');
        id << i;
        c.chunk_id = id.str();
        c.doc_id = doc.doc_id;
        c.section_path = std::move(merged[i].section_path);
        c.text = std::move(merged[i].text);
        c.char_len = count_codepoints(c.text);
        c.provenance = doc.metadata;
        c.provenance["doc_id"] = doc.doc_id;
        c.provenance["source_kind"] = to_string(doc.source_kind);
        chunks.push_back(std::move(c));
    }
    return chunks;
}

double shingle_jaccard(const std::string& a, const std::string& b, std::size_t shingle_len) {
    return jaccard_sorted(shingle_hashes(a, shingle_len), shingle_hashes(b, shingle_len));
}

std::vector<Chunk> dedup_chunks(const std::vector<Chunk>& chunks, const ChunkConfig& cfg) {
    cfg.validate();
    std::vector<std::vector<std::uint64_t>> sh;
    sh.reserve(chunks.size());
    for (const auto& c : chunks) sh.push_back(shingle_hashes(c.text, cfg.shingle_len));

    std::vector<bool> dropped(chunks.size(), false);
    for (std::size_t j = 1; j < chunks.size(); ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            const double lo = static_cast<double>(std::min(sh[i].size(), sh[j].size()));
            const double hi = static_cast<double>(std::max(sh[i].size(), sh[j].size()));
            if (hi > 0.0 && lo / hi < cfg.dedup_jaccard) continue;  // upper bound on Jaccard
            if (jaccard_sorted(sh[i], sh[j]) >= cfg.dedup_jaccard) {
                dropped[j] = true;
                break;
            }
        }
    }

    std::vector<Chunk> out;
    out.reserve(chunks.size());
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (!dropped[i]) out.push_back(chunks[i]);
    }
    return out;
}

std::vector<Chunk> filter_boilerplate(const std::vector<Chunk>& chunks, const ChunkConfig& cfg,
                                      FilterReport* report) {
    cfg.validate();
    FilterReport local;
    std::vector<Chunk> out;
    out.reserve(chunks.size());
    for (const auto& c : chunks) {
        if (c.char_len < cfg.min_chars) {
            ++local.removed_short;
            continue;
        }
        const auto cps = codepoints(c.text);
        std::size_t alpha = 0;
        for (const auto& cp : cps) {
            if (cp.size() == 1 && ascii_alpha(cp[0])) ++alpha;
        }
        const double ratio =
            cps.empty() ? 0.0 : static_cast<double>(alpha) / static_cast<double>(cps.size());
        if (ratio < cfg.min_alpha_ratio) {
            ++local.removed_low_alpha;
            continue;
        }
        bool blocked = false;
        for (const auto& prefix : cfg.prefix_blocklist) {
            if (c.text.compare(0, prefix.size(), prefix) == 0) {
                blocked = true;
                break;
            }
        }
        if (blocked) {
            ++local.removed_blocklist;
            continue;
        }
        ++local.kept;
        out.push_back(c);
    }
    if (report) *report = local;
    return out;
}

std::vector<Chunk> process_document(const RawDocument& doc, const ChunkConfig& cfg,
                                    FilterReport* report) {
    RawDocument cleaned = doc;
    cleaned.text = clean_text(doc.text, cfg);
    if (cleaned.text.empty())
        raise("EmptyDocument", "document '" + doc.doc_id + "' is empty after cleaning");
    auto chunks = chunk_document(cleaned, cfg);
    chunks = dedup_chunks(chunks, cfg);
    return filter_boilerplate(chunks, cfg, report);
}

void save_chunks(const std::vector<Chunk>& chunks, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise("IoError", "cannot open '" + path + "' for writing");
    for (const auto& c : chunks) {
        json j;
        j["chunk_id"] = c.chunk_id;
        j["doc_id"] = c.doc_id;
        j["section_path"] = c.section_path;
        j["text"] = c.text;
        j["provenance"] = c.provenance;
        out << j.dump() << '\n';
    }
    if (!out) raise("IoError", "write failed for '" + path + "'");
}

std::vector<Chunk> load_chunks(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise("IoError", "cannot open '" + path + "'");
    std::vector<Chunk> chunks;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("chunk_id") ||
            !j.contains("doc_id") || !j.contains("text"))
            raise("ParseError", "bad chunk record at " + path + ":" + std::to_string(lineno));
        Chunk c;
        c.chunk_id = j["chunk_id"].get<std::string>();
        c.doc_id = j["doc_id"].get<std::string>();
        if (j.contains("section_path"))
            c.section_path = j["section_path"].get<std::vector<std::string>>();
        c.text = j["text"].get<std::string>();
        c.char_len = count_codepoints(c.text);
        if (j.contains("provenance"))
            c.provenance = j["provenance"].get<std::map<std::string, std::string>>();
        chunks.push_back(std::move(c));
    }
    return chunks;
}

std::vector<RawDocument> read_corpus_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) raise("IoError", "corpus directory '" + dir + "' not found");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<RawDocument> docs;
    docs.reserve(files.size());
    for (const auto& p : files) {
        std::ifstream in(p, std::ios::binary);
        if (!in) raise("IoError", "cannot read '" + p.string() + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        RawDocument doc;
        doc.doc_id = p.stem().string();
        doc.text = ss.str();
        if (!is_valid_utf8(doc.text))
            raise("InvalidUtf8", "document '" + p.string() + "' is not valid UTF-8");

        const fs::path meta = p.parent_path() / (doc.doc_id + ".meta");
        if (fs::exists(meta)) {
            std::ifstream min(meta);
            std::string mline;
            while (std::getline(min, mline)) {
                const auto eq = mline.find('=');
                if (eq == std::string::npos || mline.empty() || mline[0] == '#') continue;
                doc.metadata[mline.substr(0, eq)] = mline.substr(eq + 1);
            }
        }
        if (auto it = doc.metadata.find("source_kind"); it != doc.metadata.end())
            doc.source_kind = source_kind_from_string(it->second);
        docs.push_back(std::move(doc));
    }
    return docs;
}

}  // namespace demb
