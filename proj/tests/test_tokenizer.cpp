#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "demb/error.hpp"
#include "demb/rng.hpp"
#include "demb/tokenizer.hpp"

using namespace demb;
namespace fs = std::filesystem;

namespace {

template <typename F>
std::string error_code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

std::string random_text(Rng& rng, std::size_t max_len) {
    static const std::vector<std::string> atoms = {
        "a",  "b", "c",  "x",    "handover", "gnb",  " ", " ",  "\t",
        "\n", "0", "\r", "\xc3\xa9",  // é
        "\xe6\x97\xa5",              // 日
        ".",  "-", "_"};
    std::string out;
    const std::size_t n = rng.uniform_int(max_len);
    for (std::size_t i = 0; i < n; ++i) out += atoms[rng.uniform_int(atoms.size())];
    return out;
}

}  // namespace

TEST_CASE("byte ids equal byte values") {
    const auto t = Tokenizer::train_bpe({"abab abab"}, 256);
    CHECK(t.vocab_size() == 256);
    CHECK(t.merges().empty());
    CHECK(t.tokenize(" ") == std::vector<std::uint32_t>{32});
    CHECK(t.tokenize("\t\n\r") == std::vector<std::uint32_t>({9, 10, 13}));
    CHECK(t.tokenize("ab") == std::vector<std::uint32_t>({97, 98}));
}

TEST_CASE("first merges on the abab corpus") {
    const auto t = Tokenizer::train_bpe({"abab abab"}, 258);
    REQUIRE(t.merges().size() == 2);
    CHECK(t.merges()[0] == std::pair<std::string, std::string>("a", "b"));
    CHECK(t.merges()[1] == std::pair<std::string, std::string>("ab", "ab"));
    CHECK(t.vocab_size() == 258);
    // the whole piece is now a single token
    CHECK(t.tokenize("abab").size() == 1);
    CHECK(t.token_string(t.tokenize("abab")[0]) == "abab");
    CHECK(t.tokenize("ab").size() == 1);
}

TEST_CASE("training stops when no pair repeats") {
    // every piece unique, all pair counts 1
    const auto t = Tokenizer::train_bpe({"abc def"}, 10000);
    CHECK(t.vocab_size() == 256);
    CHECK(t.merges().empty());
}

TEST_CASE("pair ties break by ascending lexicographic order") {
    // (c,b) and (a,b) both occur twice; ("a","b") sorts first
    const auto t = Tokenizer::train_bpe({"cb cb ab ab"}, 257);
    REQUIRE(t.merges().size() == 1);
    CHECK(t.merges()[0] == std::pair<std::string, std::string>("a", "b"));
}

TEST_CASE("training is deterministic") {
    const std::vector<std::string> corpus = {"the quick brown fox", "the slow brown dog",
                                             "quick quick brown"};
    const auto a = Tokenizer::train_bpe(corpus, 300);
    const auto b = Tokenizer::train_bpe(corpus, 300);
    CHECK(a.merges() == b.merges());
    REQUIRE(a.vocab_size() == b.vocab_size());
    for (std::uint32_t id = 0; id < a.vocab_size(); ++id)
        CHECK(a.token_string(id) == b.token_string(id));
}

TEST_CASE("train_bpe rejects bad input") {
    CHECK(error_code_of([] { Tokenizer::train_bpe({}, 300); }) == "CorpusEmpty");
    CHECK(error_code_of([] { Tokenizer::train_bpe({"x"}, 255); }) == "BadConfig");
}

TEST_CASE("tokenize of empty text is empty") {
    const auto t = Tokenizer::train_bpe({"abab abab"}, 258);
    CHECK(t.tokenize("").empty());
    CHECK(t.detokenize({}).empty());
}

TEST_CASE("round-trip holds on random mixed text") {
    const auto base = Tokenizer::train_bpe({"handover gnb handover gnb abab"}, 280);
    const auto [ext, info] = base.extend_vocab({"handover", "xyzzy"});
    Rng rng(2024);
    for (int iter = 0; iter < 200; ++iter) {
        const std::string text = random_text(rng, 40);
        CHECK(base.detokenize(base.tokenize(text)) == text);
        CHECK(ext.detokenize(ext.tokenize(text)) == text);
    }
}

TEST_CASE("extension adds atomic whole-word tokens and keeps base ids") {
    const auto base = Tokenizer::train_bpe({"aa bb aa bb cc"}, 260);
    const auto [ext, info] = base.extend_vocab({"zzz"});

    CHECK(info.id_offset == base.vocab_size());
    REQUIRE(info.new_terms == std::vector<std::string>{"zzz"});
    CHECK(info.shared_ids.size() == base.vocab_size());
    CHECK(ext.vocab_size() == base.vocab_size() + 1);

    for (std::uint32_t id = 0; id < base.vocab_size(); ++id)
        CHECK(ext.token_string(id) == base.token_string(id));

    const auto ids = ext.tokenize("zzz aa");
    REQUIRE(ids.size() >= 3);
    CHECK(ids[0] == info.id_offset);
    CHECK(ids[1] == 32);
    // a piece that merely contains the term is not matched
    CHECK(ext.tokenize("zzzq").size() > 1);
    // base segmentation of unrelated text is unchanged
    CHECK(ext.tokenize("aa bb") == base.tokenize("aa bb"));
}

TEST_CASE("extension terms already atomic are skipped") {
    const auto base = Tokenizer::train_bpe({"aa bb aa bb"}, 260);
    const auto [ext1, info1] = base.extend_vocab({"zzz"});
    const auto [ext2, info2] = ext1.extend_vocab({"zzz"});
    CHECK(info2.new_terms.empty());
    CHECK(info2.skipped_terms == std::vector<std::string>{"zzz"});
    CHECK(ext2.vocab_size() == ext1.vocab_size());
    // duplicates inside one call collapse the same way
    const auto [ext3, info3] = base.extend_vocab({"qqq", "qqq"});
    CHECK(info3.new_terms == std::vector<std::string>{"qqq"});
    CHECK(info3.skipped_terms == std::vector<std::string>{"qqq"});
}

TEST_CASE("extension rejects malformed terms") {
    const auto base = Tokenizer::train_bpe({"aa bb"}, 256);
    CHECK(error_code_of([&] { base.extend_vocab({""}); }) == "BadTerm");
    CHECK(error_code_of([&] { base.extend_vocab({"a b"}); }) == "BadTerm");
    CHECK(error_code_of([&] { base.extend_vocab({"a\nb"}); }) == "BadTerm");
}

TEST_CASE("extend with empty list returns the model unchanged") {
    const auto base = Tokenizer::train_bpe({"aa bb aa bb"}, 258);
    const auto [ext, info] = base.extend_vocab({});
    CHECK(ext.vocab_size() == base.vocab_size());
    CHECK(info.new_terms.empty());
    CHECK(info.id_offset == base.vocab_size());
}

TEST_CASE("segmentation monotonicity under extension") {
    const auto base = Tokenizer::train_bpe({"alpha beta gamma alpha beta"}, 300);
    const auto [ext, info] = base.extend_vocab({"alphabeta", "q0q0"});
    Rng rng(555);
    const std::vector<std::string> words = {"alpha", "beta", "alphabeta", "q0q0", "zz", "."};
    for (int iter = 0; iter < 100; ++iter) {
        std::string text;
        const std::size_t n = rng.uniform_int(8);
        bool has_term = false;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& w = words[rng.uniform_int(words.size())];
            if (w == "alphabeta" || w == "q0q0") has_term = true;
            if (!text.empty()) text += " ";
            text += w;
        }
        const auto nb = base.tokenize(text).size();
        const auto ne = ext.tokenize(text).size();
        if (has_term)
            CHECK(ne <= nb);
        else
            CHECK(ne == nb);
    }
}

TEST_CASE("model files round-trip including non-ASCII tokens and extension") {
    const auto base =
        Tokenizer::train_bpe({"h\xc3\xa9llo h\xc3\xa9llo h\xc3\xa9llo gnb gnb"}, 300);
    const auto [ext, info] = base.extend_vocab({"caf\xc3\xa9"});

    const fs::path dir = fs::temp_directory_path() / "demb_tok_rt";
    fs::create_directories(dir);
    const std::string path = (dir / "tok.json").string();
    ext.save(path);
    const auto back = Tokenizer::load(path);

    REQUIRE(back.vocab_size() == ext.vocab_size());
    for (std::uint32_t id = 0; id < ext.vocab_size(); ++id)
        CHECK(back.token_string(id) == ext.token_string(id));
    CHECK(back.merges() == ext.merges());
    REQUIRE(back.extension().has_value());
    CHECK(back.extension()->id_offset == ext.extension()->id_offset);
    CHECK(back.extension()->new_terms == ext.extension()->new_terms);

    Rng rng(77);
    for (int iter = 0; iter < 50; ++iter) {
        const std::string text = random_text(rng, 30);
        CHECK(back.tokenize(text) == ext.tokenize(text));
    }
    fs::remove_all(dir);
}

TEST_CASE("load rejects corrupt model files") {
    const fs::path dir = fs::temp_directory_path() / "demb_tok_bad";
    fs::create_directories(dir);
    const std::string path = (dir / "tok.json").string();

    std::ofstream(path) << "{not json";
    CHECK(error_code_of([&] { Tokenizer::load(path); }) == "ParseError");
    std::ofstream(path) << "{\"vocab\": {}}";
    CHECK(error_code_of([&] { Tokenizer::load(path); }) == "FormatError");
    // non-dense ids
    std::ofstream(path) << "{\"vocab\": {\"a\": 0, \"b\": 5}, \"merges\": [], \"version\": 1}";
    CHECK(error_code_of([&] { Tokenizer::load(path); }) == "FormatError");
    CHECK(error_code_of([&] { Tokenizer::load((dir / "nope.json").string()); }) == "IoError");
    fs::remove_all(dir);
}

TEST_CASE("detokenize rejects out-of-range ids") {
    const auto t = Tokenizer::train_bpe({"aa"}, 256);
    CHECK(error_code_of([&] { t.detokenize({9999}); }) == "IdOutOfRange");
    CHECK(error_code_of([&] { t.token_string(9999); }) == "IdOutOfRange");
}
