#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "demb/encoder.hpp"
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

std::vector<std::uint32_t> random_ids(Rng& rng, std::size_t V, std::size_t max_len) {
    std::vector<std::uint32_t> ids(1 + rng.uniform_int(max_len));
    for (auto& id : ids) id = static_cast<std::uint32_t>(rng.uniform_int(V));
    return ids;
}

}  // namespace

TEST_CASE("embed outputs are unit norm") {
    const auto p = init_params({40, 8, 16}, 11);
    Rng rng(5);
    for (int iter = 0; iter < 100; ++iter) {
        const auto e = embed(p, random_ids(rng, 40, 12));
        CHECK(std::abs(e.norm() - 1.0) < 1e-9);
        for (Eigen::Index i = 0; i < e.size(); ++i) CHECK(std::isfinite(e(i)));
    }
}

TEST_CASE("zero weights with b2 = e1 always embed to e1") {
    EncoderParams p;
    p.emb = Eigen::MatrixXd::Zero(5, 4);
    p.w1 = Eigen::MatrixXd::Zero(4, 3);
    p.b1 = Eigen::VectorXd::Zero(3);
    p.w2 = Eigen::MatrixXd::Zero(3, 4);
    p.b2 = Eigen::VectorXd::Zero(4);
    p.b2(0) = 1.0;
    for (const auto& ids : std::vector<std::vector<std::uint32_t>>{{0}, {1, 2}, {4, 4, 3}}) {
        const auto e = embed(p, ids);
        CHECK(e(0) == doctest::Approx(1.0));
        CHECK(e.segment(1, 3).norm() == doctest::Approx(0.0));
    }
}

TEST_CASE("single-token pooling equals the embedding row") {
    const auto p = init_params({10, 6, 4}, 3);
    const auto f = encoder_forward(p, {7});
    CHECK((f.z - p.emb.row(7).transpose()).norm() == 0.0);
    // repeating the token leaves the mean unchanged ((r+r)/2 is exact in IEEE)
    const auto f2 = encoder_forward(p, {7, 7});
    CHECK((f2.e - f.e).norm() == 0.0);
    const auto f3 = encoder_forward(p, {7, 7, 7});
    CHECK((f3.e - f.e).norm() < 1e-14);
}

TEST_CASE("embed is invariant to token order, bit for bit") {
    const auto p = init_params({30, 8, 8}, 21);
    Rng rng(9);
    for (int iter = 0; iter < 50; ++iter) {
        auto ids = random_ids(rng, 30, 10);
        auto shuffled = ids;
        rng.shuffle(shuffled);
        const auto a = embed(p, ids);
        const auto b = embed(p, shuffled);
        CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
    }
}

TEST_CASE("embed rejects bad input") {
    const auto p = init_params({10, 4, 4}, 1);
    CHECK(error_code_of([&] { embed(p, {}); }) == "EmptyInput");
    CHECK(error_code_of([&] { embed(p, {10}); }) == "IdOutOfRange");

    EncoderParams zero;
    zero.emb = Eigen::MatrixXd::Zero(3, 4);
    zero.w1 = Eigen::MatrixXd::Zero(4, 2);
    zero.b1 = Eigen::VectorXd::Zero(2);
    zero.w2 = Eigen::MatrixXd::Zero(2, 4);
    zero.b2 = Eigen::VectorXd::Zero(4);
    CHECK(error_code_of([&] { embed(zero, {0}); }) == "ZeroNorm");
}

TEST_CASE("embed_batch equals elementwise embed and reports item errors") {
    const auto p = init_params({25, 6, 6}, 2);
    Rng rng(31);
    std::vector<std::vector<std::uint32_t>> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(random_ids(rng, 25, 9));
    const auto out = embed_batch(p, batch);
    REQUIRE(out.size() == batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto single = embed(p, batch[i]);
        CHECK(std::memcmp(out[i].data(), single.data(), sizeof(double) * single.size()) == 0);
    }
    CHECK(embed_batch(p, {}).empty());

    try {
        embed_batch(p, {{1}, {}});
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == "EmptyInput");
        CHECK(std::string(e.what()).find("batch item 1") != std::string::npos);
    }
}

TEST_CASE("cosine similarity frozen values") {
    Eigen::VectorXd x(2), y(2), z(2);
    x << 1.0, 0.0;
    y << 0.0, 1.0;
    z << std::sqrt(2.0) / 2.0, std::sqrt(2.0) / 2.0;
    CHECK(cosine_similarity(x, x) == doctest::Approx(1.0));
    CHECK(cosine_distance(x, x) == doctest::Approx(0.0));
    CHECK(cosine_similarity(x, y) == doctest::Approx(0.0));
    CHECK(cosine_distance(x, y) == doctest::Approx(1.0));
    CHECK(cosine_similarity(x, z) == doctest::Approx(0.70710678));
    CHECK(error_code_of([&] {
              Eigen::VectorXd w(3);
              w << 1, 0, 0;
              cosine_similarity(x, w);
          }) == "ShapeMismatch");
}

TEST_CASE("init_params is seeded and shaped") {
    const auto a = init_params({50, 32, 16}, 42);
    const auto b = init_params({50, 32, 16}, 42);
    const auto c = init_params({50, 32, 16}, 43);
    CHECK(bit_identical(a, b));
    CHECK(!bit_identical(a, c));
    CHECK(a.b1.norm() == 0.0);
    CHECK(a.b2.norm() == 0.0);

    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto* m : {&a.emb, &a.w1, &a.w2}) {
        for (Eigen::Index i = 0; i < m->size(); ++i) {
            sum += m->data()[i];
            sq += m->data()[i] * m->data()[i];
            ++n;
        }
    }
    const double mean = sum / static_cast<double>(n);
    const double stddev = std::sqrt(sq / static_cast<double>(n) - mean * mean);
    CHECK(std::abs(mean) < 0.005);
    CHECK(stddev == doctest::Approx(0.02).epsilon(0.15));

    CHECK(error_code_of([] { init_params({0, 4, 4}, 1); }) == "BadDims");
    CHECK(error_code_of([] { init_params({4, 0, 4}, 1); }) == "BadDims");
    CHECK(error_code_of([] { init_params({4, 1, 4}, 1); }) == "BadDims");
    CHECK(error_code_of([] { init_params({4, 4, 0}, 1); }) == "BadDims");
}

TEST_CASE("align_embeddings preserves base rows bit for bit") {
    const auto p = init_params({20, 8, 8}, 7);
    VocabExtension ext;
    ext.id_offset = 20;
    ext.new_terms = {"gnb", "amf"};

    const auto a = align_embeddings(p, ext, 99);
    const auto b = align_embeddings(p, ext, 99);
    const auto c = align_embeddings(p, ext, 100);
    REQUIRE(a.emb.rows() == 22);
    CHECK(std::memcmp(a.emb.topRows(20).eval().data(), p.emb.data(),
                      sizeof(double) * p.emb.size()) == 0);
    CHECK(bit_identical(a, b));
    CHECK(!bit_identical(a, c));
    CHECK((a.emb.bottomRows(2) - c.emb.bottomRows(2)).norm() != 0.0);
    CHECK(std::memcmp(a.w1.data(), p.w1.data(), sizeof(double) * p.w1.size()) == 0);
    CHECK(std::memcmp(a.w2.data(), p.w2.data(), sizeof(double) * p.w2.size()) == 0);

    VocabExtension empty;
    empty.id_offset = 20;
    CHECK(bit_identical(align_embeddings(p, empty, 1), p));

    VocabExtension wrong;
    wrong.id_offset = 19;
    wrong.new_terms = {"x"};
    CHECK(error_code_of([&] { align_embeddings(p, wrong, 1); }) == "OffsetMismatch");
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    const auto p = init_params({15, 6, 10}, 123);
    const fs::path dir = fs::temp_directory_path() / "demb_ckpt";
    fs::create_directories(dir);
    const std::string path = (dir / "enc.bin").string();
    save_checkpoint(p, path);
    const auto q = load_checkpoint(path);
    CHECK(bit_identical(p, q));
    CHECK(checkpoint_id(p) == checkpoint_id(q));
    CHECK(checkpoint_id(p).size() == 16);
    fs::remove_all(dir);
}

TEST_CASE("checkpoint_id tracks content") {
    auto p = init_params({8, 4, 4}, 5);
    const auto before = checkpoint_id(p);
    p.w1(0, 0) += 1e-12;
    CHECK(checkpoint_id(p) != before);
}

TEST_CASE("checkpoint loading distinguishes format and shape damage") {
    const auto p = init_params({6, 4, 4}, 9);
    const fs::path dir = fs::temp_directory_path() / "demb_ckpt_bad";
    fs::create_directories(dir);
    const std::string path = (dir / "enc.bin").string();
    save_checkpoint(p, path);

    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        bytes = ss.str();
    }

    auto write_variant = [&](const std::string& data) {
        const std::string vp = (dir / "variant.bin").string();
        std::ofstream out(vp, std::ios::binary);
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        out.close();
        return vp;
    };

    // cut inside the header
    CHECK(error_code_of([&] { load_checkpoint(write_variant(bytes.substr(0, 10))); }) ==
          "FormatError");
    // wrong magic
    {
        std::string v = bytes;
        v[0] = 'X';
        CHECK(error_code_of([&] { load_checkpoint(write_variant(v)); }) == "FormatError");
    }
    // wrong version
    {
        std::string v = bytes;
        v[4] = 9;
        CHECK(error_code_of([&] { load_checkpoint(write_variant(v)); }) == "FormatError");
    }
    // dims header edited upward: payload no longer matches
    {
        std::string v = bytes;
        v[8] = 7;  // V: 6 -> 7
        CHECK(error_code_of([&] { load_checkpoint(write_variant(v)); }) == "ShapeMismatch");
    }
    // dims header edited to an invalid value
    {
        std::string v = bytes;
        v[16] = 0;  // d: 4 -> 0
        CHECK(error_code_of([&] { load_checkpoint(write_variant(v)); }) == "ShapeMismatch");
    }
    CHECK(error_code_of([&] { load_checkpoint((dir / "gone.bin").string()); }) == "IoError");
    fs::remove_all(dir);
}
