#include "demb/encoder.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "demb/error.hpp"
#include "demb/rng.hpp"
#include "demb/tokenizer.hpp"

namespace demb {

namespace {

void check_dims(const EncoderDims& dims) {
    if (dims.V == 0 || dims.d < 2 || dims.h == 0)
        raise("BadDims", "need V >= 1, d >= 2, h >= 1");
}

void append_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_f64(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    append_u64(buf, bits);
}

void append_matrix_row_major(std::string& buf, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) append_f64(buf, m(r, c));
}

void append_vector(std::string& buf, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) append_f64(buf, v(i));
}

std::string serialize_params(const EncoderParams& p) {
    std::string buf;
    const auto dims = p.dims();
    buf.reserve(24 + 8 * (dims.V * dims.d + dims.d * dims.h + dims.h + dims.h * dims.d + dims.d));
    buf += "DEMB";
    append_u32(buf, checkpoint_version);
    append_u64(buf, dims.V);
    append_u64(buf, dims.d);
    append_u64(buf, dims.h);
    append_matrix_row_major(buf, p.emb);
    append_matrix_row_major(buf, p.w1);
    append_vector(buf, p.b1);
    append_matrix_row_major(buf, p.w2);
    append_vector(buf, p.b2);
    return buf;
}

struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;

    bool remaining(std::size_t n) const { return buf.size() - pos >= n; }
    std::uint32_t read_u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t read_u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    double read_f64() {
        const std::uint64_t bits = read_u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

EncoderParams init_params(const EncoderDims& dims, std::uint64_t seed) {
    check_dims(dims);
    Rng rng(seed);
    EncoderParams p;
    p.emb.resize(static_cast<Eigen::Index>(dims.V), static_cast<Eigen::Index>(dims.d));
    p.w1.resize(static_cast<Eigen::Index>(dims.d), static_cast<Eigen::Index>(dims.h));
    p.b1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims.h));
    p.w2.resize(static_cast<Eigen::Index>(dims.h), static_cast<Eigen::Index>(dims.d));
    p.b2 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims.d));
    // row-major fill order so the draw sequence matches the checkpoint layout
    for (Eigen::Index r = 0; r < p.emb.rows(); ++r)
        for (Eigen::Index c = 0; c < p.emb.cols(); ++c) p.emb(r, c) = rng.gaussian(0.0, 0.02);
    for (Eigen::Index r = 0; r < p.w1.rows(); ++r)
        for (Eigen::Index c = 0; c < p.w1.cols(); ++c) p.w1(r, c) = rng.gaussian(0.0, 0.02);
    for (Eigen::Index r = 0; r < p.w2.rows(); ++r)
        for (Eigen::Index c = 0; c < p.w2.cols(); ++c) p.w2(r, c) = rng.gaussian(0.0, 0.02);
    return p;
}

EncoderForward encoder_forward(const EncoderParams& params,
                               const std::vector<std::uint32_t>& token_ids) {
    if (token_ids.empty()) raise("EmptyInput", "cannot embed an empty token sequence");
    const auto V = params.emb.rows();
    // Accumulation runs in sorted-id order so permutation invariance is exact
    // down to the bit, not just up to float reassociation.
    std::vector<std::uint32_t> sorted = token_ids;
    std::sort(sorted.begin(), sorted.end());
    EncoderForward f;
    f.z = Eigen::VectorXd::Zero(params.emb.cols());
    for (const auto id : sorted) {
        if (static_cast<Eigen::Index>(id) >= V)
            raise("IdOutOfRange",
                  "token id " + std::to_string(id) + " outside vocab of " + std::to_string(V));
        f.z += params.emb.row(static_cast<Eigen::Index>(id)).transpose();
    }
    f.z /= static_cast<double>(token_ids.size());
    f.a = params.w1.transpose() * f.z + params.b1;
    f.u = f.a.array().tanh();
    f.v = f.z + params.w2.transpose() * f.u + params.b2;
    f.v_norm = f.v.norm();
    if (f.v_norm == 0.0) raise("ZeroNorm", "pre-normalization vector has zero length");
    f.e = f.v / f.v_norm;
    return f;
}

Eigen::VectorXd embed(const EncoderParams& params, const std::vector<std::uint32_t>& token_ids) {
    return encoder_forward(params, token_ids).e;
}

std::vector<Eigen::VectorXd> embed_batch(const EncoderParams& params,
                                         const std::vector<std::vector<std::uint32_t>>& batch) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        try {
            out.push_back(embed(params, batch[i]));
        } catch (const Error& e) {
            raise(e.code(), "batch item " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

double cosine_similarity(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) raise("ShapeMismatch", "cosine operands differ in dimension");
    return std::clamp(x.dot(y), -1.0, 1.0);
}

double cosine_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return 1.0 - cosine_similarity(x, y);
}

EncoderParams align_embeddings(const EncoderParams& params, const VocabExtension& ext,
                               std::uint64_t seed) {
    const auto dims = params.dims();
    if (ext.id_offset != dims.V)
        raise("OffsetMismatch", "extension offset " + std::to_string(ext.id_offset) +
                                    " does not match vocab size " + std::to_string(dims.V));
    EncoderParams out = params;
    const auto extra = static_cast<Eigen::Index>(ext.new_terms.size());
    if (extra == 0) return out;
    out.emb.conservativeResize(params.emb.rows() + extra, Eigen::NoChange);
    Rng rng(seed);
    for (Eigen::Index r = params.emb.rows(); r < out.emb.rows(); ++r)
        for (Eigen::Index c = 0; c < out.emb.cols(); ++c) out.emb(r, c) = rng.gaussian(0.0, 0.02);
    return out;
}

void save_checkpoint(const EncoderParams& params, const std::string& path) {
    const std::string buf = serialize_params(params);
    std::ofstream out(path, std::ios::binary);
    if (!out) raise("IoError", "cannot open '" + path + "' for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) raise("IoError", "write failed for '" + path + "'");
}

EncoderParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise("IoError", "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string buf = ss.str();

    ByteReader r{buf};
    if (!r.remaining(4 + 4 + 3 * 8)) raise("FormatError", "'" + path + "' ends mid-header");
    if (buf.compare(0, 4, "DEMB") != 0)
        raise("FormatError", "'" + path + "' lacks the checkpoint magic");
    r.pos = 4;
    if (r.read_u32() != checkpoint_version)
        raise("FormatError", "unsupported checkpoint version in '" + path + "'");
    EncoderDims dims;
    dims.V = r.read_u64();
    dims.d = r.read_u64();
    dims.h = r.read_u64();
    if (dims.V == 0 || dims.d < 2 || dims.h == 0)
        raise("ShapeMismatch", "checkpoint dims are invalid in '" + path + "'");
    const std::size_t want =
        8 * (dims.V * dims.d + dims.d * dims.h + dims.h + dims.h * dims.d + dims.d);
    if (buf.size() - r.pos != want)
        raise("ShapeMismatch", "checkpoint payload does not match its dims header");

    EncoderParams p;
    p.emb.resize(static_cast<Eigen::Index>(dims.V), static_cast<Eigen::Index>(dims.d));
    p.w1.resize(static_cast<Eigen::Index>(dims.d), static_cast<Eigen::Index>(dims.h));
    p.b1.resize(static_cast<Eigen::Index>(dims.h));
    p.w2.resize(static_cast<Eigen::Index>(dims.h), static_cast<Eigen::Index>(dims.d));
    p.b2.resize(static_cast<Eigen::Index>(dims.d));
    for (Eigen::Index i = 0; i < p.emb.rows(); ++i)
        for (Eigen::Index c = 0; c < p.emb.cols(); ++c) p.emb(i, c) = r.read_f64();
    for (Eigen::Index i = 0; i < p.w1.rows(); ++i)
        for (Eigen::Index c = 0; c < p.w1.cols(); ++c) p.w1(i, c) = r.read_f64();
    for (Eigen::Index i = 0; i < p.b1.size(); ++i) p.b1(i) = r.read_f64();
    for (Eigen::Index i = 0; i < p.w2.rows(); ++i)
        for (Eigen::Index c = 0; c < p.w2.cols(); ++c) p.w2(i, c) = r.read_f64();
    for (Eigen::Index i = 0; i < p.b2.size(); ++i) p.b2(i) = r.read_f64();
    return p;
}

std::string checkpoint_id(const EncoderParams& params) {
    const std::uint64_t h = fnv1a(serialize_params(params));
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

bool bit_identical(const EncoderParams& a, const EncoderParams& b) {
    auto same_m = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
        return x.rows() == y.rows() && x.cols() == y.cols() &&
               (x.size() == 0 ||
                std::memcmp(x.data(), y.data(), sizeof(double) * x.size()) == 0);
    };
    auto same_v = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        return x.size() == y.size() &&
               (x.size() == 0 ||
                std::memcmp(x.data(), y.data(), sizeof(double) * x.size()) == 0);
    };
    return same_m(a.emb, b.emb) && same_m(a.w1, b.w1) && same_v(a.b1, b.b1) &&
           same_m(a.w2, b.w2) && same_v(a.b2, b.b2);
}

}  // namespace demb
