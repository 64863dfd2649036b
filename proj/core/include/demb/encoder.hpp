#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace demb {

struct VocabExtension;

struct EncoderDims {
    std::size_t V = 0;  // vocab rows in emb
    std::size_t d = 64;
    std::size_t h = 128;
};

// Mean-pooled residual MLP encoder. emb is V×d; w1 d×h; b1 h; w2 h×d; b2 d.
// Treated as immutable once built; the trainer works on its own copy.
struct EncoderParams {
    Eigen::MatrixXd emb;
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;

    EncoderDims dims() const {
        return {static_cast<std::size_t>(emb.rows()), static_cast<std::size_t>(emb.cols()),
                static_cast<std::size_t>(b1.size())};
    }
};

// Intermediate activations kept for backpropagation:
// z = mean emb row, a = z·w1 + b1, u = tanh(a), v = z + u·w2 + b2, e = v/‖v‖.
struct EncoderForward {
    Eigen::VectorXd z, a, u, v, e;
    double v_norm = 0.0;
};

EncoderParams init_params(const EncoderDims& dims, std::uint64_t seed);

EncoderForward encoder_forward(const EncoderParams& params,
                               const std::vector<std::uint32_t>& token_ids);
Eigen::VectorXd embed(const EncoderParams& params, const std::vector<std::uint32_t>& token_ids);
std::vector<Eigen::VectorXd> embed_batch(const EncoderParams& params,
                                         const std::vector<std::vector<std::uint32_t>>& batch);

double cosine_similarity(const Eigen::VectorXd& x, const Eigen::VectorXd& y);
double cosine_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Grows emb by one Gaussian(0, 0.02) row per new term; rows 0..V-1 and every
// other tensor are preserved bit for bit.
EncoderParams align_embeddings(const EncoderParams& params, const VocabExtension& ext,
                               std::uint64_t seed);

void save_checkpoint(const EncoderParams& params, const std::string& path);
EncoderParams load_checkpoint(const std::string& path);

// FNV-1a over the serialized checkpoint bytes, as 16 hex digits.
std::string checkpoint_id(const EncoderParams& params);

bool bit_identical(const EncoderParams& a, const EncoderParams& b);

inline constexpr std::uint32_t checkpoint_version = 1;

}  // namespace demb
