#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "demb/dataset.hpp"
#include "demb/encoder.hpp"

namespace demb {

class Tokenizer;

struct TrainConfig {
    double margin_alpha = 0.2;  // symbol alpha
    double learning_rate = 1e-3;
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    void validate() const;
};

struct WeightDelta {
    std::string tensor_name;
    double l2 = 0.0;
};

struct EpochStats {
    double mean_loss = 0.0;
    double active_fraction = 0.0;  // triplets with nonzero loss
    double train_accuracy = 0.0;   // strict d(a,p) < d(a,n), post-epoch params
};
using TrainHistory = std::vector<EpochStats>;

struct TokenizedTriplet {
    std::vector<std::uint32_t> anchor, positive, negative;
};

// max(0, d(ea,ep) - d(ea,en) + alpha) with d the cosine distance.
double triplet_loss(const Eigen::VectorXd& ea, const Eigen::VectorXd& ep,
                    const Eigen::VectorXd& en, double alpha);

struct Gradients {
    Eigen::MatrixXd emb, w1, w2;
    Eigen::VectorXd b1, b2;
};

// Full backpropagation of the triplet loss through all five tensors, the L2
// normalization, and shared emb rows. Zero loss (strict) gives exactly zero
// gradients; the hinge subgradient at the kink is taken as zero.
std::pair<double, Gradients> loss_and_grad(const EncoderParams& params,
                                           const TokenizedTriplet& triplet, double alpha);

std::vector<TokenizedTriplet> tokenize_triplets(const std::vector<Triplet>& dataset,
                                                const Tokenizer& tok);

// Fraction with strictly smaller anchor-positive distance; ties count as
// failures.
double triplet_accuracy(const EncoderParams& params,
                        const std::vector<TokenizedTriplet>& triplets);

// Mini-batch Adam over the whole parameter set, seeded epoch shuffles,
// deterministic given (params, dataset, cfg).
std::pair<EncoderParams, TrainHistory> train(const EncoderParams& params,
                                             const std::vector<Triplet>& dataset,
                                             const Tokenizer& tok, const TrainConfig& cfg);

// Frobenius norm of fine - base per named tensor, sorted descending by l2
// (ties by name); second element is the mean over tensors.
std::pair<std::vector<WeightDelta>, double> weight_deltas(const EncoderParams& base,
                                                          const EncoderParams& fine);

void save_history_csv(const TrainHistory& history, const std::string& path);
void save_weight_deltas_csv(const std::vector<WeightDelta>& deltas, double mean,
                            const std::string& path);

}  // namespace demb
