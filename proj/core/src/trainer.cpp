#include "demb/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "demb/error.hpp"
#include "demb/rng.hpp"
#include "demb/tokenizer.hpp"

namespace demb {

void TrainConfig::validate() const {
    if (margin_alpha < 0.0) raise("BadConfig", "margin_alpha must be >= 0");
    if (learning_rate <= 0.0) raise("BadConfig", "learning_rate must be > 0");
    if (batch_size == 0) raise("BadConfig", "batch_size must be >= 1");
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0 ||
        adam_eps <= 0.0)
        raise("BadConfig", "adam parameters out of range");
}

double triplet_loss(const Eigen::VectorXd& ea, const Eigen::VectorXd& ep,
                    const Eigen::VectorXd& en, double alpha) {
    if (alpha < 0.0) raise("BadConfig", "margin alpha must be >= 0");
    return std::max(0.0, cosine_distance(ea, ep) - cosine_distance(ea, en) + alpha);
}

namespace {

Gradients zero_gradients(const EncoderParams& p) {
    Gradients g;
    g.emb = Eigen::MatrixXd::Zero(p.emb.rows(), p.emb.cols());
    g.w1 = Eigen::MatrixXd::Zero(p.w1.rows(), p.w1.cols());
    g.b1 = Eigen::VectorXd::Zero(p.b1.size());
    g.w2 = Eigen::MatrixXd::Zero(p.w2.rows(), p.w2.cols());
    g.b2 = Eigen::VectorXd::Zero(p.b2.size());
    return g;
}

// Backward pass for one encoder tower: de is dL/d(e) at the normalized
// output; contributions are accumulated into g.
void backprop_tower(const EncoderParams& p, const std::vector<std::uint32_t>& ids,
                    const EncoderForward& f, const Eigen::VectorXd& de, Gradients& g) {
    // e = v/|v|  =>  dv = (de - (de.e)e)/|v|
    const Eigen::VectorXd dv = (de - de.dot(f.e) * f.e) / f.v_norm;
    // v = z + w2^T u + b2
    g.b2 += dv;
    g.w2 += f.u * dv.transpose();
    const Eigen::VectorXd du = p.w2 * dv;
    // u = tanh(a)
    const Eigen::VectorXd da = du.array() * (1.0 - f.u.array().square());
    // a = w1^T z + b1
    g.b1 += da;
    g.w1 += f.z * da.transpose();
    // z = mean of emb rows, residual path included
    const Eigen::VectorXd dz = dv + p.w1 * da;
    const Eigen::VectorXd per_row = dz / static_cast<double>(ids.size());
    // sorted-id accumulation keeps the reduction order fixed
    std::vector<std::uint32_t> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    for (const auto id : sorted) g.emb.row(id) += per_row.transpose();
}

struct AdamState {
    Gradients m, v;
    std::size_t t = 0;
};

void adam_step(EncoderParams& p, const Gradients& g, AdamState& st, const TrainConfig& cfg) {
    ++st.t;
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(st.t));
    auto update = [&](Eigen::Ref<Eigen::MatrixXd> theta, Eigen::MatrixXd& m, Eigen::MatrixXd& v,
                      const Eigen::MatrixXd& grad) {
        m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad;
        v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * grad.array().square().matrix();
        theta.array() -=
            cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
    };
    update(p.emb, st.m.emb, st.v.emb, g.emb);
    update(p.w1, st.m.w1, st.v.w1, g.w1);
    update(p.w2, st.m.w2, st.v.w2, g.w2);
    auto update_vec = [&](Eigen::VectorXd& theta, Eigen::VectorXd& m, Eigen::VectorXd& v,
                          const Eigen::VectorXd& grad) {
        m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad;
        v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * grad.array().square().matrix();
        theta.array() -=
            cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
    };
    update_vec(p.b1, st.m.b1, st.v.b1, g.b1);
    update_vec(p.b2, st.m.b2, st.v.b2, g.b2);
}

void scale_gradients(Gradients& g, double s) {
    g.emb *= s;
    g.w1 *= s;
    g.b1 *= s;
    g.w2 *= s;
    g.b2 *= s;
}

void add_gradients(Gradients& acc, const Gradients& g) {
    acc.emb += g.emb;
    acc.w1 += g.w1;
    acc.b1 += g.b1;
    acc.w2 += g.w2;
    acc.b2 += g.b2;
}

}  // namespace

std::pair<double, Gradients> loss_and_grad(const EncoderParams& params,
                                           const TokenizedTriplet& triplet, double alpha) {
    const EncoderForward fa = encoder_forward(params, triplet.anchor);
    const EncoderForward fp = encoder_forward(params, triplet.positive);
    const EncoderForward fn = encoder_forward(params, triplet.negative);

    const double loss = triplet_loss(fa.e, fp.e, fn.e, alpha);
    Gradients g = zero_gradients(params);
    if (loss > 0.0) {
        // L = s_n - s_p + alpha on the active branch, s_x = ea.ex
        backprop_tower(params, triplet.anchor, fa, fn.e - fp.e, g);
        backprop_tower(params, triplet.positive, fp, -fa.e, g);
        backprop_tower(params, triplet.negative, fn, fa.e, g);
    }
    return {loss, std::move(g)};
}

std::vector<TokenizedTriplet> tokenize_triplets(const std::vector<Triplet>& dataset,
                                                const Tokenizer& tok) {
    std::vector<TokenizedTriplet> out;
    out.reserve(dataset.size());
    for (const auto& t : dataset)
        out.push_back({tok.tokenize(t.anchor), tok.tokenize(t.positive),
                       tok.tokenize(t.negative)});
    return out;
}

double triplet_accuracy(const EncoderParams& params,
                        const std::vector<TokenizedTriplet>& triplets) {
    if (triplets.empty()) raise("EmptyDataset", "no triplets to score");
    std::size_t correct = 0;
    for (const auto& t : triplets) {
        const auto ea = embed(params, t.anchor);
        const auto ep = embed(params, t.positive);
        const auto en = embed(params, t.negative);
        if (cosine_distance(ea, ep) < cosine_distance(ea, en)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(triplets.size());
}

std::pair<EncoderParams, TrainHistory> train(const EncoderParams& params,
                                             const std::vector<Triplet>& dataset,
                                             const Tokenizer& tok, const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) raise("EmptyDataset", "training dataset is empty");

    EncoderParams p = params;
    TrainHistory history;
    if (cfg.epochs == 0) return {std::move(p), std::move(history)};

    const auto tokenized = tokenize_triplets(dataset, tok);
    const std::size_t n = tokenized.size();

    AdamState st;
    st.m = zero_gradients(p);
    st.v = zero_gradients(p);

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t active = 0;

        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            Gradients acc = zero_gradients(p);
            for (std::size_t i = start; i < stop; ++i) {
                auto [loss, g] = loss_and_grad(p, tokenized[order[i]], cfg.margin_alpha);
                loss_sum += loss;
                if (loss > 0.0) ++active;
                add_gradients(acc, g);
            }
            scale_gradients(acc, 1.0 / static_cast<double>(stop - start));
            adam_step(p, acc, st, cfg);
        }

        EpochStats stats;
        stats.mean_loss = loss_sum / static_cast<double>(n);
        stats.active_fraction = static_cast<double>(active) / static_cast<double>(n);
        stats.train_accuracy = triplet_accuracy(p, tokenized);
        history.push_back(stats);
    }
    return {std::move(p), std::move(history)};
}

std::pair<std::vector<WeightDelta>, double> weight_deltas(const EncoderParams& base,
                                                          const EncoderParams& fine) {
    const auto bd = base.dims();
    const auto fd = fine.dims();
    if (bd.V != fd.V || bd.d != fd.d || bd.h != fd.h)
        raise("ShapeMismatch", "base and fine checkpoints have different dims");

    std::vector<WeightDelta> deltas = {
        {"emb", (fine.emb - base.emb).norm()}, {"w1", (fine.w1 - base.w1).norm()},
        {"b1", (fine.b1 - base.b1).norm()},    {"w2", (fine.w2 - base.w2).norm()},
        {"b2", (fine.b2 - base.b2).norm()},
    };
    double mean = 0.0;
    for (const auto& d : deltas) mean += d.l2;
    mean /= static_cast<double>(deltas.size());
    std::sort(deltas.begin(), deltas.end(), [](const WeightDelta& a, const WeightDelta& b) {
        if (a.l2 != b.l2) return a.l2 > b.l2;
        return a.tensor_name < b.tensor_name;
    });
    return {std::move(deltas), mean};
}

void save_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise("IoError", "cannot open '" + path + "' for writing");
    out << "epoch,mean_loss,active_fraction,train_acc\n" << std::setprecision(17);
    for (std::size_t i = 0; i < history.size(); ++i)
        out << (i + 1) << ',' << history[i].mean_loss << ',' << history[i].active_fraction << ','
            << history[i].train_accuracy << '\n';
    if (!out) raise("IoError", "write failed for '" + path + "'");
}

void save_weight_deltas_csv(const std::vector<WeightDelta>& deltas, double mean,
                            const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise("IoError", "cannot open '" + path + "' for writing");
    out << "tensor_name,l2\n" << std::setprecision(17);
    for (const auto& d : deltas) out << d.tensor_name << ',' << d.l2 << '\n';
    out << "MEAN," << mean << '\n';
    if (!out) raise("IoError", "write failed for '" + path + "'");
}

}  // namespace demb
