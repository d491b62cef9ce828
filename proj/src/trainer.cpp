#include "xsim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "xsim/rng.hpp"

namespace xsim {

namespace {

constexpr uint64_t kTrainStream = 0x545241494e;

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double pair_output(const ForwardTrace& trace, LossTarget on) {
    return on == LossTarget::kOutput ? trace.d : trace.dist;
}

}  // namespace

double contrastive_loss(double d, int label, double margin) {
    if (label == 0) return 0.5 * d * d;
    const double gap = std::max(0.0, margin - d);
    return 0.5 * gap * gap;
}

double contrastive_loss_grad(double d, int label, double margin) {
    if (label == 0) return d;
    const double gap = margin - d;
    return gap > 0.0 ? -gap : 0.0;
}

AdamOptimizer::AdamOptimizer(std::vector<ParamTensor*> params, double lr)
    : params_(std::move(params)), lr_(lr) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const ParamTensor* p : params_) {
        m_.push_back(Tensor::zeros(p->value.shape));
        v_.push_back(Tensor::zeros(p->value.shape));
    }
}

void AdamOptimizer::zero_grads() {
    for (ParamTensor* p : params_) p->zero_grad();
}

void AdamOptimizer::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        ParamTensor& p = *params_[i];
        for (size_t j = 0; j < p.value.numel(); ++j) {
            const double g = p.grad[j];
            m_[i][j] = kAdamBeta1 * m_[i][j] + (1.0 - kAdamBeta1) * g;
            v_[i][j] = kAdamBeta2 * v_[i][j] + (1.0 - kAdamBeta2) * g * g;
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            p.value[j] -= lr_ * mhat / (std::sqrt(vhat) + kAdamEps);
        }
        p.zero_grad();
    }
}

TrainHistory train_model(SiameseNetwork& model, const std::vector<PairSample>& train_pairs,
                         const std::vector<PairSample>& val_pairs, const ExperimentConfig& cfg,
                         ImageCache& images, std::ostream* log) {
    std::vector<ParamTensor*> trainable;
    if (cfg.freeze_backbone) {
        trainable = model.tower().head_params();
        trainable.insert(trainable.begin(), model.params()[0]);  // head affine
    } else {
        trainable = model.params();
    }
    AdamOptimizer opt(trainable, cfg.learning_rate);

    // Snapshots cover every trainable parameter; frozen ones never move.
    std::vector<ParamTensor*> all = model.params();
    auto snapshot = [&all]() {
        std::vector<Tensor> copy;
        copy.reserve(all.size());
        for (const ParamTensor* p : all) copy.push_back(p->value);
        return copy;
    };
    auto restore = [&all](const std::vector<Tensor>& copy) {
        for (size_t i = 0; i < all.size(); ++i) all[i]->value = copy[i];
    };

    const size_t n = train_pairs.size();
    const int batch_size = cfg.batch_size;
    const bool through_head = cfg.loss_on == LossTarget::kOutput;

    Rng rng = Rng(cfg.seed).derive(kTrainStream);

    TrainHistory history;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_params = snapshot();
    history.best_epoch = 0;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int batch_index = 0;
        for (size_t start = 0; start < n; start += static_cast<size_t>(batch_size)) {
            ++batch_index;
            const size_t end = std::min(n, start + static_cast<size_t>(batch_size));
            const double inv_bn = 1.0 / static_cast<double>(end - start);
            opt.zero_grads();
            double batch_loss = 0.0;
            for (size_t k = start; k < end; ++k) {
                const PairSample& pair = train_pairs[order[k]];
                const PreparedImage& a = images.get(pair.anchor);
                const PreparedImage& b = images.get(pair.partner);
                ForwardTrace trace = model.forward_pair(a, b, /*capture=*/true);
                const double dw = pair_output(trace, cfg.loss_on);
                const double loss = contrastive_loss(dw, pair.label, cfg.margin);
                if (!std::isfinite(loss)) {
                    throw std::runtime_error("divergence at epoch " + std::to_string(epoch) +
                                             ", batch " + std::to_string(batch_index));
                }
                batch_loss += loss;
                const double g = contrastive_loss_grad(dw, pair.label, cfg.margin) * inv_bn;
                if (through_head) {
                    model.backward_pair(trace, g, 0.0, true);
                } else {
                    model.backward_pair(trace, 0.0, g, false);
                }
            }
            opt.step();
            epoch_loss += batch_loss;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = n > 0 ? epoch_loss / static_cast<double>(n) : 0.0;

        double val_loss = 0.0;
        int val_correct = 0;
        for (const PairSample& pair : val_pairs) {
            const PreparedImage& a = images.get(pair.anchor);
            const PreparedImage& b = images.get(pair.partner);
            ForwardTrace trace = model.forward_pair(a, b, /*capture=*/false);
            val_loss += contrastive_loss(pair_output(trace, cfg.loss_on), pair.label, cfg.margin);
            const bool predicted_same = decide(trace.d, cfg.threshold) == Decision::kSameClass;
            if (predicted_same == (pair.label == 0)) ++val_correct;
        }
        if (!val_pairs.empty()) {
            stats.val_loss = val_loss / static_cast<double>(val_pairs.size());
            stats.val_accuracy =
                static_cast<double>(val_correct) / static_cast<double>(val_pairs.size());
        } else {
            // No validation set: fall back to train loss for model selection.
            stats.val_loss = stats.train_loss;
            stats.val_accuracy = 0.0;
        }

        history.epochs.push_back(stats);
        if (log) {
            nlohmann::json line = {{"epoch", stats.epoch},
                                   {"train_loss", stats.train_loss},
                                   {"val_loss", stats.val_loss},
                                   {"val_accuracy", stats.val_accuracy}};
            (*log) << line.dump() << "\n";
        }

        if (stats.val_loss < best_val) {
            best_val = stats.val_loss;
            best_params = snapshot();
            history.best_epoch = epoch;
        }
    }

    if (history.best_epoch > 0) restore(best_params);
    history.best_val_loss = best_val;
    return history;
}

void write_history(const TrainHistory& history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("file not found: " + path.string());
    for (const EpochStats& s : history.epochs) {
        nlohmann::json line = {{"epoch", s.epoch},
                               {"train_loss", s.train_loss},
                               {"val_loss", s.val_loss},
                               {"val_accuracy", s.val_accuracy}};
        out << line.dump() << "\n";
    }
    nlohmann::json tail = {{"best_epoch", history.best_epoch},
                           {"best_val_loss", history.best_val_loss}};
    out << tail.dump() << "\n";
}

}  // namespace xsim
