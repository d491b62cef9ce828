#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "xsim/config.hpp"
#include "xsim/dataset.hpp"
#include "xsim/image_cache.hpp"
#include "xsim/model.hpp"

namespace xsim {

// Contrastive loss on the network output d with binary label y
// (0 = similar, 1 = dissimilar):
//   L = (1-y)/2 * d^2 + y/2 * max(0, margin - d)^2
double contrastive_loss(double d, int label, double margin);

// dL/dd, analytic.
double contrastive_loss_grad(double d, int label, double margin);

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;          // 1-based epoch whose weights were kept
    double best_val_loss = 0.0;
};

// Adam with the usual bias correction. State is owned here so a trainer can
// be rebuilt from a fixed seed and replay identically.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<ParamTensor*> params, double lr);

    void step();        // applies and clears gradients
    void zero_grads();

private:
    std::vector<ParamTensor*> params_;
    std::vector<Tensor> m_, v_;
    double lr_;
    long t_ = 0;
};

// Full-batch-loop training with per-epoch validation. The model ends up with
// the weights of the best-validation-loss epoch. A non-finite loss aborts
// with std::runtime_error("divergence at epoch k, batch j"). When log is
// given, one JSON line per epoch is appended to it.
TrainHistory train_model(SiameseNetwork& model, const std::vector<PairSample>& train_pairs,
                         const std::vector<PairSample>& val_pairs, const ExperimentConfig& cfg,
                         ImageCache& images, std::ostream* log);

void write_history(const TrainHistory& history, const std::filesystem::path& path);

}  // namespace xsim
