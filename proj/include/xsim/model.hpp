#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "xsim/config.hpp"
#include "xsim/layers.hpp"
#include "xsim/preprocess.hpp"
#include "xsim/tensor.hpp"

namespace xsim {

enum class Decision { kSameClass, kDifferentClass };

std::string to_string(Decision d);

inline double similarity(double d) { return 1.0 - d; }

// "less than threshold" is strict; the tie goes to different_class.
inline Decision decide(double d, double threshold) {
    return d < threshold ? Decision::kSameClass : Decision::kDifferentClass;
}

// Backbone + global average pool + projection to the embedding, as one flat
// sequence of named layers. The Grad-CAM capture point (target layer) is the
// output of one of the feature layers.
class EmbeddingNetwork {
public:
    struct NamedLayer {
        std::string name;
        std::unique_ptr<Layer> layer;
    };

    // Throws std::invalid_argument("unknown layer <name>") when target_layer
    // does not name a feature layer.
    static EmbeddingNetwork build(BackboneId backbone, int embedding_dim,
                                  const std::string& target_layer);

    // target_out, when given, receives a copy of the target layer's output.
    Tensor forward(const Tensor& image, std::vector<LayerCache>* tape,
                   Tensor* target_out = nullptr);

    // Re-runs only the layers after the capture point on (possibly perturbed)
    // target activations. Used by gradient checks.
    Tensor forward_from_target(const Tensor& activations);

    // Backpropagates d(embedding) through the tape. With stop_at_target the
    // walk ends at the capture point and the gradient w.r.t. the target
    // activations is returned; otherwise the walk reaches the input and the
    // returned tensor is the gradient w.r.t. the input image.
    Tensor backward(const Tensor& grad_embedding, const std::vector<LayerCache>& tape,
                    bool accumulate, bool stop_at_target);

    void init(Rng& rng);

    std::vector<ParamTensor*> params();        // trainable, full dotted names
    std::vector<ParamTensor*> state();         // batch-norm running statistics
    std::vector<ParamTensor*> head_params();   // projection layer only

    int embedding_dim() const { return embedding_dim_; }
    const std::string& target_layer_name() const { return target_layer_; }
    int target_index() const { return target_index_; }

private:
    std::vector<NamedLayer> layers_;
    std::string target_layer_;
    int target_index_ = -1;
    int first_head_layer_ = -1;  // layers from here on are gap/projection
    int embedding_dim_ = 0;
};

// One pair pass. Tapes and target activations are retained only when the
// pass was run with capture; gradient-based explanation needs them.
struct ForwardTrace {
    double d = 0.0;         // sigmoid(w * dist + c), in (0,1)
    double dist = 0.0;      // L2 distance between the embeddings
    double logit = 0.0;     // w * dist + c
    Tensor embedding_a, embedding_b;
    Tensor activations_a, activations_b;
    std::vector<LayerCache> tape_a, tape_b;
    bool captured = false;
};

// Two shared-weight branches over one EmbeddingNetwork plus the scalar head
// d = sigmoid(w * ||e_a - e_b|| + c). Weight sharing is by identity: there is
// exactly one parameter set.
class SiameseNetwork {
public:
    static SiameseNetwork build(const ExperimentConfig& cfg);

    Tensor embed(const PreparedImage& image);

    ForwardTrace forward_pair(const PreparedImage& a, const PreparedImage& b, bool capture);

    // Gradient of the chosen scalar (d or its logit) w.r.t. the captured
    // target activations of one branch. seed_scale -1 targets 1-d.
    Tensor target_gradient(const ForwardTrace& trace, bool branch_a, double seed_scale,
                           GradcamTarget target);

    // Backpropagates a loss gradient arriving at d (or at dist, bypassing the
    // head) into all parameters. Used by the trainer.
    void backward_pair(const ForwardTrace& trace, double grad_d, double grad_dist_direct,
                       bool through_head);

    EmbeddingNetwork& tower() { return tower_; }
    const ExperimentConfig& config() const { return cfg_; }

    double head_weight() const { return head_.value[0]; }
    double head_bias() const { return head_.value[1]; }

    // head first, then tower; stable order used by the checkpoint codec.
    std::vector<ParamTensor*> params();
    std::vector<ParamTensor*> state();

    static constexpr double kDistEps = 1e-12;

private:
    SiameseNetwork(EmbeddingNetwork tower, ExperimentConfig cfg);

    void check_input(const PreparedImage& image) const;

    EmbeddingNetwork tower_;
    ParamTensor head_;  // [2] = {w, c}
    ExperimentConfig cfg_;
};

// Checkpoint container: magic + version + embedded config + named arrays.
// Round-trips are bit exact.
void save_model(const SiameseNetwork& model, const std::filesystem::path& path);

SiameseNetwork load_model(const std::filesystem::path& path);

// Loads and additionally verifies that the checkpoint's architecture matches
// the expected config (backbone, embedding_dim, image size, target layer).
SiameseNetwork load_model(const std::filesystem::path& path, const ExperimentConfig& expected);

// Named-array container for externally converted backbone weights.
void save_named_arrays(const std::vector<std::pair<std::string, Tensor>>& arrays,
                       const std::filesystem::path& path);
std::vector<std::pair<std::string, Tensor>> load_named_arrays(const std::filesystem::path& path);

}  // namespace xsim
