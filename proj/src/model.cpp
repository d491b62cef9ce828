#include "xsim/model.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "xsim/rng.hpp"

namespace xsim {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void prefix_layer_params(const std::string& prefix, Layer& layer) {
    std::vector<ParamTensor*> all;
    layer.collect_params(all);
    layer.collect_state(all);
    for (ParamTensor* p : all) p->name = prefix + "." + p->name;
}

}  // namespace

std::string to_string(Decision d) {
    return d == Decision::kSameClass ? "same_class" : "different_class";
}

EmbeddingNetwork EmbeddingNetwork::build(BackboneId backbone, int embedding_dim,
                                         const std::string& target_layer) {
    EmbeddingNetwork net;
    net.embedding_dim_ = embedding_dim;
    net.target_layer_ = target_layer;

    auto add = [&net](const std::string& name, std::unique_ptr<Layer> layer) {
        prefix_layer_params(name, *layer);
        net.layers_.push_back(NamedLayer{name, std::move(layer)});
    };

    int feature_channels = 0;
    if (backbone == BackboneId::kSmallCnn) {
        const int widths[4] = {8, 16, 32, 64};
        int in_ch = 3;
        for (int i = 0; i < 4; ++i) {
            const std::string n = std::to_string(i + 1);
            add("conv" + n, std::make_unique<Conv2d>(in_ch, widths[i], 3, 1, 1, true));
            add("relu" + n, std::make_unique<ReLU>());
            if (i < 3) add("pool" + n, std::make_unique<MaxPool2d>(2, 2, 0));
            in_ch = widths[i];
        }
        feature_channels = widths[3];
    } else {
        add("conv1", std::make_unique<Conv2d>(3, 64, 7, 2, 3, false));
        add("bn1", std::make_unique<BatchNorm2d>(64));
        add("relu1", std::make_unique<ReLU>());
        add("pool1", std::make_unique<MaxPool2d>(3, 2, 1));
        const int blocks[4] = {3, 4, 6, 3};
        const int mids[4] = {64, 128, 256, 512};
        int in_ch = 64;
        for (int stage = 0; stage < 4; ++stage) {
            const int mid = mids[stage];
            const int out_ch = mid * 4;
            for (int b = 0; b < blocks[stage]; ++b) {
                const int stride = (b == 0 && stage > 0) ? 2 : 1;
                const std::string name =
                    "layer" + std::to_string(stage + 1) + "." + std::to_string(b);
                add(name, std::make_unique<Bottleneck>(in_ch, mid, out_ch, stride));
                in_ch = out_ch;
            }
        }
        feature_channels = in_ch;
    }

    net.target_index_ = -1;
    for (size_t i = 0; i < net.layers_.size(); ++i) {
        if (net.layers_[i].name == target_layer) {
            net.target_index_ = static_cast<int>(i);
            break;
        }
    }
    if (net.target_index_ < 0) {
        throw std::invalid_argument("unknown layer " + target_layer);
    }

    net.first_head_layer_ = static_cast<int>(net.layers_.size());
    add("gap", std::make_unique<GlobalAvgPool>());
    add("fc", std::make_unique<Dense>(feature_channels, embedding_dim));
    add("fc_relu", std::make_unique<ReLU>());
    return net;
}

Tensor EmbeddingNetwork::forward(const Tensor& image, std::vector<LayerCache>* tape,
                                 Tensor* target_out) {
    if (tape) {
        tape->clear();
        tape->resize(layers_.size());
    }
    Tensor x = image;
    for (size_t i = 0; i < layers_.size(); ++i) {
        x = layers_[i].layer->forward(x, tape ? &(*tape)[i] : nullptr);
        if (target_out && static_cast<int>(i) == target_index_) *target_out = x;
    }
    return x;
}

Tensor EmbeddingNetwork::forward_from_target(const Tensor& activations) {
    Tensor x = activations;
    for (size_t i = static_cast<size_t>(target_index_) + 1; i < layers_.size(); ++i) {
        x = layers_[i].layer->forward(x, nullptr);
    }
    return x;
}

Tensor EmbeddingNetwork::backward(const Tensor& grad_embedding,
                                  const std::vector<LayerCache>& tape, bool accumulate,
                                  bool stop_at_target) {
    if (tape.size() != layers_.size()) {
        throw std::runtime_error("no gradient capture");
    }
    const int stop = stop_at_target ? target_index_ : -1;
    Tensor g = grad_embedding;
    for (int i = static_cast<int>(layers_.size()) - 1; i > stop; --i) {
        g = layers_[static_cast<size_t>(i)].layer->backward(
            g, tape[static_cast<size_t>(i)], accumulate);
    }
    return g;
}

void EmbeddingNetwork::init(Rng& rng) {
    for (auto& nl : layers_) nl.layer->init(rng);
}

std::vector<ParamTensor*> EmbeddingNetwork::params() {
    std::vector<ParamTensor*> out;
    for (auto& nl : layers_) nl.layer->collect_params(out);
    return out;
}

std::vector<ParamTensor*> EmbeddingNetwork::state() {
    std::vector<ParamTensor*> out;
    for (auto& nl : layers_) nl.layer->collect_state(out);
    return out;
}

std::vector<ParamTensor*> EmbeddingNetwork::head_params() {
    std::vector<ParamTensor*> out;
    for (size_t i = static_cast<size_t>(first_head_layer_); i < layers_.size(); ++i) {
        layers_[i].layer->collect_params(out);
    }
    return out;
}

SiameseNetwork::SiameseNetwork(EmbeddingNetwork tower, ExperimentConfig cfg)
    : tower_(std::move(tower)), cfg_(std::move(cfg)) {
    head_.name = "head.affine";
    head_.value = Tensor::zeros({2});
    head_.grad = Tensor::zeros({2});
    head_.value[0] = 1.0;  // w
    head_.value[1] = 0.0;  // c
}

SiameseNetwork SiameseNetwork::build(const ExperimentConfig& cfg) {
    const std::string target =
        cfg.target_layer.empty() ? default_target_layer(cfg.backbone_id) : cfg.target_layer;
    EmbeddingNetwork tower = EmbeddingNetwork::build(cfg.backbone_id, cfg.embedding_dim, target);
    Rng rng(cfg.seed);
    Rng init_rng = rng.derive(0x1717);
    tower.init(init_rng);
    SiameseNetwork model(std::move(tower), cfg);

    if (!cfg.backbone_weights.empty()) {
        auto arrays = load_named_arrays(cfg.backbone_weights);
        std::vector<ParamTensor*> targets = model.tower_.params();
        std::vector<ParamTensor*> st = model.tower_.state();
        targets.insert(targets.end(), st.begin(), st.end());
        for (const auto& [name, value] : arrays) {
            ParamTensor* hit = nullptr;
            for (ParamTensor* p : targets) {
                if (p->name == name) {
                    hit = p;
                    break;
                }
            }
            if (!hit) throw std::runtime_error("incompatible checkpoint: no parameter " + name);
            if (hit->value.shape != value.shape) {
                throw std::runtime_error("incompatible checkpoint: shape mismatch for " + name);
            }
            hit->value = value;
        }
    }
    return model;
}

void SiameseNetwork::check_input(const PreparedImage& image) const {
    const auto& s = image.pixels.shape;
    if (s.size() != 3 || s[0] != 3 || s[1] != cfg_.image_height || s[2] != cfg_.image_width) {
        throw std::invalid_argument("input shape error in SiameseNetwork");
    }
}

Tensor SiameseNetwork::embed(const PreparedImage& image) {
    check_input(image);
    return tower_.forward(image.pixels, nullptr);
}

ForwardTrace SiameseNetwork::forward_pair(const PreparedImage& a, const PreparedImage& b,
                                          bool capture) {
    check_input(a);
    check_input(b);
    ForwardTrace t;
    t.captured = capture;
    t.embedding_a = tower_.forward(a.pixels, capture ? &t.tape_a : nullptr,
                                   capture ? &t.activations_a : nullptr);
    t.embedding_b = tower_.forward(b.pixels, capture ? &t.tape_b : nullptr,
                                   capture ? &t.activations_b : nullptr);
    double sq = 0.0;
    for (size_t i = 0; i < t.embedding_a.numel(); ++i) {
        const double diff = t.embedding_a[i] - t.embedding_b[i];
        sq += diff * diff;
    }
    t.dist = std::sqrt(sq);
    t.logit = head_.value[0] * t.dist + head_.value[1];
    t.d = sigmoid(t.logit);
    return t;
}

Tensor SiameseNetwork::target_gradient(const ForwardTrace& trace, bool branch_a,
                                       double seed_scale, GradcamTarget target) {
    if (!trace.captured) throw std::runtime_error("no gradient capture");

    // d(d)/d(dist) = sigmoid'(z) * w; the logit variant drops the sigmoid.
    double base = head_.value[0];
    if (target == GradcamTarget::kOutput) base *= trace.d * (1.0 - trace.d);
    base *= seed_scale;

    const Tensor& e_self = branch_a ? trace.embedding_a : trace.embedding_b;
    const Tensor& e_other = branch_a ? trace.embedding_b : trace.embedding_a;
    const std::vector<LayerCache>& tape = branch_a ? trace.tape_a : trace.tape_b;
    const Tensor& acts = branch_a ? trace.activations_a : trace.activations_b;

    if (trace.dist < kDistEps) {
        // Identical embeddings: the distance has no direction, take 0.
        return Tensor::zeros(acts.shape);
    }

    Tensor ge = Tensor::zeros(e_self.shape);
    const double scale = base / trace.dist;
    for (size_t i = 0; i < ge.numel(); ++i) {
        ge[i] = scale * (e_self[i] - e_other[i]);
    }
    return tower_.backward(ge, tape, /*accumulate=*/false, /*stop_at_target=*/true);
}

void SiameseNetwork::backward_pair(const ForwardTrace& trace, double grad_d,
                                   double grad_dist_direct, bool through_head) {
    if (!trace.captured) throw std::runtime_error("no gradient capture");

    double grad_dist = grad_dist_direct;
    if (through_head) {
        const double grad_logit = grad_d * trace.d * (1.0 - trace.d);
        head_.grad[0] += grad_logit * trace.dist;
        head_.grad[1] += grad_logit;
        grad_dist += grad_logit * head_.value[0];
    }

    if (trace.dist < kDistEps) return;  // no direction, nothing flows to the towers

    const double scale = grad_dist / trace.dist;
    Tensor ge_a = Tensor::zeros(trace.embedding_a.shape);
    Tensor ge_b = Tensor::zeros(trace.embedding_b.shape);
    for (size_t i = 0; i < ge_a.numel(); ++i) {
        const double g = scale * (trace.embedding_a[i] - trace.embedding_b[i]);
        ge_a[i] = g;
        ge_b[i] = -g;
    }
    tower_.backward(ge_a, trace.tape_a, /*accumulate=*/true, /*stop_at_target=*/false);
    tower_.backward(ge_b, trace.tape_b, /*accumulate=*/true, /*stop_at_target=*/false);
}

std::vector<ParamTensor*> SiameseNetwork::params() {
    std::vector<ParamTensor*> out;
    out.push_back(&head_);
    for (ParamTensor* p : tower_.params()) out.push_back(p);
    return out;
}

std::vector<ParamTensor*> SiameseNetwork::state() { return tower_.state(); }

}  // namespace xsim
