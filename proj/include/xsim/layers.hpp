#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xsim/rng.hpp"
#include "xsim/tensor.hpp"

namespace xsim {

struct ParamTensor {
    std::string name;  // local path within the owning layer, e.g. "conv1.weight"
    Tensor value;
    Tensor grad;

    ParamTensor() = default;
    ParamTensor(std::string n, std::vector<int> shape)
        : name(std::move(n)), value(std::move(shape)), grad(value.shape) {}

    void zero_grad() { grad.zero(); }
};

// Everything a backward pass needs from the matching forward pass. Layers are
// otherwise stateless per call, so two network branches can run through the
// same (shared-weight) layer with independent caches.
struct LayerCache {
    std::vector<Tensor> tensors;
    std::vector<std::vector<int>> ints;
    std::vector<LayerCache> children;
};

class Layer {
public:
    virtual ~Layer() = default;

    // cache == nullptr runs pure inference (nothing retained).
    virtual Tensor forward(const Tensor& x, LayerCache* cache) = 0;

    // Returns the gradient w.r.t. the layer input. Parameter gradients are
    // accumulated (+=) only when accumulate is set.
    virtual Tensor backward(const Tensor& dy, const LayerCache& cache, bool accumulate) = 0;

    virtual void collect_params(std::vector<ParamTensor*>&) {}
    // Persistent non-trainable state (batch-norm running statistics).
    virtual void collect_state(std::vector<ParamTensor*>&) {}
    virtual void init(Rng&) {}
};

class Conv2d : public Layer {
public:
    Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, bool has_bias);

    Tensor forward(const Tensor& x, LayerCache* cache) override;
    Tensor backward(const Tensor& dy, const LayerCache& cache, bool accumulate) override;
    void collect_params(std::vector<ParamTensor*>& out) override;
    void init(Rng& rng) override;

    int out_channels() const { return out_ch_; }

private:
    int in_ch_, out_ch_, kernel_, stride_, pad_;
    bool has_bias_;
    ParamTensor weight_;
    ParamTensor bias_;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& x, LayerCache* cache) override;
    Tensor backward(const Tensor& dy, const LayerCache& cache, bool accumulate) override;
};

class MaxPool2d : public Layer {
public:
    MaxPool2d(int kernel, int stride, int pad);

    Tensor forward(const Tensor& x, LayerCache* cache) override;
    Tensor backward(const Tensor& dy, const LayerCache& cache, bool accumulate) override;

private:
    int kernel_, stride_, pad_;
};

// Affine transform with stored running statistics. The statistics are frozen
// at whatever was loaded (or the identity init); only gamma/beta train. This
// is the usual fine-tuning treatment and keeps single-image forward passes
// well defined.
class BatchNorm2d : public Layer {
public:
    explicit BatchNorm2d(int channels);

    Tensor forward(const Tensor& x, LayerCache* cache) override;
    Tensor backward(const Tensor& dy, const LayerCache& cache, bool accumulate) override;
    void collect_params(std::vector<ParamTensor*>& out) override;
    void collect_state(std::vector<ParamTensor*>& out) override;
    void init(Rng& rng) override;

    static constexpr double kEps = 1e-5;

private:
    void init_identity();

    int channels_;
    ParamTensor gamma_, beta_;
    ParamTensor running_mean_, running_var_;
};

class GlobalAvgPool : public Layer {
public:
    Tensor forward(const Tensor& x, LayerCache* cache) override;
    Tensor backward(const Tensor& dy, const LayerCache& cache, bool accumulate) override;
};

// Fully connected layer on a flat vector.
class Dense : public Layer {
public:
    Dense(int in_dim, int out_dim);

    Tensor forward(const Tensor& x, LayerCache* cache) override;
    Tensor backward(const Tensor& dy, const LayerCache& cache, bool accumulate) override;
    void collect_params(std::vector<ParamTensor*>& out) override;
    void init(Rng& rng) override;

private:
    int in_dim_, out_dim_;
    ParamTensor weight_;
    ParamTensor bias_;
};

// ResNet bottleneck: 1x1 -> 3x3(stride) -> 1x1 with identity or projected
// shortcut, batch norm after every conv, final ReLU after the add.
class Bottleneck : public Layer {
public:
    Bottleneck(int in_ch, int mid_ch, int out_ch, int stride);

    Tensor forward(const Tensor& x, LayerCache* cache) override;
    Tensor backward(const Tensor& dy, const LayerCache& cache, bool accumulate) override;
    void collect_params(std::vector<ParamTensor*>& out) override;
    void collect_state(std::vector<ParamTensor*>& out) override;
    void init(Rng& rng) override;

private:
    bool projected_;
    Conv2d conv1_, conv2_, conv3_;
    BatchNorm2d bn1_, bn2_, bn3_;
    std::optional<Conv2d> ds_conv_;
    std::optional<BatchNorm2d> ds_bn_;
};

}  // namespace xsim
