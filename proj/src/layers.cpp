#include "xsim/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "xsim/kernels.hpp"

namespace xsim {

namespace {

void check_input(const Tensor& x, int channels, const char* layer) {
    if (x.rank() != 3 || x.dim(0) != channels) {
        throw std::invalid_argument(std::string("input shape error in ") + layer);
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, bool has_bias)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      has_bias_(has_bias),
      weight_("weight", {out_ch, in_ch, kernel, kernel}),
      bias_("bias", has_bias ? std::vector<int>{out_ch} : std::vector<int>{}) {}

Tensor Conv2d::forward(const Tensor& x, LayerCache* cache) {
    check_input(x, in_ch_, "Conv2d");
    const int ih = x.dim(1), iw = x.dim(2);
    const int oh = kernels::conv_out_dim(ih, kernel_, stride_, pad_);
    const int ow = kernels::conv_out_dim(iw, kernel_, stride_, pad_);
    Tensor out({out_ch_, oh, ow});
    kernels::conv2d_forward(x.data.data(), in_ch_, ih, iw, weight_.value.data.data(),
                            has_bias_ ? bias_.value.data.data() : nullptr,
                            out_ch_, kernel_, stride_, pad_, out.data.data());
    if (cache) cache->tensors = {x};
    return out;
}

Tensor Conv2d::backward(const Tensor& dy, const LayerCache& cache, bool accumulate) {
    const Tensor& x = cache.tensors.at(0);
    const int ih = x.dim(1), iw = x.dim(2);
    Tensor dx({in_ch_, ih, iw});
    kernels::conv2d_backward_input(dy.data.data(), out_ch_, dy.dim(1), dy.dim(2),
                                   weight_.value.data.data(), in_ch_, kernel_, stride_, pad_,
                                   dx.data.data(), ih, iw);
    if (accumulate) {
        kernels::conv2d_backward_params(dy.data.data(), out_ch_, dy.dim(1), dy.dim(2),
                                        x.data.data(), in_ch_, ih, iw, kernel_, stride_, pad_,
                                        weight_.grad.data.data(),
                                        has_bias_ ? bias_.grad.data.data() : nullptr);
    }
    return dx;
}

void Conv2d::collect_params(std::vector<ParamTensor*>& out) {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
}

void Conv2d::init(Rng& rng) {
    // He normal for the ReLU family.
    const double std = std::sqrt(2.0 / (static_cast<double>(in_ch_) * kernel_ * kernel_));
    for (std::size_t i = 0; i < weight_.value.numel(); ++i) weight_.value[i] = rng.normal(0.0, std);
    if (has_bias_) bias_.value.zero();
}

// ---------------------------------------------------------------------------
// ReLU

Tensor ReLU::forward(const Tensor& x, LayerCache* cache) {
    Tensor out(x.shape);
    kernels::relu_forward(x.data.data(), static_cast<std::int64_t>(x.numel()), out.data.data());
    if (cache) cache->tensors = {x};
    return out;
}

Tensor ReLU::backward(const Tensor& dy, const LayerCache& cache, bool) {
    const Tensor& x = cache.tensors.at(0);
    Tensor dx(x.shape);
    kernels::relu_backward(dy.data.data(), x.data.data(), static_cast<std::int64_t>(x.numel()), dx.data.data());
    return dx;
}

// ---------------------------------------------------------------------------
// MaxPool2d

MaxPool2d::MaxPool2d(int kernel, int stride, int pad)
    : kernel_(kernel), stride_(stride), pad_(pad) {}

Tensor MaxPool2d::forward(const Tensor& x, LayerCache* cache) {
    if (x.rank() != 3) throw std::invalid_argument("input shape error in MaxPool2d");
    const int c = x.dim(0), ih = x.dim(1), iw = x.dim(2);
    const int oh = kernels::conv_out_dim(ih, kernel_, stride_, pad_);
    const int ow = kernels::conv_out_dim(iw, kernel_, stride_, pad_);
    Tensor out({c, oh, ow});
    std::vector<int> argmax(static_cast<std::size_t>(c) * oh * ow);
    kernels::maxpool_forward(x.data.data(), c, ih, iw, kernel_, stride_, pad_,
                             out.data.data(), oh, ow, argmax.data());
    if (cache) {
        cache->ints = {std::move(argmax), {c, ih, iw}};
    }
    return out;
}

Tensor MaxPool2d::backward(const Tensor& dy, const LayerCache& cache, bool) {
    const std::vector<int>& argmax = cache.ints.at(0);
    const std::vector<int>& dims = cache.ints.at(1);
    Tensor dx({dims[0], dims[1], dims[2]});
    kernels::maxpool_backward(dy.data.data(), argmax.data(), dims[0], dy.dim(1), dy.dim(2),
                              dx.data.data(), dims[1], dims[2]);
    return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels)
    : channels_(channels),
      gamma_("gamma", {channels}),
      beta_("beta", {channels}),
      running_mean_("running_mean", {channels}),
      running_var_("running_var", {channels}) {
    init_identity();
}

void BatchNorm2d::init_identity() {
    for (int i = 0; i < channels_; ++i) {
        gamma_.value[i] = 1.0;
        beta_.value[i] = 0.0;
        running_mean_.value[i] = 0.0;
        running_var_.value[i] = 1.0;
    }
}

Tensor BatchNorm2d::forward(const Tensor& x, LayerCache* cache) {
    check_input(x, channels_, "BatchNorm2d");
    Tensor out(x.shape);
    kernels::batchnorm_forward(x.data.data(), channels_, x.dim(1), x.dim(2),
                               gamma_.value.data.data(), beta_.value.data.data(),
                               running_mean_.value.data.data(), running_var_.value.data.data(), kEps,
                               out.data.data());
    if (cache) cache->tensors = {x};
    return out;
}

Tensor BatchNorm2d::backward(const Tensor& dy, const LayerCache& cache, bool accumulate) {
    const Tensor& x = cache.tensors.at(0);
    Tensor dx(x.shape);
    Tensor dgamma_scratch({channels_});
    Tensor dbeta_scratch({channels_});
    double* dg = accumulate ? gamma_.grad.data.data() : dgamma_scratch.data.data();
    double* db = accumulate ? beta_.grad.data.data() : dbeta_scratch.data.data();
    kernels::batchnorm_backward(dy.data.data(), x.data.data(), channels_, x.dim(1), x.dim(2),
                                gamma_.value.data.data(), running_mean_.value.data.data(),
                                running_var_.value.data.data(), kEps,
                                dx.data.data(), dg, db);
    return dx;
}

void BatchNorm2d::collect_params(std::vector<ParamTensor*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
}

void BatchNorm2d::collect_state(std::vector<ParamTensor*>& out) {
    out.push_back(&running_mean_);
    out.push_back(&running_var_);
}

void BatchNorm2d::init(Rng&) { init_identity(); }

// ---------------------------------------------------------------------------
// GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x, LayerCache* cache) {
    if (x.rank() != 3) throw std::invalid_argument("input shape error in GlobalAvgPool");
    Tensor out({x.dim(0)});
    kernels::global_avg_pool_forward(x.data.data(), x.dim(0), x.dim(1), x.dim(2), out.data.data());
    if (cache) cache->ints = {{x.dim(0), x.dim(1), x.dim(2)}};
    return out;
}

Tensor GlobalAvgPool::backward(const Tensor& dy, const LayerCache& cache, bool) {
    const std::vector<int>& dims = cache.ints.at(0);
    Tensor dx({dims[0], dims[1], dims[2]});
    kernels::global_avg_pool_backward(dy.data.data(), dims[0], dims[1], dims[2], dx.data.data());
    return dx;
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(int in_dim, int out_dim)
    : in_dim_(in_dim),
      out_dim_(out_dim),
      weight_("weight", {out_dim, in_dim}),
      bias_("bias", {out_dim}) {}

Tensor Dense::forward(const Tensor& x, LayerCache* cache) {
    if (static_cast<int>(x.numel()) != in_dim_) {
        throw std::invalid_argument("input shape error in Dense");
    }
    Tensor out({out_dim_});
    kernels::dense_forward(x.data.data(), in_dim_, weight_.value.data.data(), bias_.value.data.data(),
                           out_dim_, out.data.data());
    if (cache) cache->tensors = {x};
    return out;
}

Tensor Dense::backward(const Tensor& dy, const LayerCache& cache, bool accumulate) {
    const Tensor& x = cache.tensors.at(0);
    Tensor dx(x.shape);
    kernels::dense_backward_input(dy.data.data(), out_dim_, weight_.value.data.data(), in_dim_, dx.data.data());
    if (accumulate) {
        kernels::dense_backward_params(dy.data.data(), out_dim_, x.data.data(), in_dim_,
                                       weight_.grad.data.data(), bias_.grad.data.data());
    }
    return dx;
}

void Dense::collect_params(std::vector<ParamTensor*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

void Dense::init(Rng& rng) {
    const double std = std::sqrt(2.0 / static_cast<double>(in_dim_));
    for (std::size_t i = 0; i < weight_.value.numel(); ++i) weight_.value[i] = rng.normal(0.0, std);
    bias_.value.zero();
}

// ---------------------------------------------------------------------------
// Bottleneck

Bottleneck::Bottleneck(int in_ch, int mid_ch, int out_ch, int stride)
    : projected_(stride != 1 || in_ch != out_ch),
      conv1_(in_ch, mid_ch, 1, 1, 0, false),
      conv2_(mid_ch, mid_ch, 3, stride, 1, false),
      conv3_(mid_ch, out_ch, 1, 1, 0, false),
      bn1_(mid_ch),
      bn2_(mid_ch),
      bn3_(out_ch) {
    if (projected_) {
        ds_conv_.emplace(in_ch, out_ch, 1, stride, 0, false);
        ds_bn_.emplace(out_ch);
    }
    auto rename = [](Layer& l, const std::string& prefix) {
        std::vector<ParamTensor*> ps;
        l.collect_params(ps);
        l.collect_state(ps);
        for (ParamTensor* p : ps) p->name = prefix + p->name;
    };
    rename(conv1_, "conv1.");
    rename(bn1_, "bn1.");
    rename(conv2_, "conv2.");
    rename(bn2_, "bn2.");
    rename(conv3_, "conv3.");
    rename(bn3_, "bn3.");
    if (projected_) {
        rename(*ds_conv_, "downsample.conv.");
        rename(*ds_bn_, "downsample.bn.");
    }
}

Tensor Bottleneck::forward(const Tensor& x, LayerCache* cache) {
    if (cache) {
        cache->children.resize(8);
        cache->tensors.resize(3);
    }
    auto child = [&](int i) -> LayerCache* {
        return cache ? &cache->children[static_cast<std::size_t>(i)] : nullptr;
    };

    Tensor u1 = bn1_.forward(conv1_.forward(x, child(0)), child(1));
    Tensor r1(u1.shape);
    kernels::relu_forward(u1.data.data(), static_cast<std::int64_t>(u1.numel()), r1.data.data());

    Tensor u2 = bn2_.forward(conv2_.forward(r1, child(2)), child(3));
    Tensor r2(u2.shape);
    kernels::relu_forward(u2.data.data(), static_cast<std::int64_t>(u2.numel()), r2.data.data());

    Tensor u3 = bn3_.forward(conv3_.forward(r2, child(4)), child(5));

    Tensor shortcut = projected_
                          ? ds_bn_->forward(ds_conv_->forward(x, child(6)), child(7))
                          : x;

    Tensor sum(u3.shape);
    for (std::size_t i = 0; i < sum.numel(); ++i) sum[i] = u3[i] + shortcut[i];

    Tensor out(sum.shape);
    kernels::relu_forward(sum.data.data(), static_cast<std::int64_t>(sum.numel()), out.data.data());

    if (cache) {
        cache->tensors[0] = std::move(u1);
        cache->tensors[1] = std::move(u2);
        cache->tensors[2] = std::move(sum);
    }
    return out;
}

Tensor Bottleneck::backward(const Tensor& dy, const LayerCache& cache, bool accumulate) {
    const Tensor& u1 = cache.tensors.at(0);
    const Tensor& u2 = cache.tensors.at(1);
    const Tensor& sum = cache.tensors.at(2);

    Tensor dsum(dy.shape);
    kernels::relu_backward(dy.data.data(), sum.data.data(), static_cast<std::int64_t>(sum.numel()),
                           dsum.data.data());

    // Main path.
    Tensor dr2 = conv3_.backward(bn3_.backward(dsum, cache.children.at(5), accumulate),
                                 cache.children.at(4), accumulate);
    Tensor du2(dr2.shape);
    kernels::relu_backward(dr2.data.data(), u2.data.data(), static_cast<std::int64_t>(u2.numel()),
                           du2.data.data());
    Tensor dr1 = conv2_.backward(bn2_.backward(du2, cache.children.at(3), accumulate),
                                 cache.children.at(2), accumulate);
    Tensor du1(dr1.shape);
    kernels::relu_backward(dr1.data.data(), u1.data.data(), static_cast<std::int64_t>(u1.numel()),
                           du1.data.data());
    Tensor dx = conv1_.backward(bn1_.backward(du1, cache.children.at(1), accumulate),
                                cache.children.at(0), accumulate);

    // Shortcut path.
    if (projected_) {
        Tensor dsc = ds_conv_->backward(ds_bn_->backward(dsum, cache.children.at(7), accumulate),
                                        cache.children.at(6), accumulate);
        for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += dsc[i];
    } else {
        for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += dsum[i];
    }
    return dx;
}

void Bottleneck::collect_params(std::vector<ParamTensor*>& out) {
    conv1_.collect_params(out);
    bn1_.collect_params(out);
    conv2_.collect_params(out);
    bn2_.collect_params(out);
    conv3_.collect_params(out);
    bn3_.collect_params(out);
    if (projected_) {
        ds_conv_->collect_params(out);
        ds_bn_->collect_params(out);
    }
}

void Bottleneck::collect_state(std::vector<ParamTensor*>& out) {
    bn1_.collect_state(out);
    bn2_.collect_state(out);
    bn3_.collect_state(out);
    if (projected_) ds_bn_->collect_state(out);
}

void Bottleneck::init(Rng& rng) {
    conv1_.init(rng);
    bn1_.init(rng);
    conv2_.init(rng);
    bn2_.init(rng);
    conv3_.init(rng);
    bn3_.init(rng);
    if (projected_) {
        ds_conv_->init(rng);
        ds_bn_->init(rng);
    }
}

}  // namespace xsim
