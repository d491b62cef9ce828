#include "xsim/gradcam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "xsim/kernels.hpp"

namespace xsim {

std::string to_string(Branch b) { return b == Branch::kA ? "a" : "b"; }

std::string to_string(ExplanationMode m) {
    return m == ExplanationMode::kFactual ? "factual" : "counterfactual";
}

NeuronWeights neuron_weights(SiameseNetwork& model, const ForwardTrace& trace, Branch branch,
                             ExplanationMode mode, GradcamTarget target,
                             bool recompute_counterfactual) {
    if (!trace.captured) throw std::runtime_error("no gradient capture");

    const bool branch_a = branch == Branch::kA;
    double seed = 1.0;
    if (mode == ExplanationMode::kCounterfactual && recompute_counterfactual) {
        // d(1-y)/dA: rerun the backward pass with a negated seed.
        seed = -1.0;
    }
    Tensor grad = model.target_gradient(trace, branch_a, seed, target);
    if (grad.shape.size() != 3) {
        throw std::runtime_error("no gradient capture");
    }

    const int channels = grad.shape[0];
    const int spatial = grad.shape[1] * grad.shape[2];
    const double inv_z = 1.0 / static_cast<double>(spatial);

    NeuronWeights w;
    w.branch = branch;
    w.mode = mode;
    w.alpha = Tensor::zeros({channels});
    for (int k = 0; k < channels; ++k) {
        double sum = 0.0;
        for (int i = 0; i < spatial; ++i) {
            sum += grad[static_cast<size_t>(k * spatial + i)];
        }
        w.alpha[static_cast<size_t>(k)] = sum * inv_z;
    }
    if (mode == ExplanationMode::kCounterfactual && !recompute_counterfactual) {
        for (size_t i = 0; i < w.alpha.numel(); ++i) w.alpha[i] = -w.alpha[i];
    }
    return w;
}

Tensor gradcam_map(const Tensor& alpha, const Tensor& activations) {
    if (activations.shape.size() != 3 ||
        alpha.numel() != static_cast<size_t>(activations.shape[0])) {
        throw std::runtime_error("channel count mismatch");
    }
    const int channels = activations.shape[0];
    const int h = activations.shape[1];
    const int w = activations.shape[2];
    Tensor map = Tensor::zeros({h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double sum = 0.0;
            for (int k = 0; k < channels; ++k) {
                sum += alpha[static_cast<size_t>(k)] * activations(k, y, x);
            }
            map(y, x) = std::max(0.0, sum);
        }
    }
    return map;
}

Tensor upsample_normalize(const Tensor& raw, int height, int width) {
    Tensor up = Tensor::zeros({height, width});
    kernels::bilinear_resize(raw.data.data(), raw.shape[0], raw.shape[1], up.data.data(),
                             height, width);
    double lo = up[0], hi = up[0];
    for (size_t i = 1; i < up.numel(); ++i) {
        lo = std::min(lo, up[i]);
        hi = std::max(hi, up[i]);
    }
    if (hi == lo) {
        // Flat map: all ones when there is signal, all zeros otherwise.
        const double fill = hi > 0.0 ? 1.0 : 0.0;
        for (size_t i = 0; i < up.numel(); ++i) up[i] = fill;
        return up;
    }
    const double inv = 1.0 / (hi - lo);
    for (size_t i = 0; i < up.numel(); ++i) up[i] = (up[i] - lo) * inv;
    return up;
}

ExplanationBundle explain_pair(SiameseNetwork& model, const PreparedImage& a,
                               const PreparedImage& b) {
    const ExperimentConfig& cfg = model.config();
    ForwardTrace trace = model.forward_pair(a, b, /*capture=*/true);

    ExplanationBundle bundle;
    bundle.d = trace.d;
    bundle.similarity = similarity(trace.d);
    bundle.decision = decide(trace.d, cfg.threshold);

    auto make = [&](Branch branch, ExplanationMode mode) {
        NeuronWeights w = neuron_weights(model, trace, branch, mode, cfg.gradcam_target);
        const Tensor& acts =
            branch == Branch::kA ? trace.activations_a : trace.activations_b;
        Heatmap h;
        h.branch = branch;
        h.mode = mode;
        h.raw = gradcam_map(w.alpha, acts);
        h.normalized = upsample_normalize(h.raw, cfg.image_height, cfg.image_width);
        return h;
    };

    bundle.factual_a = make(Branch::kA, ExplanationMode::kFactual);
    bundle.factual_b = make(Branch::kB, ExplanationMode::kFactual);
    bundle.counterfactual_a = make(Branch::kA, ExplanationMode::kCounterfactual);
    bundle.counterfactual_b = make(Branch::kB, ExplanationMode::kCounterfactual);
    return bundle;
}

Rgb colormap_jet(double v) {
    v = std::clamp(v, 0.0, 1.0);
    auto band = [](double x) { return std::clamp(x, 0.0, 1.0); };
    const double r = band(1.5 - std::abs(4.0 * v - 3.0));
    const double g = band(1.5 - std::abs(4.0 * v - 2.0));
    const double b = band(1.5 - std::abs(4.0 * v - 1.0));
    Rgb out;
    out.r = static_cast<uint8_t>(std::lround(255.0 * r));
    out.g = static_cast<uint8_t>(std::lround(255.0 * g));
    out.b = static_cast<uint8_t>(std::lround(255.0 * b));
    return out;
}

ImageU8 overlay_heatmap(const ImageU8& source, const Tensor& normalized, double alpha) {
    if (normalized.shape.size() != 2 || normalized.shape[0] != source.height ||
        normalized.shape[1] != source.width) {
        throw std::runtime_error("overlay shape error");
    }
    ImageU8 out = source;
    if (alpha == 0.0) return out;  // bit-exact passthrough
    for (int y = 0; y < source.height; ++y) {
        for (int x = 0; x < source.width; ++x) {
            const Rgb c = colormap_jet(normalized(y, x));
            const double cr = c.r, cg = c.g, cb = c.b;
            out.at(y, x, 0) = static_cast<uint8_t>(
                std::lround((1.0 - alpha) * source.at(y, x, 0) + alpha * cr));
            out.at(y, x, 1) = static_cast<uint8_t>(
                std::lround((1.0 - alpha) * source.at(y, x, 1) + alpha * cg));
            out.at(y, x, 2) = static_cast<uint8_t>(
                std::lround((1.0 - alpha) * source.at(y, x, 2) + alpha * cb));
        }
    }
    return out;
}

}  // namespace xsim
