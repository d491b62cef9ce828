#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xsim/config.hpp"
#include "xsim/image_io.hpp"
#include "xsim/model.hpp"
#include "xsim/tensor.hpp"

namespace xsim {

enum class Branch { kA, kB };
enum class ExplanationMode { kFactual, kCounterfactual };

std::string to_string(Branch b);
std::string to_string(ExplanationMode m);

// One weight per channel of the target activation map:
//   alpha_k = (1/Z) * sum_ij d(score)/d(A_k_ij)
// where score is the network output d (or its logit, per config) and the
// counterfactual score is 1 - d, whose gradient is exactly the negated
// factual one.
struct NeuronWeights {
    Tensor alpha;  // [K]
    Branch branch = Branch::kA;
    ExplanationMode mode = ExplanationMode::kFactual;
};

// recompute_counterfactual runs a second backward pass seeded with -1 instead
// of negating the factual weights; the two paths agree to machine precision
// and the flag exists so tests can prove it.
NeuronWeights neuron_weights(SiameseNetwork& model, const ForwardTrace& trace, Branch branch,
                             ExplanationMode mode, GradcamTarget target,
                             bool recompute_counterfactual = false);

// Weighted channel sum with ReLU:  L_ij = max(0, sum_k alpha_k * A_k_ij).
// Throws std::runtime_error("channel count mismatch") when alpha and A
// disagree on K.
Tensor gradcam_map(const Tensor& alpha, const Tensor& activations);

// Bilinear upsample to (height, width) then min-max normalize to [0,1].
// An all-zero map stays all zero; a constant positive map becomes all ones.
Tensor upsample_normalize(const Tensor& raw, int height, int width);

struct Heatmap {
    Tensor raw;         // target-layer resolution, after ReLU
    Tensor normalized;  // input resolution, [0,1]
    Branch branch = Branch::kA;
    ExplanationMode mode = ExplanationMode::kFactual;
};

struct ExplanationBundle {
    double d = 0.0;
    double similarity = 0.0;
    Decision decision = Decision::kDifferentClass;
    Heatmap factual_a, factual_b;
    Heatmap counterfactual_a, counterfactual_b;
};

// Full explanation for one pair: factual and counterfactual heatmaps for both
// branches plus the scalar outputs.
ExplanationBundle explain_pair(SiameseNetwork& model, const PreparedImage& a,
                               const PreparedImage& b);

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;
};

// Jet-style colormap over [0,1]: dark blue through cyan/yellow to dark red.
Rgb colormap_jet(double v);

// alpha-blends the colormapped heatmap over the source image; alpha 0 returns
// the source bytes untouched. Throws std::runtime_error("overlay shape
// error") when the heatmap and image dimensions differ.
ImageU8 overlay_heatmap(const ImageU8& source, const Tensor& normalized, double alpha);

}  // namespace xsim
