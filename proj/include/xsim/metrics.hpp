#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xsim/dataset.hpp"
#include "xsim/image_cache.hpp"
#include "xsim/model.hpp"

namespace xsim {

// Pair-level evaluation. The positive class is "similar" (label 0) and the
// ranking score is similarity = 1 - d.
struct EvaluationReport {
    int n_pairs = 0;
    int n_similar = 0;
    int n_dissimilar = 0;
    double threshold = 0.0;
    double accuracy = 0.0;
    double precision = 0.0;  // positive class = similar
    double recall = 0.0;
    std::optional<double> auc;        // absent when only one label is present
    std::optional<double> macro_precision;  // only when macro averaging is on
    std::optional<double> macro_recall;
    std::string note;  // e.g. why auc is absent
};

// Mann-Whitney rank AUC of similarity scores: ties contribute 1/2.
// positive = scores of similar pairs, negative = scores of dissimilar pairs.
double rank_auc(const std::vector<double>& positive, const std::vector<double>& negative);

// d_values and labels are parallel; labels use the pair convention
// (0 similar, 1 dissimilar).
EvaluationReport evaluate_scores(const std::vector<double>& d_values,
                                 const std::vector<int>& labels, double threshold,
                                 bool macro = false);

EvaluationReport evaluate_pairs(SiameseNetwork& model, const std::vector<PairSample>& pairs,
                                double threshold, ImageCache& images, bool macro = false);

void write_report(const EvaluationReport& report, const std::filesystem::path& path);

std::string render_report(const EvaluationReport& report);

// Two-row comparison table (original vs cropped training data).
std::string render_comparison(const EvaluationReport& original, const EvaluationReport& cropped);

}  // namespace xsim
