#include "xsim/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace xsim {

double rank_auc(const std::vector<double>& positive, const std::vector<double>& negative) {
    if (positive.empty() || negative.empty()) {
        throw std::invalid_argument("rank_auc needs both classes");
    }
    struct Entry {
        double score;
        bool positive;
    };
    std::vector<Entry> all;
    all.reserve(positive.size() + negative.size());
    for (double s : positive) all.push_back({s, true});
    for (double s : negative) all.push_back({s, false});
    std::sort(all.begin(), all.end(),
              [](const Entry& a, const Entry& b) { return a.score < b.score; });

    // Average ranks over tie groups, then the Mann-Whitney U statistic.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < all.size()) {
        size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t k = i; k < j; ++k) {
            if (all[k].positive) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double np = static_cast<double>(positive.size());
    const double nn = static_cast<double>(negative.size());
    const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
    return u / (np * nn);
}

EvaluationReport evaluate_scores(const std::vector<double>& d_values,
                                 const std::vector<int>& labels, double threshold,
                                 bool macro) {
    if (d_values.size() != labels.size()) {
        throw std::invalid_argument("evaluate_scores: size mismatch");
    }
    EvaluationReport report;
    report.n_pairs = static_cast<int>(d_values.size());
    report.threshold = threshold;

    int tp = 0, fp = 0, tn = 0, fn = 0;
    std::vector<double> sim_scores, dis_scores;
    for (size_t i = 0; i < d_values.size(); ++i) {
        const bool actual_similar = labels[i] == 0;
        const bool predicted_similar = decide(d_values[i], threshold) == Decision::kSameClass;
        const double score = similarity(d_values[i]);
        if (actual_similar) {
            ++report.n_similar;
            sim_scores.push_back(score);
            predicted_similar ? ++tp : ++fn;
        } else {
            ++report.n_dissimilar;
            dis_scores.push_back(score);
            predicted_similar ? ++fp : ++tn;
        }
    }

    const double total = static_cast<double>(report.n_pairs);
    report.accuracy = total > 0 ? (tp + tn) / total : 0.0;
    report.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    report.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;

    if (!sim_scores.empty() && !dis_scores.empty()) {
        report.auc = rank_auc(sim_scores, dis_scores);
    } else {
        report.note = "auc unavailable: pairs cover a single label";
    }

    if (macro) {
        // Macro over the two pair classes; "dissimilar" flips the confusion.
        const double prec_neg = (tn + fn) > 0 ? static_cast<double>(tn) / (tn + fn) : 0.0;
        const double rec_neg = (tn + fp) > 0 ? static_cast<double>(tn) / (tn + fp) : 0.0;
        report.macro_precision = 0.5 * (report.precision + prec_neg);
        report.macro_recall = 0.5 * (report.recall + rec_neg);
    }
    return report;
}

EvaluationReport evaluate_pairs(SiameseNetwork& model, const std::vector<PairSample>& pairs,
                                double threshold, ImageCache& images, bool macro) {
    std::vector<double> d_values;
    std::vector<int> labels;
    d_values.reserve(pairs.size());
    labels.reserve(pairs.size());
    for (const PairSample& pair : pairs) {
        const PreparedImage& a = images.get(pair.anchor);
        const PreparedImage& b = images.get(pair.partner);
        ForwardTrace trace = model.forward_pair(a, b, /*capture=*/false);
        d_values.push_back(trace.d);
        labels.push_back(pair.label);
    }
    return evaluate_scores(d_values, labels, threshold, macro);
}

void write_report(const EvaluationReport& report, const std::filesystem::path& path) {
    nlohmann::json j = {
        {"n_pairs", report.n_pairs},       {"n_similar", report.n_similar},
        {"n_dissimilar", report.n_dissimilar}, {"threshold", report.threshold},
        {"accuracy", report.accuracy},     {"precision", report.precision},
        {"recall", report.recall},         {"positive_class", "similar"},
    };
    if (report.auc) {
        j["auc"] = *report.auc;
    } else {
        j["auc"] = nullptr;
    }
    if (!report.note.empty()) j["note"] = report.note;
    if (report.macro_precision) j["macro_precision"] = *report.macro_precision;
    if (report.macro_recall) j["macro_recall"] = *report.macro_recall;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("file not found: " + path.string());
    out << j.dump(2) << "\n";
}

namespace {

std::string fmt(double v) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(4) << v;
    return ss.str();
}

}  // namespace

std::string render_report(const EvaluationReport& report) {
    std::ostringstream ss;
    ss << "pairs: " << report.n_pairs << " (" << report.n_similar << " similar, "
       << report.n_dissimilar << " dissimilar), threshold " << report.threshold << "\n";
    ss << "accuracy  " << fmt(report.accuracy) << "\n";
    if (report.auc) {
        ss << "auc       " << fmt(*report.auc) << "\n";
    } else {
        ss << "auc       n/a (" << report.note << ")\n";
    }
    ss << "precision " << fmt(report.precision) << "\n";
    ss << "recall    " << fmt(report.recall) << "\n";
    if (report.macro_precision && report.macro_recall) {
        ss << "macro precision " << fmt(*report.macro_precision) << ", macro recall "
           << fmt(*report.macro_recall) << "\n";
    }
    return ss.str();
}

std::string render_comparison(const EvaluationReport& original,
                              const EvaluationReport& cropped) {
    auto auc_cell = [](const EvaluationReport& r) {
        return r.auc ? fmt(*r.auc) : std::string("n/a");
    };
    std::ostringstream ss;
    ss << "training data | accuracy | auc    | precision | recall\n";
    ss << "------------- | -------- | ------ | --------- | ------\n";
    ss << "original      | " << fmt(original.accuracy) << "   | " << auc_cell(original)
       << " | " << fmt(original.precision) << "    | " << fmt(original.recall) << "\n";
    ss << "cropped       | " << fmt(cropped.accuracy) << "   | " << auc_cell(cropped)
       << " | " << fmt(cropped.precision) << "    | " << fmt(cropped.recall) << "\n";
    return ss.str();
}

}  // namespace xsim
