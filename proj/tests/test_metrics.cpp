#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "xsim/metrics.hpp"
#include "xsim/rng.hpp"

using namespace xsim;
namespace fs = std::filesystem;

namespace {

// O(P*N) probability that a positive outranks a negative, ties counting half.
// Independent of the rank-based implementation under test.
double brute_force_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    double wins = 0.0;
    for (double p : pos) {
        for (double n : neg) {
            if (p > n) {
                wins += 1.0;
            } else if (p == n) {
                wins += 0.5;
            }
        }
    }
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace

TEST_CASE("rank auc equals the pairwise comparison probability") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const int np = 1 + rng.uniform_int(25);
        const int nn = 1 + rng.uniform_int(25);
        std::vector<double> pos, neg;
        for (int i = 0; i < np; ++i) pos.push_back(rng.uniform());
        for (int i = 0; i < nn; ++i) neg.push_back(rng.uniform());
        // Quantize some trials so tie groups actually occur.
        if (trial % 3 == 0) {
            for (double& s : pos) s = std::round(s * 4.0) / 4.0;
            for (double& s : neg) s = std::round(s * 4.0) / 4.0;
        }
        CAPTURE(trial);
        CHECK(rank_auc(pos, neg) ==
              doctest::Approx(brute_force_auc(pos, neg)).epsilon(1e-12));
    }
}

TEST_CASE("a perfect ranking scores auc one, a tied one half") {
    CHECK(rank_auc({0.9, 0.8}, {0.2, 0.1}) == 1.0);
    CHECK(rank_auc({0.1, 0.2}, {0.8, 0.9}) == 0.0);
    CHECK(rank_auc({0.5, 0.5, 0.5}, {0.5, 0.5}) == 0.5);
}

TEST_CASE("rank auc is invariant under monotone score transforms") {
    Rng rng(2);
    std::vector<double> pos, neg;
    for (int i = 0; i < 15; ++i) pos.push_back(rng.uniform());
    for (int i = 0; i < 11; ++i) neg.push_back(rng.uniform());
    const double before = rank_auc(pos, neg);
    for (double& s : pos) s = s * s * s;
    for (double& s : neg) s = s * s * s;
    CHECK(rank_auc(pos, neg) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("rank auc refuses a single-class input") {
    CHECK_THROWS_AS(rank_auc({0.5}, {}), std::invalid_argument);
    CHECK_THROWS_AS(rank_auc({}, {0.5}), std::invalid_argument);
}

TEST_CASE("the four-pair reference evaluation") {
    // d per pair, labels 0 = similar: one dissimilar pair leaks under the
    // threshold, everything else is classified correctly.
    const std::vector<double> d = {0.1, 0.4, 0.3, 0.8};
    const std::vector<int> labels = {0, 0, 1, 1};
    EvaluationReport r = evaluate_scores(d, labels, 0.5);
    CHECK(r.n_pairs == 4);
    CHECK(r.n_similar == 2);
    CHECK(r.n_dissimilar == 2);
    CHECK(r.accuracy == 0.75);
    CHECK(r.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.recall == 1.0);
    REQUIRE(r.auc.has_value());
    CHECK(*r.auc == 0.75);
    CHECK(r.note.empty());
}

TEST_CASE("a clean separation scores one everywhere") {
    EvaluationReport r = evaluate_scores({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}, 0.5);
    CHECK(r.accuracy == 1.0);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    REQUIRE(r.auc.has_value());
    CHECK(*r.auc == 1.0);
}

TEST_CASE("a score exactly at threshold counts as dissimilar") {
    EvaluationReport r = evaluate_scores({0.5}, {1}, 0.5);
    CHECK(r.accuracy == 1.0);
}

TEST_CASE("single-label inputs drop the auc and say why") {
    EvaluationReport r = evaluate_scores({0.1, 0.3}, {0, 0}, 0.5);
    CHECK_FALSE(r.auc.has_value());
    CHECK(r.note == "auc unavailable: pairs cover a single label");
    CHECK(r.accuracy == 1.0);
    CHECK(r.recall == 1.0);
}

TEST_CASE("macro averaging folds in the dissimilar class") {
    const std::vector<double> d = {0.1, 0.4, 0.3, 0.8};
    const std::vector<int> labels = {0, 0, 1, 1};

    EvaluationReport plain = evaluate_scores(d, labels, 0.5, false);
    CHECK_FALSE(plain.macro_precision.has_value());
    CHECK_FALSE(plain.macro_recall.has_value());

    EvaluationReport macro = evaluate_scores(d, labels, 0.5, true);
    REQUIRE(macro.macro_precision.has_value());
    REQUIRE(macro.macro_recall.has_value());
    // Similar class: precision 2/3, recall 1. Dissimilar: precision 1, recall 1/2.
    CHECK(*macro.macro_precision == doctest::Approx(0.5 * (2.0 / 3.0 + 1.0)).epsilon(1e-12));
    CHECK(*macro.macro_recall == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("reports serialize to json with an explicit null auc") {
    EvaluationReport r = evaluate_scores({0.1, 0.9}, {0, 1}, 0.5, true);
    fs::path path = fs::temp_directory_path() / "xsim_report.json";
    write_report(r, path);

    std::ifstream in(path);
    nlohmann::json j = nlohmann::json::parse(in);
    CHECK(j["n_pairs"] == 2);
    CHECK(j["accuracy"] == 1.0);
    CHECK(j["auc"] == 1.0);
    CHECK(j["positive_class"] == "similar");
    CHECK(j["macro_precision"].is_number());

    EvaluationReport single = evaluate_scores({0.1}, {0}, 0.5);
    write_report(single, path);
    std::ifstream in2(path);
    nlohmann::json j2 = nlohmann::json::parse(in2);
    CHECK(j2["auc"].is_null());
    CHECK(j2["note"] == "auc unavailable: pairs cover a single label");
}

TEST_CASE("rendered reports and comparisons carry the headline numbers") {
    EvaluationReport r = evaluate_scores({0.1, 0.4, 0.3, 0.8}, {0, 0, 1, 1}, 0.5);
    std::string text = render_report(r);
    CHECK(text.find("accuracy  0.7500") != std::string::npos);
    CHECK(text.find("auc       0.7500") != std::string::npos);
    CHECK(text.find("recall    1.0000") != std::string::npos);

    EvaluationReport perfect = evaluate_scores({0.1, 0.9}, {0, 1}, 0.5);
    std::string table = render_comparison(r, perfect);
    CHECK(table.find("original") != std::string::npos);
    CHECK(table.find("cropped") != std::string::npos);
    CHECK(table.find("0.7500") != std::string::npos);
    CHECK(table.find("1.0000") != std::string::npos);
}
