#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xsim/config.hpp"
#include "xsim/crop.hpp"
#include "xsim/dataset.hpp"
#include "xsim/gradcam.hpp"
#include "xsim/image_cache.hpp"
#include "xsim/image_io.hpp"
#include "xsim/manifest.hpp"
#include "xsim/metrics.hpp"
#include "xsim/model.hpp"
#include "xsim/preprocess.hpp"
#include "xsim/synthetic.hpp"
#include "xsim/trainer.hpp"

namespace fs = std::filesystem;
using namespace xsim;

namespace {

// Config precedence: explicit flag, then XSIM_CONFIG, then built-in defaults.
ExperimentConfig effective_config(const std::string& config_flag) {
    if (!config_flag.empty()) return load_config(config_flag);
    if (const char* env = std::getenv("XSIM_CONFIG")) {
        if (env[0] != '\0') return load_config(env);
    }
    return default_config();
}

std::string decision_phrase(Decision d) {
    return d == Decision::kSameClass ? "same class" : "different class";
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

struct SplitSets {
    std::vector<ImageRecord> records;
    std::vector<PairSample> train, val, test;
};

SplitSets split_and_pair(const ExperimentConfig& cfg) {
    DatasetIndex index = index_dataset(cfg.dataset_root);
    print_warnings(index.warnings);
    SplitSets sets;
    sets.records = index.records;
    stratified_split(sets.records, cfg.train_fraction, cfg.val_fraction_of_train, cfg.seed);
    sets.train = build_pairs(records_in_split(sets.records, Split::kTrain),
                             cfg.seed + kTrainPairSeed);
    // A tiny dataset can leave the val split without same-class partners;
    // training then proceeds without validation (selection by train loss).
    try {
        sets.val = build_pairs(records_in_split(sets.records, Split::kVal),
                               cfg.seed + kValPairSeed);
    } catch (const std::runtime_error& e) {
        std::cerr << "warning: no validation pairs (" << e.what() << ")\n";
        sets.val.clear();
    }
    sets.test =
        build_pairs(records_in_split(sets.records, Split::kTest), cfg.seed + kTestPairSeed);
    return sets;
}

int run_train(const ExperimentConfig& cfg, const fs::path& out) {
    fs::create_directories(out);
    SplitSets sets = split_and_pair(cfg);
    write_split_manifest(sets.records, out / "split.tsv");
    write_pair_manifest(sets.train, out / "train_pairs.tsv");
    write_pair_manifest(sets.val, out / "val_pairs.tsv");
    write_pair_manifest(sets.test, out / "test_pairs.tsv");

    SiameseNetwork model = SiameseNetwork::build(cfg);
    ImageCache images(cfg.image_height, cfg.image_width);
    TrainHistory history =
        train_model(model, sets.train, sets.val, cfg, images, &std::cout);
    write_history(history, out / "history.jsonl");
    save_model(model, out / "model.ckpt");
    save_config(cfg, out / "config.txt");

    EvaluationReport report = evaluate_pairs(model, sets.test, cfg.threshold, images);
    write_report(report, out / "report.json");
    std::cout << "best epoch " << history.best_epoch << ", test accuracy "
              << report.accuracy << "\n";

    RunManifest manifest;
    manifest.command = "train";
    manifest.config = cfg;
    manifest.inputs = {{"dataset", cfg.dataset_root}};
    manifest.outputs = {{"checkpoint", (out / "model.ckpt").string()},
                        {"history", (out / "history.jsonl").string()},
                        {"report", (out / "report.json").string()},
                        {"split", (out / "split.tsv").string()}};
    write_manifest(manifest, out / "manifest.json");
    return 0;
}

int run_predict(const std::string& model_path, const std::string& a_path,
                const std::string& b_path, double threshold_flag, bool has_threshold) {
    SiameseNetwork model = load_model(model_path);
    const ExperimentConfig& cfg = model.config();
    const double threshold = has_threshold ? threshold_flag : cfg.threshold;

    PreparedImage a = prepare_image_file(a_path, cfg.image_height, cfg.image_width);
    PreparedImage b = prepare_image_file(b_path, cfg.image_height, cfg.image_width);
    ForwardTrace trace = model.forward_pair(a, b, /*capture=*/false);

    std::printf("similarity %.1f%%, %s\n", 100.0 * similarity(trace.d),
                decision_phrase(decide(trace.d, threshold)).c_str());
    return 0;
}

int run_explain(const std::string& model_path, const std::string& a_path,
                const std::string& b_path, const fs::path& out, double alpha) {
    SiameseNetwork model = load_model(model_path);
    const ExperimentConfig& cfg = model.config();
    fs::create_directories(out);

    ImageU8 raw_a = load_image(a_path);
    ImageU8 raw_b = load_image(b_path);
    PreparedImage a = prepare_image(raw_a, cfg.image_height, cfg.image_width, a_path);
    PreparedImage b = prepare_image(raw_b, cfg.image_height, cfg.image_width, b_path);
    ImageU8 view_a = resize_image(raw_a, cfg.image_height, cfg.image_width);
    ImageU8 view_b = resize_image(raw_b, cfg.image_height, cfg.image_width);

    ExplanationBundle bundle = explain_pair(model, a, b);

    auto emit = [&](const Heatmap& heat, const ImageU8& view, const std::string& name) {
        save_image(overlay_heatmap(view, heat.normalized, alpha), out / name);
    };
    emit(bundle.factual_a, view_a, "factual_a.png");
    emit(bundle.factual_b, view_b, "factual_b.png");
    emit(bundle.counterfactual_a, view_a, "counterfactual_a.png");
    emit(bundle.counterfactual_b, view_b, "counterfactual_b.png");

    std::ofstream meta(out / "explanation.json", std::ios::binary);
    meta << "{\n"
         << "  \"d\": " << bundle.d << ",\n"
         << "  \"similarity\": " << bundle.similarity << ",\n"
         << "  \"decision\": \"" << to_string(bundle.decision) << "\",\n"
         << "  \"alpha\": " << alpha << ",\n"
         << "  \"files\": [\"factual_a.png\", \"factual_b.png\", "
            "\"counterfactual_a.png\", \"counterfactual_b.png\"]\n"
         << "}\n";

    RunManifest manifest;
    manifest.command = "explain";
    manifest.config = cfg;
    manifest.inputs = {{"model", model_path}, {"image_a", a_path}, {"image_b", b_path}};
    manifest.outputs = {{"bundle", (out / "explanation.json").string()}};
    write_manifest(manifest, out / "manifest.json");

    std::printf("similarity %.1f%%, %s\n", 100.0 * bundle.similarity,
                decision_phrase(bundle.decision).c_str());
    return 0;
}

int run_crop_dataset(const std::string& model_path, const std::string& data,
                     const fs::path& out, double gate_flag, bool has_gate) {
    SiameseNetwork model = load_model(model_path);
    ExperimentConfig cfg = model.config();
    cfg.dataset_root = data;
    if (has_gate) cfg.crop_similarity_gate = gate_flag;
    validate_config(cfg);

    DatasetIndex index = index_dataset(data);
    print_warnings(index.warnings);

    CropOutcome outcome = build_cropped_dataset(model, index.records, cfg, out);
    write_crop_audit(outcome.audits, out / "crop_audit.tsv");

    int cropped = 0;
    for (const auto& a : outcome.audits) {
        if (a.action == "cropped") ++cropped;
    }
    std::cout << "cropped " << cropped << " of " << outcome.audits.size() << " images into "
              << out.string() << "\n";

    RunManifest manifest;
    manifest.command = "crop-dataset";
    manifest.config = cfg;
    manifest.inputs = {{"model", model_path}, {"dataset", data}};
    manifest.outputs = {{"dataset", out.string()},
                        {"audit", (out / "crop_audit.tsv").string()}};
    write_manifest(manifest, out / "manifest.json");
    return 0;
}

int run_compare(const ExperimentConfig& cfg, const fs::path& out) {
    ComparisonOutcome outcome = compare_original_vs_cropped(cfg, out, &std::cerr);
    const std::string table = render_comparison(outcome.original, outcome.cropped);
    std::cout << table;
    std::ofstream table_file(out / "comparison.txt", std::ios::binary);
    table_file << table;
    save_config(cfg, out / "config.txt");

    RunManifest manifest;
    manifest.command = "compare";
    manifest.config = cfg;
    manifest.inputs = {{"dataset", cfg.dataset_root}};
    manifest.outputs = {{"report_original", (out / "report_original.json").string()},
                        {"report_cropped", (out / "report_cropped.json").string()},
                        {"audit", (out / "crop_audit.tsv").string()},
                        {"comparison", (out / "comparison.txt").string()}};
    write_manifest(manifest, out / "manifest.json");
    return 0;
}

int run_evaluate(const std::string& model_path, const std::string& data) {
    SiameseNetwork model = load_model(model_path);
    ExperimentConfig cfg = model.config();
    cfg.dataset_root = data;

    SplitSets sets = split_and_pair(cfg);
    ImageCache images(cfg.image_height, cfg.image_width);
    EvaluationReport report =
        evaluate_pairs(model, sets.test, cfg.threshold, images, /*macro=*/true);
    std::cout << render_report(report);
    return 0;
}

int run_synth(int classes, int per_class, const fs::path& out, uint64_t seed, int height,
              int width) {
    auto boxes = generate_synthetic_dataset(out, classes, per_class, height, width, seed);
    std::cout << "wrote " << boxes.size() << " images under " << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trainable, explainable image similarity"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "train a model on a directory-per-class dataset");
    std::string train_config, train_data, train_out;
    train->add_option("--config", train_config, "config file (default: $XSIM_CONFIG)");
    train->add_option("--data", train_data, "dataset root")->required();
    train->add_option("--out", train_out, "output directory")->required();
    uint64_t f_seed = 0;
    int f_epochs = 0, f_batch = 0;
    double f_lr = 0, f_threshold = 0, f_margin = 0;
    std::string f_backbone, f_target, f_image_size;
    train->add_option("--seed", f_seed, "override: random seed");
    train->add_option("--epochs", f_epochs, "override: training epochs");
    train->add_option("--batch-size", f_batch, "override: batch size");
    train->add_option("--lr", f_lr, "override: learning rate");
    train->add_option("--threshold", f_threshold, "override: decision threshold");
    train->add_option("--margin", f_margin, "override: contrastive margin");
    train->add_option("--backbone", f_backbone, "override: small-cnn or resnet50");
    train->add_option("--target-layer", f_target, "override: heatmap capture layer");
    train->add_option("--image-size", f_image_size, "override: HxW network input");

    // predict
    auto* predict = app.add_subcommand("predict", "score one image pair");
    std::string p_model, p_a, p_b;
    double p_threshold = 0;
    predict->add_option("--model", p_model, "checkpoint")->required();
    predict->add_option("--a", p_a, "first image")->required();
    predict->add_option("--b", p_b, "second image")->required();
    predict->add_option("--threshold", p_threshold, "decision threshold override");

    // explain
    auto* explain = app.add_subcommand("explain", "write heatmap overlays for one pair");
    std::string e_model, e_a, e_b, e_out;
    double e_alpha = 0.5;
    explain->add_option("--model", e_model, "checkpoint")->required();
    explain->add_option("--a", e_a, "first image")->required();
    explain->add_option("--b", e_b, "second image")->required();
    explain->add_option("--out", e_out, "output directory")->required();
    explain->add_option("--alpha", e_alpha, "overlay blend weight (0..1)");

    // crop-dataset
    auto* crop = app.add_subcommand("crop-dataset", "crop images under their heatmap boxes");
    std::string c_model, c_data, c_out;
    double c_gate = 0.8;
    crop->add_option("--model", c_model, "checkpoint")->required();
    crop->add_option("--data", c_data, "dataset root")->required();
    crop->add_option("--out", c_out, "output dataset root")->required();
    crop->add_option("--gate", c_gate, "similarity gate in (0,1)");

    // compare
    auto* compare = app.add_subcommand("compare", "train on originals and crops, report both");
    std::string m_config, m_data, m_out;
    compare->add_option("--config", m_config, "config file (default: $XSIM_CONFIG)");
    compare->add_option("--data", m_data, "dataset root")->required();
    compare->add_option("--out", m_out, "output directory")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "report test-split metrics");
    std::string v_model, v_data;
    evaluate->add_option("--model", v_model, "checkpoint")->required();
    evaluate->add_option("--data", v_data, "dataset root")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic shape dataset");
    int s_classes = 0, s_per_class = 0, s_height = 64, s_width = 64;
    uint64_t s_seed = 0;
    std::string s_out;
    synth->add_option("--classes", s_classes, "number of classes")->required();
    synth->add_option("--per-class", s_per_class, "images per class")->required();
    synth->add_option("--out", s_out, "output dataset root")->required();
    synth->add_option("--seed", s_seed, "generator seed")->required();
    synth->add_option("--height", s_height, "image height");
    synth->add_option("--width", s_width, "image width");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            ExperimentConfig cfg = effective_config(train_config);
            cfg.dataset_root = train_data;
            if (train->count("--seed")) cfg.seed = f_seed;
            if (train->count("--epochs")) cfg.epochs = f_epochs;
            if (train->count("--batch-size")) cfg.batch_size = f_batch;
            if (train->count("--lr")) cfg.learning_rate = f_lr;
            if (train->count("--threshold")) cfg.threshold = f_threshold;
            if (train->count("--margin")) cfg.margin = f_margin;
            if (train->count("--backbone")) {
                cfg.backbone_id = backbone_from_string(f_backbone);
                cfg.target_layer = default_target_layer(cfg.backbone_id);
                if (!train->count("--lr")) cfg.learning_rate = default_learning_rate(cfg.backbone_id);
            }
            if (train->count("--target-layer")) cfg.target_layer = f_target;
            if (train->count("--image-size")) parse_image_size(f_image_size, cfg);
            validate_config(cfg);
            return run_train(cfg, train_out);
        }
        if (*predict) {
            return run_predict(p_model, p_a, p_b, p_threshold,
                               predict->count("--threshold") > 0);
        }
        if (*explain) return run_explain(e_model, e_a, e_b, e_out, e_alpha);
        if (*crop) {
            return run_crop_dataset(c_model, c_data, c_out, c_gate,
                                    crop->count("--gate") > 0);
        }
        if (*compare) {
            ExperimentConfig cfg = effective_config(m_config);
            cfg.dataset_root = m_data;
            validate_config(cfg);
            return run_compare(cfg, m_out);
        }
        if (*evaluate) return run_evaluate(v_model, v_data);
        if (*synth) return run_synth(s_classes, s_per_class, s_out, s_seed, s_height, s_width);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
