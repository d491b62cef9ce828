#include "xsim/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace xsim {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void malformed(const std::string& detail) {
    throw std::runtime_error("malformed config: " + detail);
}

[[noreturn]] void invalid(const std::string& field) {
    throw std::invalid_argument("invalid config: " + field);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) malformed("bad number for '" + key + "'");
        return x;
    } catch (const std::invalid_argument&) {
        malformed("bad number for '" + key + "'");
    } catch (const std::out_of_range&) {
        malformed("bad number for '" + key + "'");
    }
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long long x = std::stoll(v, &pos);
        if (pos != v.size()) malformed("bad integer for '" + key + "'");
        return x;
    } catch (const std::invalid_argument&) {
        malformed("bad integer for '" + key + "'");
    } catch (const std::out_of_range&) {
        malformed("bad integer for '" + key + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    malformed("bad boolean for '" + key + "' (use true/false)");
}

// Shortest representation that parses back to the same double.
std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string to_string(BackboneId b) {
    return b == BackboneId::kSmallCnn ? "small-cnn" : "resnet50";
}

std::string to_string(LossTarget t) {
    return t == LossTarget::kOutput ? "output" : "embedding_distance";
}

std::string to_string(GradcamTarget t) {
    return t == GradcamTarget::kOutput ? "output" : "logit";
}

double default_learning_rate(BackboneId backbone) {
    // Pretrained fine-tuning wants a smaller step than from-scratch training.
    return backbone == BackboneId::kResNet50 ? 1e-4 : 1e-3;
}

std::string default_target_layer(BackboneId backbone) {
    // Last convolutional feature map of each backbone.
    return backbone == BackboneId::kResNet50 ? "layer4.2" : "relu4";
}

ExperimentConfig default_config(BackboneId backbone) {
    ExperimentConfig cfg;
    cfg.backbone_id = backbone;
    cfg.learning_rate = default_learning_rate(backbone);
    cfg.target_layer = default_target_layer(backbone);
    return cfg;
}

BackboneId backbone_from_string(const std::string& name) {
    if (name == "small-cnn") return BackboneId::kSmallCnn;
    if (name == "resnet50") return BackboneId::kResNet50;
    invalid("backbone_id");
}

void parse_image_size(const std::string& value, ExperimentConfig& cfg) {
    std::size_t x = value.find('x');
    if (x == std::string::npos) malformed("image_size must be HxW");
    cfg.image_height = static_cast<int>(parse_int("image_size", trim(value.substr(0, x))));
    cfg.image_width = static_cast<int>(parse_int("image_size", trim(value.substr(x + 1))));
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.image_height <= 0 || cfg.image_width <= 0) invalid("image_size");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) invalid("train_fraction");
    if (!(cfg.val_fraction_of_train >= 0.0 && cfg.val_fraction_of_train < 1.0)) {
        invalid("val_fraction_of_train");
    }
    if (cfg.embedding_dim <= 0) invalid("embedding_dim");
    if (!(cfg.margin >= 0.0)) invalid("margin");
    if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) invalid("threshold");
    if (cfg.epochs <= 0) invalid("epochs");
    if (cfg.batch_size <= 0) invalid("batch_size");
    if (!(cfg.learning_rate > 0.0)) invalid("learning_rate");
    if (cfg.target_layer.empty()) invalid("target_layer");
    if (!(cfg.crop_similarity_gate > 0.0 && cfg.crop_similarity_gate < 1.0)) {
        invalid("crop_similarity_gate");
    }
    if (!(cfg.bbox_fraction > 0.0 && cfg.bbox_fraction < 1.0)) invalid("bbox_fraction");
    if (!(cfg.min_box_area_fraction > 0.0 && cfg.min_box_area_fraction <= 1.0)) {
        invalid("min_box_area_fraction");
    }
}

ExperimentConfig parse_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) malformed("missing '=' on line " + std::to_string(lineno));
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) malformed("empty key on line " + std::to_string(lineno));
        if (kv.count(key)) malformed("duplicate key '" + key + "'");
        kv[key] = value;
    }

    // The backbone decides the learning-rate and target-layer defaults, so
    // resolve it before the rest.
    BackboneId backbone = BackboneId::kSmallCnn;
    if (auto it = kv.find("backbone_id"); it != kv.end()) {
        backbone = backbone_from_string(it->second);
    }
    ExperimentConfig cfg = default_config(backbone);

    for (const auto& [key, value] : kv) {
        if (key == "backbone_id") {
            continue;  // handled above
        } else if (key == "dataset_root") {
            cfg.dataset_root = value;
        } else if (key == "image_size") {
            parse_image_size(value, cfg);
        } else if (key == "train_fraction") {
            cfg.train_fraction = parse_double(key, value);
        } else if (key == "val_fraction_of_train") {
            cfg.val_fraction_of_train = parse_double(key, value);
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
        } else if (key == "embedding_dim") {
            cfg.embedding_dim = static_cast<int>(parse_int(key, value));
        } else if (key == "margin") {
            cfg.margin = parse_double(key, value);
        } else if (key == "threshold") {
            cfg.threshold = parse_double(key, value);
        } else if (key == "epochs") {
            cfg.epochs = static_cast<int>(parse_int(key, value));
        } else if (key == "batch_size") {
            cfg.batch_size = static_cast<int>(parse_int(key, value));
        } else if (key == "learning_rate") {
            cfg.learning_rate = parse_double(key, value);
        } else if (key == "target_layer") {
            cfg.target_layer = value;
        } else if (key == "crop_similarity_gate") {
            cfg.crop_similarity_gate = parse_double(key, value);
        } else if (key == "bbox_fraction") {
            cfg.bbox_fraction = parse_double(key, value);
        } else if (key == "min_box_area_fraction") {
            cfg.min_box_area_fraction = parse_double(key, value);
        } else if (key == "backbone_weights") {
            cfg.backbone_weights = value;
        } else if (key == "loss_on") {
            if (value == "output") {
                cfg.loss_on = LossTarget::kOutput;
            } else if (value == "embedding_distance") {
                cfg.loss_on = LossTarget::kEmbeddingDistance;
            } else {
                invalid("loss_on");
            }
        } else if (key == "gradcam_target") {
            if (value == "output") {
                cfg.gradcam_target = GradcamTarget::kOutput;
            } else if (value == "logit") {
                cfg.gradcam_target = GradcamTarget::kLogit;
            } else {
                invalid("gradcam_target");
            }
        } else if (key == "freeze_backbone") {
            cfg.freeze_backbone = parse_bool(key, value);
        } else {
            invalid("unknown key '" + key + "'");
        }
    }

    validate_config(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("malformed config: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "dataset_root = " << cfg.dataset_root << "\n";
    out << "image_size = " << cfg.image_height << "x" << cfg.image_width << "\n";
    out << "train_fraction = " << format_double(cfg.train_fraction) << "\n";
    out << "val_fraction_of_train = " << format_double(cfg.val_fraction_of_train) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "backbone_id = " << to_string(cfg.backbone_id) << "\n";
    out << "embedding_dim = " << cfg.embedding_dim << "\n";
    out << "margin = " << format_double(cfg.margin) << "\n";
    out << "threshold = " << format_double(cfg.threshold) << "\n";
    out << "epochs = " << cfg.epochs << "\n";
    out << "batch_size = " << cfg.batch_size << "\n";
    out << "learning_rate = " << format_double(cfg.learning_rate) << "\n";
    out << "target_layer = " << cfg.target_layer << "\n";
    out << "crop_similarity_gate = " << format_double(cfg.crop_similarity_gate) << "\n";
    out << "bbox_fraction = " << format_double(cfg.bbox_fraction) << "\n";
    out << "min_box_area_fraction = " << format_double(cfg.min_box_area_fraction) << "\n";
    out << "backbone_weights = " << cfg.backbone_weights << "\n";
    out << "loss_on = " << to_string(cfg.loss_on) << "\n";
    out << "gradcam_target = " << to_string(cfg.gradcam_target) << "\n";
    out << "freeze_backbone = " << (cfg.freeze_backbone ? "true" : "false") << "\n";
    return out.str();
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config to " + path.string());
    out << serialize_config(cfg);
}

}  // namespace xsim
