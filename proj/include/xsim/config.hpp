#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace xsim {

enum class BackboneId { kSmallCnn, kResNet50 };
enum class LossTarget { kOutput, kEmbeddingDistance };
enum class GradcamTarget { kOutput, kLogit };

std::string to_string(BackboneId b);
std::string to_string(LossTarget t);
std::string to_string(GradcamTarget t);

// Central experiment configuration. Immutable after load; every module takes
// it by const reference. The on-disk form is a flat "key = value" text file;
// unknown keys are rejected so experiment typos fail loudly.
//
// Keys (defaults in parentheses):
//   dataset_root           ("")       image_size            (224x224, HxW)
//   train_fraction         (0.8)      val_fraction_of_train (0.1)
//   seed                   (42)       backbone_id           (small-cnn | resnet50)
//   embedding_dim          (256)      margin                (2.0)
//   threshold              (0.5)      epochs                (20)
//   batch_size             (32)       learning_rate         (1e-3 small-cnn, 1e-4 resnet50)
//   target_layer           (last conv layer of the backbone)
//   crop_similarity_gate   (0.8)      bbox_fraction         (0.15)
//   min_box_area_fraction  (0.10)     backbone_weights      ("")
//   loss_on                (output | embedding_distance)
//   gradcam_target         (output | logit)
//   freeze_backbone        (false)
struct ExperimentConfig {
    std::string dataset_root;
    int image_height = 224;
    int image_width = 224;
    double train_fraction = 0.8;
    double val_fraction_of_train = 0.1;
    std::uint64_t seed = 42;
    BackboneId backbone_id = BackboneId::kSmallCnn;
    int embedding_dim = 256;
    double margin = 2.0;
    double threshold = 0.5;
    int epochs = 20;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::string target_layer = "relu4";
    double crop_similarity_gate = 0.8;
    double bbox_fraction = 0.15;
    double min_box_area_fraction = 0.10;
    std::string backbone_weights;
    LossTarget loss_on = LossTarget::kOutput;
    GradcamTarget gradcam_target = GradcamTarget::kOutput;
    bool freeze_backbone = false;

    bool operator==(const ExperimentConfig&) const = default;
};

// Defaults for a backbone, with learning rate and target layer resolved.
ExperimentConfig default_config(BackboneId backbone = BackboneId::kSmallCnn);

double default_learning_rate(BackboneId backbone);
std::string default_target_layer(BackboneId backbone);

// "small-cnn" or "resnet50"; anything else throws "invalid config: backbone_id".
BackboneId backbone_from_string(const std::string& name);

// Applies an "HxW" string to image_height/image_width.
void parse_image_size(const std::string& value, ExperimentConfig& cfg);

// Throws std::invalid_argument("invalid config: <field>") on any violated
// invariant.
void validate_config(const ExperimentConfig& cfg);

// Parse the flat key/value text. Throws std::runtime_error("malformed
// config: ...") on syntax problems and "invalid config: ..." on bad values
// or unknown keys. Missing keys fall back to defaults; learning_rate and
// target_layer defaults depend on the configured backbone.
ExperimentConfig parse_config(const std::string& text);

ExperimentConfig load_config(const std::filesystem::path& path);

std::string serialize_config(const ExperimentConfig& cfg);

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

}  // namespace xsim
