#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "xsim/config.hpp"
#include "xsim/dataset.hpp"
#include "xsim/metrics.hpp"
#include "xsim/model.hpp"
#include "xsim/tensor.hpp"
#include "xsim/trainer.hpp"

namespace xsim {

// Half-open pixel box, 0 <= x_min < x_max <= width (same for y).
struct BoundingBox {
    int x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    int width() const { return x_max - x_min; }
    int height() const { return y_max - y_min; }
    long area() const { return static_cast<long>(width()) * height(); }
};

double box_iou(const BoundingBox& a, const BoundingBox& b);

// Binarize at fraction * max, keep the largest 4-connected component, take
// its tight box, then grow the box (centered, clamped to the image) until it
// covers at least min_area_fraction of the image. Throws
// std::runtime_error("no salient region") when the map has no positive cell.
BoundingBox bbox_from_heatmap(const Tensor& heatmap, double fraction,
                              double min_area_fraction);

struct CropAudit {
    std::string anchor_id;
    std::string partner_id;   // empty for singleton classes
    double similarity = 0.0;  // 1 - d for the audited pair, 0 for singletons
    std::string action;       // "cropped" or "kept"
    bool has_box = false;
    BoundingBox box;          // source coordinates, only when has_box
};

struct CropOutcome {
    std::filesystem::path root;
    std::vector<CropAudit> audits;  // one row per input record, id order
};

// Rewrites train (and val) images under out_root/<class>/<filename>: anchors
// whose sampled same-class pair clears the similarity gate are replaced by
// the crop under their factual heatmap box, everything else is byte-copied.
// Refuses test records: cropping may only touch training data.
CropOutcome build_cropped_dataset(SiameseNetwork& model,
                                  const std::vector<ImageRecord>& records,
                                  const ExperimentConfig& cfg,
                                  const std::filesystem::path& out_root);

void write_crop_audit(const std::vector<CropAudit>& audits,
                      const std::filesystem::path& path);

std::vector<CropAudit> read_crop_audit(const std::filesystem::path& path);

struct ComparisonOutcome {
    EvaluationReport original;   // test-set report, model trained on originals
    EvaluationReport cropped;    // test-set report, model trained on crops
    TrainHistory history_original;
    TrainHistory history_cropped;
    std::vector<CropAudit> audits;
    std::filesystem::path cropped_root;
};

// End-to-end: split, train on originals, crop the training data under the
// trained model's heatmaps, retrain from the same initialization, evaluate
// both models on the identical untouched test pairs.
ComparisonOutcome compare_original_vs_cropped(const ExperimentConfig& cfg,
                                              const std::filesystem::path& work_dir,
                                              std::ostream* log);

}  // namespace xsim
