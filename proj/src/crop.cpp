#include "xsim/crop.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "xsim/gradcam.hpp"
#include "xsim/image_io.hpp"
#include "xsim/rng.hpp"

namespace xsim {

namespace {

constexpr uint64_t kCropStream = 0x43524f50;

}  // namespace

double box_iou(const BoundingBox& a, const BoundingBox& b) {
    const int ix_min = std::max(a.x_min, b.x_min);
    const int iy_min = std::max(a.y_min, b.y_min);
    const int ix_max = std::min(a.x_max, b.x_max);
    const int iy_max = std::min(a.y_max, b.y_max);
    const long iw = std::max(0, ix_max - ix_min);
    const long ih = std::max(0, iy_max - iy_min);
    const long inter = iw * ih;
    const long uni = a.area() + b.area() - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

BoundingBox bbox_from_heatmap(const Tensor& heatmap, double fraction,
                              double min_area_fraction) {
    if (heatmap.shape.size() != 2) {
        throw std::invalid_argument("input shape error in bbox_from_heatmap");
    }
    const int h = heatmap.shape[0];
    const int w = heatmap.shape[1];

    double peak = 0.0;
    for (size_t i = 0; i < heatmap.numel(); ++i) peak = std::max(peak, heatmap[i]);
    if (peak <= 0.0) throw std::runtime_error("no salient region");

    const double cut = fraction * peak;
    std::vector<char> mask(static_cast<size_t>(h) * w, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (heatmap(y, x) >= cut) mask[static_cast<size_t>(y) * w + x] = 1;
        }
    }

    // Largest 4-connected component; ties resolve to the first one found in
    // scan order, which keeps the result deterministic.
    std::vector<int> component(static_cast<size_t>(h) * w, -1);
    int best_size = 0;
    BoundingBox best{};
    int next_id = 0;
    std::deque<std::pair<int, int>> queue;
    for (int sy = 0; sy < h; ++sy) {
        for (int sx = 0; sx < w; ++sx) {
            const size_t start = static_cast<size_t>(sy) * w + sx;
            if (!mask[start] || component[start] >= 0) continue;
            const int id = next_id++;
            int size = 0;
            BoundingBox box{sx, sy, sx + 1, sy + 1};
            component[start] = id;
            queue.clear();
            queue.emplace_back(sy, sx);
            while (!queue.empty()) {
                const auto [y, x] = queue.front();
                queue.pop_front();
                ++size;
                box.x_min = std::min(box.x_min, x);
                box.x_max = std::max(box.x_max, x + 1);
                box.y_min = std::min(box.y_min, y);
                box.y_max = std::max(box.y_max, y + 1);
                const int dy[4] = {-1, 1, 0, 0};
                const int dx[4] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    const int ny = y + dy[k], nx = x + dx[k];
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    const size_t ni = static_cast<size_t>(ny) * w + nx;
                    if (!mask[ni] || component[ni] >= 0) continue;
                    component[ni] = id;
                    queue.emplace_back(ny, nx);
                }
            }
            if (size > best_size) {
                best_size = size;
                best = box;
            }
        }
    }

    // Area floor: grow the box around its center, never past the image.
    const long min_area =
        static_cast<long>(std::ceil(min_area_fraction * static_cast<double>(h) * w));
    if (best.area() < min_area) {
        const double scale =
            std::sqrt(static_cast<double>(min_area) / static_cast<double>(best.area()));
        int tw = std::min(w, static_cast<int>(std::ceil(best.width() * scale)));
        int th = std::min(h, static_cast<int>(std::ceil(best.height() * scale)));
        if (static_cast<long>(tw) * th < min_area) {
            th = std::min(h, static_cast<int>(std::ceil(
                                 static_cast<double>(min_area) / tw)));
        }
        if (static_cast<long>(tw) * th < min_area) {
            tw = std::min(w, static_cast<int>(std::ceil(
                                 static_cast<double>(min_area) / th)));
        }
        const int cx = (best.x_min + best.x_max) / 2;
        const int cy = (best.y_min + best.y_max) / 2;
        best.x_min = std::clamp(cx - tw / 2, 0, w - tw);
        best.x_max = best.x_min + tw;
        best.y_min = std::clamp(cy - th / 2, 0, h - th);
        best.y_max = best.y_min + th;
    }
    return best;
}

namespace {

BoundingBox scale_box(const BoundingBox& box, int from_h, int from_w, int to_h, int to_w) {
    const double sy = static_cast<double>(to_h) / from_h;
    const double sx = static_cast<double>(to_w) / from_w;
    BoundingBox out;
    out.x_min = std::clamp(static_cast<int>(std::floor(box.x_min * sx)), 0, to_w - 1);
    out.y_min = std::clamp(static_cast<int>(std::floor(box.y_min * sy)), 0, to_h - 1);
    out.x_max = std::clamp(static_cast<int>(std::ceil(box.x_max * sx)), out.x_min + 1, to_w);
    out.y_max = std::clamp(static_cast<int>(std::ceil(box.y_max * sy)), out.y_min + 1, to_h);
    return out;
}

void copy_bytes(const std::filesystem::path& from, const std::filesystem::path& to) {
    std::filesystem::copy_file(from, to,
                               std::filesystem::copy_options::overwrite_existing);
}

}  // namespace

CropOutcome build_cropped_dataset(SiameseNetwork& model,
                                  const std::vector<ImageRecord>& records,
                                  const ExperimentConfig& cfg,
                                  const std::filesystem::path& out_root) {
    for (const auto& r : records) {
        if (r.split == Split::kTest) {
            throw std::invalid_argument("cropping is train/val only; got a test record: " +
                                        r.id);
        }
    }
    std::filesystem::create_directories(out_root);

    std::vector<ImageRecord> sorted = records;
    std::sort(sorted.begin(), sorted.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });

    ImageCache images(cfg.image_height, cfg.image_width);
    Rng rng = Rng(cfg.seed).derive(kCropStream);

    CropOutcome outcome;
    outcome.root = out_root;
    for (const auto& anchor : sorted) {
        std::filesystem::create_directories(out_root / anchor.class_label);
        const std::filesystem::path out_path =
            out_root / anchor.class_label / anchor.path.filename();

        std::vector<const ImageRecord*> partners;
        for (const auto& cand : sorted) {
            if (cand.id != anchor.id && cand.class_label == anchor.class_label) {
                partners.push_back(&cand);
            }
        }

        CropAudit audit;
        audit.anchor_id = anchor.id;
        audit.action = "kept";

        if (partners.empty()) {
            copy_bytes(anchor.path, out_path);
            outcome.audits.push_back(std::move(audit));
            continue;
        }

        const ImageRecord& partner = *partners[rng.uniform_int(partners.size())];
        audit.partner_id = partner.id;

        ForwardTrace trace =
            model.forward_pair(images.get(anchor), images.get(partner), /*capture=*/true);
        audit.similarity = similarity(trace.d);

        // The crop is only trusted when the pair is confidently similar.
        if (audit.similarity <= cfg.crop_similarity_gate) {
            copy_bytes(anchor.path, out_path);
            outcome.audits.push_back(std::move(audit));
            continue;
        }

        NeuronWeights w = neuron_weights(model, trace, Branch::kA,
                                         ExplanationMode::kFactual, cfg.gradcam_target);
        Tensor raw = gradcam_map(w.alpha, trace.activations_a);
        Tensor heat = upsample_normalize(raw, cfg.image_height, cfg.image_width);

        double peak = 0.0;
        for (size_t i = 0; i < heat.numel(); ++i) peak = std::max(peak, heat[i]);
        if (peak <= 0.0) {
            copy_bytes(anchor.path, out_path);
            outcome.audits.push_back(std::move(audit));
            continue;
        }

        const BoundingBox box =
            bbox_from_heatmap(heat, cfg.bbox_fraction, cfg.min_box_area_fraction);

        ImageU8 source = load_image(anchor.path);
        const BoundingBox src_box = scale_box(box, cfg.image_height, cfg.image_width,
                                              source.height, source.width);
        audit.action = "cropped";
        audit.has_box = true;
        audit.box = src_box;

        if (src_box.x_min == 0 && src_box.y_min == 0 && src_box.x_max == source.width &&
            src_box.y_max == source.height) {
            copy_bytes(anchor.path, out_path);  // full-frame box: keep the bytes
        } else {
            ImageU8 cropped = crop_image(source, src_box.x_min, src_box.y_min,
                                         src_box.x_max, src_box.y_max);
            save_image(cropped, out_path);
        }
        outcome.audits.push_back(std::move(audit));
    }
    return outcome;
}

void write_crop_audit(const std::vector<CropAudit>& audits,
                      const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("file not found: " + path.string());
    out << "anchor_id\tpartner_id\tsimilarity\taction\tx_min\ty_min\tx_max\ty_max\n";
    out.precision(17);
    for (const auto& a : audits) {
        out << a.anchor_id << '\t' << a.partner_id << '\t' << a.similarity << '\t'
            << a.action << '\t';
        if (a.has_box) {
            out << a.box.x_min << '\t' << a.box.y_min << '\t' << a.box.x_max << '\t'
                << a.box.y_max << '\n';
        } else {
            out << "-\t-\t-\t-\n";
        }
    }
}

std::vector<CropAudit> read_crop_audit(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("file not found: " + path.string());
    std::vector<CropAudit> audits;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            continue;
        }
        if (line.empty()) continue;
        std::istringstream ss(line);
        CropAudit a;
        std::string f;
        std::getline(ss, a.anchor_id, '\t');
        std::getline(ss, a.partner_id, '\t');
        std::getline(ss, f, '\t');
        a.similarity = std::stod(f);
        std::getline(ss, a.action, '\t');
        std::string xs[4];
        for (auto& x : xs) std::getline(ss, x, '\t');
        if (xs[0] != "-") {
            a.has_box = true;
            a.box.x_min = std::stoi(xs[0]);
            a.box.y_min = std::stoi(xs[1]);
            a.box.x_max = std::stoi(xs[2]);
            a.box.y_max = std::stoi(xs[3]);
        }
        audits.push_back(std::move(a));
    }
    return audits;
}

ComparisonOutcome compare_original_vs_cropped(const ExperimentConfig& cfg,
                                              const std::filesystem::path& work_dir,
                                              std::ostream* log) {
    std::filesystem::create_directories(work_dir);

    DatasetIndex index = index_dataset(cfg.dataset_root);
    if (log) {
        for (const auto& warning : index.warnings) (*log) << "warning: " << warning << "\n";
    }
    std::vector<ImageRecord> records = index.records;
    stratified_split(records, cfg.train_fraction, cfg.val_fraction_of_train, cfg.seed);

    const auto train_records = records_in_split(records, Split::kTrain);
    const auto val_records = records_in_split(records, Split::kVal);
    const auto test_records = records_in_split(records, Split::kTest);

    const auto train_pairs = build_pairs(train_records, cfg.seed + kTrainPairSeed);
    std::vector<PairSample> val_pairs;
    try {
        val_pairs = build_pairs(val_records, cfg.seed + kValPairSeed);
    } catch (const std::runtime_error& e) {
        // Tiny datasets can leave the val split unpairable; train without it.
        if (log) (*log) << "warning: no validation pairs (" << e.what() << ")\n";
    }
    const auto test_pairs = build_pairs(test_records, cfg.seed + kTestPairSeed);

    ComparisonOutcome outcome;

    // Round one: train on the untouched images.
    SiameseNetwork original = SiameseNetwork::build(cfg);
    {
        ImageCache images(cfg.image_height, cfg.image_width);
        outcome.history_original =
            train_model(original, train_pairs, val_pairs, cfg, images, log);
        outcome.original = evaluate_pairs(original, test_pairs, cfg.threshold, images);
    }
    save_model(original, work_dir / "model_original.ckpt");

    // Crop train+val under the trained model's heatmaps.
    std::vector<ImageRecord> croppable = train_records;
    croppable.insert(croppable.end(), val_records.begin(), val_records.end());
    outcome.cropped_root = work_dir / "cropped";
    CropOutcome crop = build_cropped_dataset(original, croppable, cfg, outcome.cropped_root);
    outcome.audits = crop.audits;
    write_crop_audit(crop.audits, work_dir / "crop_audit.tsv");

    // Same pair structure, train/val paths redirected into the crop output.
    auto redirect = [&](const ImageRecord& r) {
        ImageRecord moved = r;
        if (r.split != Split::kTest) {
            moved.path = outcome.cropped_root / r.class_label / r.path.filename();
        }
        return moved;
    };
    auto redirect_pairs = [&](const std::vector<PairSample>& pairs) {
        std::vector<PairSample> moved = pairs;
        for (auto& p : moved) {
            p.anchor = redirect(p.anchor);
            p.partner = redirect(p.partner);
        }
        return moved;
    };
    const auto train_pairs_cropped = redirect_pairs(train_pairs);
    const auto val_pairs_cropped = redirect_pairs(val_pairs);

    // Round two: identical seed, so both models start from the same weights.
    SiameseNetwork retrained = SiameseNetwork::build(cfg);
    {
        ImageCache images(cfg.image_height, cfg.image_width);
        outcome.history_cropped =
            train_model(retrained, train_pairs_cropped, val_pairs_cropped, cfg, images, log);
        outcome.cropped = evaluate_pairs(retrained, test_pairs, cfg.threshold, images);
    }
    save_model(retrained, work_dir / "model_cropped.ckpt");

    write_pair_manifest(test_pairs, work_dir / "test_pairs.tsv");
    write_history(outcome.history_original, work_dir / "history_original.jsonl");
    write_history(outcome.history_cropped, work_dir / "history_cropped.jsonl");
    write_report(outcome.original, work_dir / "report_original.json");
    write_report(outcome.cropped, work_dir / "report_cropped.json");
    return outcome;
}

}  // namespace xsim
