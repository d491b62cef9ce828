#include "xsim/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "xsim/rng.hpp"

namespace xsim {

namespace {

constexpr uint64_t kSplitStream = 0x53504c49;  // rng sub-stream tags
constexpr uint64_t kPairStream = 0x50414952;

bool has_image_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" ||
           ext == ".ppm";
}

}  // namespace

std::string to_string(Split s) {
    switch (s) {
        case Split::kTrain: return "train";
        case Split::kVal: return "val";
        case Split::kTest: return "test";
        default: return "unassigned";
    }
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::kTrain;
    if (s == "val") return Split::kVal;
    if (s == "test") return Split::kTest;
    if (s == "unassigned") return Split::kUnassigned;
    throw std::invalid_argument("unknown split name '" + s + "'");
}

DatasetIndex index_dataset(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::exists(root) || !fs::is_directory(root)) {
        throw std::runtime_error("dataset not found: " + root.string());
    }

    DatasetIndex index;

    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) class_dirs.push_back(entry.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());

    for (const auto& dir : class_dirs) {
        const std::string label = dir.filename().string();
        index.classes.push_back(label);

        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            if (!has_image_extension(entry.path())) continue;
            std::ifstream probe(entry.path(), std::ios::binary);
            if (!probe) {
                index.warnings.push_back("skipped unreadable file " + entry.path().string());
                continue;
            }
            files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());

        if (files.size() < 2) {
            index.warnings.push_back("insufficient data for pairing: class '" + label +
                                     "' has " + std::to_string(files.size()) + " image(s)");
        }
        for (const auto& file : files) {
            ImageRecord rec;
            rec.id = label + "/" + file.filename().string();
            rec.path = file;
            rec.class_label = label;
            index.records.push_back(std::move(rec));
        }
    }

    if (index.records.empty()) {
        index.warnings.push_back("insufficient data for pairing: no images under " +
                                 root.string());
    }
    std::sort(index.records.begin(), index.records.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });
    return index;
}

void stratified_split(std::vector<ImageRecord>& records, double train_fraction,
                      double val_fraction_of_train, uint64_t seed) {
    std::map<std::string, std::vector<size_t>> by_class;
    for (size_t i = 0; i < records.size(); ++i) {
        by_class[records[i].class_label].push_back(i);
    }

    Rng rng = Rng(seed).derive(kSplitStream);
    for (auto& [label, members] : by_class) {  // std::map iterates labels sorted
        const size_t n = members.size();
        if (n < 2) {
            throw std::runtime_error("cannot stratify class " + label);
        }
        // Members enter sorted by id (records are indexed in id order).
        rng.shuffle(members);

        long train_pool = std::lround(train_fraction * static_cast<double>(n));
        train_pool = std::clamp(train_pool, 1L, static_cast<long>(n) - 1);
        long val = std::lround(val_fraction_of_train * static_cast<double>(train_pool));
        val = std::clamp(val, 0L, train_pool - 1);
        const long train = train_pool - val;

        for (size_t i = 0; i < n; ++i) {
            Split s = Split::kTest;
            if (static_cast<long>(i) < train) {
                s = Split::kTrain;
            } else if (static_cast<long>(i) < train_pool) {
                s = Split::kVal;
            }
            records[members[i]].split = s;
        }
    }
}

std::vector<ImageRecord> records_in_split(const std::vector<ImageRecord>& records, Split split) {
    std::vector<ImageRecord> out;
    for (const auto& r : records) {
        if (r.split == split) out.push_back(r);
    }
    return out;
}

std::vector<PairSample> build_pairs(const std::vector<ImageRecord>& records, uint64_t seed) {
    std::vector<ImageRecord> sorted = records;
    std::sort(sorted.begin(), sorted.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });
    for (size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i].split != sorted[0].split) {
            throw std::invalid_argument("build_pairs needs records from a single split");
        }
    }

    std::set<std::string> labels;
    for (const auto& r : sorted) labels.insert(r.class_label);
    if (!sorted.empty() && labels.size() < 2) {
        throw std::runtime_error("cannot build dissimilar pairs");
    }

    Rng rng = Rng(seed).derive(kPairStream);
    std::vector<PairSample> pairs;
    pairs.reserve(sorted.size() * 2);
    for (const auto& anchor : sorted) {
        std::vector<const ImageRecord*> same, other;
        for (const auto& cand : sorted) {
            if (cand.id == anchor.id) continue;
            (cand.class_label == anchor.class_label ? same : other).push_back(&cand);
        }
        if (same.empty()) {
            throw std::runtime_error("cannot build similar pairs: class '" +
                                     anchor.class_label + "' has a single image");
        }
        pairs.push_back({anchor, *same[rng.uniform_int(same.size())], 0});
        pairs.push_back({anchor, *other[rng.uniform_int(other.size())], 1});
    }
    return pairs;
}

void write_pair_manifest(const std::vector<PairSample>& pairs,
                         const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);  // binary: no CRLF surprises
    if (!out) throw std::runtime_error("file not found: " + path.string());
    out << "anchor_id\tpartner_id\tlabel\n";
    for (const auto& p : pairs) {
        out << p.anchor.id << '\t' << p.partner.id << '\t' << p.label << '\n';
    }
}

std::vector<PairManifestRow> read_pair_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("file not found: " + path.string());
    std::vector<PairManifestRow> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {  // header row
            first = false;
            continue;
        }
        if (line.empty()) continue;
        std::istringstream ss(line);
        PairManifestRow row;
        std::string label;
        if (!std::getline(ss, row.anchor_id, '\t') ||
            !std::getline(ss, row.partner_id, '\t') || !std::getline(ss, label)) {
            throw std::runtime_error("malformed pair manifest: " + path.string());
        }
        row.label = std::stoi(label);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_split_manifest(const std::vector<ImageRecord>& records,
                          const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("file not found: " + path.string());
    out << "id\tclass\tsplit\tpath\n";
    for (const auto& r : records) {
        out << r.id << '\t' << r.class_label << '\t' << to_string(r.split) << '\t'
            << r.path.generic_string() << '\n';
    }
}

}  // namespace xsim
