#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace xsim {

enum class Split { kUnassigned, kTrain, kVal, kTest };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ImageRecord {
    std::string id;           // "<class>/<filename>", stable across runs
    std::filesystem::path path;
    std::string class_label;
    Split split = Split::kUnassigned;
};

struct DatasetIndex {
    std::vector<ImageRecord> records;   // sorted by id
    std::vector<std::string> classes;   // sorted, one entry per class directory
    std::vector<std::string> warnings;  // per-class pairing problems, skipped files
};

// Layout: root/<class>/<image>. Throws std::runtime_error("dataset not
// found: <root>") when the root is missing. Classes with fewer than two
// readable images get an "insufficient data for pairing" warning.
DatasetIndex index_dataset(const std::filesystem::path& root);

// Per-class shuffled assignment. For a class of n images the train pool is
// round(n * train_fraction) clamped to [1, n-1], of which round(pool *
// val_fraction_of_train) go to validation; the rest of the class is test.
// Throws std::runtime_error("cannot stratify class <name>") when n < 2.
void stratified_split(std::vector<ImageRecord>& records, double train_fraction,
                      double val_fraction_of_train, uint64_t seed);

std::vector<ImageRecord> records_in_split(const std::vector<ImageRecord>& records, Split split);

struct PairSample {
    ImageRecord anchor;
    ImageRecord partner;
    int label = 0;  // 0 = same class (similar), 1 = different class
};

// Offsets added to the experiment seed when drawing pair partners, so the
// three splits use unrelated streams.
inline constexpr uint64_t kTrainPairSeed = 2;
inline constexpr uint64_t kValPairSeed = 3;
inline constexpr uint64_t kTestPairSeed = 4;

// For every record, taken in id order, one same-class pair and one
// different-class pair with uniformly drawn partners: 2N pairs, exactly
// balanced. All records must belong to the same split. Throws
// "cannot build dissimilar pairs" when only one class is present and
// "cannot build similar pairs ..." when a class has a lone member.
std::vector<PairSample> build_pairs(const std::vector<ImageRecord>& records, uint64_t seed);

// Tab-separated pair list: anchor_id, partner_id, label. Rewriting the same
// pairs yields byte-identical files.
void write_pair_manifest(const std::vector<PairSample>& pairs, const std::filesystem::path& path);

struct PairManifestRow {
    std::string anchor_id;
    std::string partner_id;
    int label = 0;
};

std::vector<PairManifestRow> read_pair_manifest(const std::filesystem::path& path);

// Tab-separated record list: id, class, split, path.
void write_split_manifest(const std::vector<ImageRecord>& records,
                          const std::filesystem::path& path);

}  // namespace xsim
