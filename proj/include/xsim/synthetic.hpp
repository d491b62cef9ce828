#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace xsim {

// Ground-truth object box, half-open pixel ranges in source coordinates.
struct GeneratedBox {
    std::string id;  // "<class>/<filename>", matches the dataset record id
    int x_min = 0, y_min = 0, x_max = 0, y_max = 0;
};

// Writes classes * per_class PNG images under out_root/<class>/ plus a
// boxes.tsv manifest (id, x_min, y_min, x_max, y_max; half-open). Each class
// is a fixed shape+color combination, drawn with a two-tone striped fill at a
// random position and scale over grayscale noise; the object box never
// exceeds 25% of the image area.
// Same seed, same arguments: byte-identical output.
std::vector<GeneratedBox> generate_synthetic_dataset(const std::filesystem::path& out_root,
                                                     int classes, int per_class, int height,
                                                     int width, uint64_t seed);

std::vector<GeneratedBox> read_box_manifest(const std::filesystem::path& path);

}  // namespace xsim
