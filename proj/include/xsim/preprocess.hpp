#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "xsim/image_io.hpp"
#include "xsim/tensor.hpp"

namespace xsim {

// ImageNet channel statistics, applied after scaling bytes to [0,1].
inline constexpr std::array<double, 3> kChannelMean = {0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kChannelStd = {0.229, 0.224, 0.225};

struct PreparedImage {
    Tensor pixels;          // [3,H,W], standardized
    std::string source_id;  // whatever identifies the source (path or record id)
};

// Resize to (height, width), scale to [0,1], standardize per channel.
PreparedImage prepare_image(const ImageU8& image, int height, int width,
                            std::string source_id);

// Decode + prepare in one step. Throws std::runtime_error("bad image <path>")
// when the file cannot be decoded.
PreparedImage prepare_image_file(const std::filesystem::path& path, int height, int width);

}  // namespace xsim
