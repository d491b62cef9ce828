#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace xsim {

// 8-bit RGB image, row-major HWC.
struct ImageU8 {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;  // height * width * 3

    std::uint8_t& at(int y, int x, int ch) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + ch];
    }
    std::uint8_t at(int y, int x, int ch) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + ch];
    }
};

ImageU8 make_image(int height, int width, std::uint8_t fill = 0);

// Decodes any format the platform codecs understand, converted to RGB.
// Throws std::runtime_error("bad image <path>") when decoding fails.
ImageU8 load_image(const std::filesystem::path& path);

// Codec chosen by extension. PNG output bytes are deterministic for fixed
// pixel content, which seeded-rerun checks rely on.
void save_image(const ImageU8& img, const std::filesystem::path& path);

// Bilinear; returns the input untouched when the size already matches.
ImageU8 resize_image(const ImageU8& img, int out_height, int out_width);

// Half-open crop: columns [x0, x1), rows [y0, y1).
ImageU8 crop_image(const ImageU8& img, int x0, int y0, int x1, int y1);

}  // namespace xsim
