#include "xsim/preprocess.hpp"

#include <utility>

namespace xsim {

PreparedImage prepare_image(const ImageU8& image, int height, int width,
                            std::string source_id) {
    ImageU8 resized = resize_image(image, height, width);
    Tensor pixels = Tensor::zeros({3, height, width});
    for (int c = 0; c < 3; ++c) {
        const double inv_std = 1.0 / kChannelStd[static_cast<size_t>(c)];
        const double mean = kChannelMean[static_cast<size_t>(c)];
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double v = resized.at(y, x, c) / 255.0;
                pixels(c, y, x) = (v - mean) * inv_std;
            }
        }
    }
    return PreparedImage{std::move(pixels), std::move(source_id)};
}

PreparedImage prepare_image_file(const std::filesystem::path& path, int height, int width) {
    ImageU8 image = load_image(path);
    return prepare_image(image, height, width, path.string());
}

}  // namespace xsim
