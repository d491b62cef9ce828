#include "xsim/image_io.hpp"

#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace xsim {

namespace {

cv::Mat to_mat(const ImageU8& img) {
    // Wrap without copy; cv expects BGR for codecs, convert at the edges.
    cv::Mat rgb(img.height, img.width, CV_8UC3,
                const_cast<std::uint8_t*>(img.pixels.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    return bgr;
}

ImageU8 from_mat_bgr(const cv::Mat& bgr) {
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    ImageU8 img;
    img.height = rgb.rows;
    img.width = rgb.cols;
    img.pixels.assign(rgb.data, rgb.data + static_cast<std::size_t>(rgb.rows) * rgb.cols * 3);
    return img;
}

}  // namespace

ImageU8 make_image(int height, int width, std::uint8_t fill) {
    ImageU8 img;
    img.height = height;
    img.width = width;
    img.pixels.assign(static_cast<std::size_t>(height) * width * 3, fill);
    return img;
}

ImageU8 load_image(const std::filesystem::path& path) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw std::runtime_error("bad image " + path.string());
    if (!bgr.isContinuous()) bgr = bgr.clone();
    return from_mat_bgr(bgr);
}

void save_image(const ImageU8& img, const std::filesystem::path& path) {
    if (!cv::imwrite(path.string(), to_mat(img))) {
        throw std::runtime_error("cannot write image " + path.string());
    }
}

ImageU8 resize_image(const ImageU8& img, int out_height, int out_width) {
    if (img.height == out_height && img.width == out_width) return img;
    cv::Mat src(img.height, img.width, CV_8UC3,
                const_cast<std::uint8_t*>(img.pixels.data()));
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(out_width, out_height), 0, 0, cv::INTER_LINEAR);
    ImageU8 out;
    out.height = dst.rows;
    out.width = dst.cols;
    out.pixels.assign(dst.data, dst.data + static_cast<std::size_t>(dst.rows) * dst.cols * 3);
    return out;
}

ImageU8 crop_image(const ImageU8& img, int x0, int y0, int x1, int y1) {
    if (x0 < 0 || y0 < 0 || x1 > img.width || y1 > img.height || x0 >= x1 || y0 >= y1) {
        throw std::invalid_argument("crop box out of range");
    }
    ImageU8 out = make_image(y1 - y0, x1 - x0);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            for (int c = 0; c < 3; ++c) out.at(y - y0, x - x0, c) = img.at(y, x, c);
        }
    }
    return out;
}

}  // namespace xsim
