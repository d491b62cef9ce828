#include "xsim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "xsim/image_io.hpp"
#include "xsim/rng.hpp"

namespace xsim {

namespace {

struct Color {
    int r, g, b;
};

// Palette and shape lists are fixed; class k uses shape k % 5 and color
// k % 8, so the first 40 classes are pairwise distinct combinations.
constexpr Color kPalette[8] = {
    {220, 40, 40},  {40, 200, 60},  {50, 90, 230},  {230, 210, 40},
    {210, 50, 200}, {40, 200, 210}, {235, 140, 30}, {130, 60, 200},
};
constexpr int kNumShapes = 5;  // disc, square, triangle, ring, diamond

bool inside_shape(int shape, int side, int x, int y) {
    const double half = side / 2.0;
    const double dx = (x + 0.5) - half;
    const double dy = (y + 0.5) - half;
    switch (shape) {
        case 0:  // disc
            return dx * dx + dy * dy <= half * half;
        case 1:  // square
            return true;
        case 2: {  // upward triangle
            const double frac = (y + 0.5) / side;  // 0 at apex, 1 at base
            return std::abs(dx) <= frac * half;
        }
        case 3: {  // ring
            const double d2 = dx * dx + dy * dy;
            const double inner = 0.55 * half;
            return d2 <= half * half && d2 >= inner * inner;
        }
        default:  // diamond
            return std::abs(dx) + std::abs(dy) <= half;
    }
}

int clamp_byte(int v) { return std::clamp(v, 0, 255); }

}  // namespace

std::vector<GeneratedBox> generate_synthetic_dataset(const std::filesystem::path& out_root,
                                                     int classes, int per_class, int height,
                                                     int width, uint64_t seed) {
    if (classes < 1 || per_class < 1 || height < 16 || width < 16) {
        throw std::invalid_argument("invalid config: synthetic dataset dimensions");
    }
    std::filesystem::create_directories(out_root);

    Rng rng(seed);
    std::vector<GeneratedBox> boxes;
    boxes.reserve(static_cast<size_t>(classes) * static_cast<size_t>(per_class));

    const int min_dim = std::min(height, width);
    for (int k = 0; k < classes; ++k) {
        std::ostringstream label_ss;
        label_ss << "class_" << std::setw(2) << std::setfill('0') << k;
        const std::string label = label_ss.str();
        std::filesystem::create_directories(out_root / label);

        const int shape = k % kNumShapes;
        const Color base = kPalette[k % 8];

        for (int i = 0; i < per_class; ++i) {
            ImageU8 img = make_image(height, width);
            // Smooth mid-gray value noise: coarse random grid, bilinearly
            // interpolated. Pixel-level white noise would hand the network a
            // maximally textured background no real photograph has.
            const int cell = std::max(4, min_dim / 8);
            const int gh = height / cell + 2, gw = width / cell + 2;
            std::vector<double> grid(static_cast<size_t>(gh) * gw);
            for (double& g : grid) g = rng.uniform(90.0, 170.0);
            for (int y = 0; y < height; ++y) {
                const double fy = static_cast<double>(y) / cell;
                const int cy = static_cast<int>(fy);
                const double ty = fy - cy;
                for (int x = 0; x < width; ++x) {
                    const double fx = static_cast<double>(x) / cell;
                    const int cx = static_cast<int>(fx);
                    const double tx = fx - cx;
                    const double top = grid[static_cast<size_t>(cy) * gw + cx] * (1 - tx) +
                                       grid[static_cast<size_t>(cy) * gw + cx + 1] * tx;
                    const double bot = grid[static_cast<size_t>(cy + 1) * gw + cx] * (1 - tx) +
                                       grid[static_cast<size_t>(cy + 1) * gw + cx + 1] * tx;
                    const uint8_t n = static_cast<uint8_t>(
                        clamp_byte(static_cast<int>(std::lround(top * (1 - ty) + bot * ty))));
                    img.at(y, x, 0) = n;
                    img.at(y, x, 1) = n;
                    img.at(y, x, 2) = n;
                }
            }

            // Object side between 42% and 50% of the short dimension, capped at
            // half of it so the box area never exceeds a quarter of the image.
            const int side = std::max(
                8, std::min(static_cast<int>(std::lround(rng.uniform(0.42, 0.50) * min_dim)),
                            min_dim / 2));
            const int x0 = 1 + static_cast<int>(rng.uniform_int(
                                   static_cast<uint64_t>(std::max(1, width - side - 1))));
            const int y0 = 1 + static_cast<int>(rng.uniform_int(
                                   static_cast<uint64_t>(std::max(1, height - side - 1))));

            // Per-image tint so class members are not pixel-identical.
            const int jr = static_cast<int>(rng.uniform_int(37)) - 18;
            const int jg = static_cast<int>(rng.uniform_int(37)) - 18;
            const int jb = static_cast<int>(rng.uniform_int(37)) - 18;

            // Instance-unique two-tone texture in the class hue. Class
            // identity stays shape+color, but each drawing gets its own
            // stripe direction, period, phase and depth -- like real
            // objects, no two instances are exactly alike.
            const int orient = static_cast<int>(rng.uniform_int(4));
            const int period = 3 + static_cast<int>(rng.uniform_int(
                                       static_cast<uint64_t>(std::max(2, side / 4))));
            const int phase = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(period)));
            const double dark = rng.uniform(0.35, 0.60);

            for (int y = 0; y < side; ++y) {
                for (int x = 0; x < side; ++x) {
                    if (!inside_shape(shape, side, x, y)) continue;
                    const int py = y0 + y, px = x0 + x;
                    if (py >= height || px >= width) continue;
                    const int coords[4] = {x, y, x - y + side, x + y};
                    const int band = (coords[orient] + phase) / period;
                    const double tone = (band & 1) == 0 ? 1.0 : dark;
                    img.at(py, px, 0) = static_cast<uint8_t>(
                        clamp_byte(static_cast<int>(std::lround((base.r + jr) * tone))));
                    img.at(py, px, 1) = static_cast<uint8_t>(
                        clamp_byte(static_cast<int>(std::lround((base.g + jg) * tone))));
                    img.at(py, px, 2) = static_cast<uint8_t>(
                        clamp_byte(static_cast<int>(std::lround((base.b + jb) * tone))));
                }
            }

            std::ostringstream name_ss;
            name_ss << "img_" << std::setw(4) << std::setfill('0') << i << ".png";
            const std::string filename = name_ss.str();
            save_image(img, out_root / label / filename);

            GeneratedBox box;
            box.id = label + "/" + filename;
            box.x_min = x0;
            box.y_min = y0;
            box.x_max = std::min(x0 + side, width);
            box.y_max = std::min(y0 + side, height);
            boxes.push_back(std::move(box));
        }
    }

    std::ofstream manifest(out_root / "boxes.tsv", std::ios::binary);
    if (!manifest) throw std::runtime_error("file not found: " + (out_root / "boxes.tsv").string());
    manifest << "id\tx_min\ty_min\tx_max\ty_max\n";
    for (const auto& b : boxes) {
        manifest << b.id << '\t' << b.x_min << '\t' << b.y_min << '\t' << b.x_max << '\t'
                 << b.y_max << '\n';
    }
    return boxes;
}

std::vector<GeneratedBox> read_box_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("file not found: " + path.string());
    std::vector<GeneratedBox> boxes;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            continue;
        }
        if (line.empty()) continue;
        std::istringstream ss(line);
        GeneratedBox b;
        std::string f;
        std::getline(ss, b.id, '\t');
        std::getline(ss, f, '\t');
        b.x_min = std::stoi(f);
        std::getline(ss, f, '\t');
        b.y_min = std::stoi(f);
        std::getline(ss, f, '\t');
        b.x_max = std::stoi(f);
        std::getline(ss, f, '\t');
        b.y_max = std::stoi(f);
        boxes.push_back(std::move(b));
    }
    return boxes;
}

}  // namespace xsim
