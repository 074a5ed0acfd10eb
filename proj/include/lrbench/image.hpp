#pragma once

// RGB image with double pixels in [0, 1], row-major (y, x, channel).
// I/O covers 8-bit PNG and binary PPM (P6).

#include <string>
#include <vector>

namespace lrbench {

struct Image {
    static constexpr int kChannels = 3;

    int height = 0;
    int width = 0;
    std::vector<double> pixels;  // height * width * 3

    Image() = default;
    Image(int h, int w, double fill = 0.0)
        : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * kChannels, fill) {}

    double& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
    }
    double at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
    }

    bool operator==(const Image&) const = default;
};

// Dispatches on extension: .png or .ppm. Values scaled to [0, 1] on load.
Image load_image(const std::string& path);
void save_image(const Image& img, const std::string& path);

// Peak signal-to-noise ratio with peak 1.0; images must share a shape.
double psnr(const Image& a, const Image& b);

}  // namespace lrbench
