#include "lrbench/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "lrbench/errors.hpp"

namespace lrbench {

namespace {

struct Color {
    double r, g, b;
};

Color random_color(Rng& rng) {
    return {rng.uniform(), rng.uniform(), rng.uniform()};
}

void fill_gradient(Image& img, const Color& a, const Color& b, double angle) {
    const double cs = std::cos(angle);
    const double sn = std::sin(angle);
    const double diag = static_cast<double>(img.height + img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double t =
                std::clamp(0.5 + (cs * x + sn * y) / diag, 0.0, 1.0);
            img.at(y, x, 0) = a.r + t * (b.r - a.r);
            img.at(y, x, 1) = a.g + t * (b.g - a.g);
            img.at(y, x, 2) = a.b + t * (b.b - a.b);
        }
    }
}

void draw_circle(Image& img, double cy, double cx, double radius, const Color& color) {
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius)));
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius)));
    const double r2 = radius * radius;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dy = y - cy;
            const double dx = x - cx;
            if (dy * dy + dx * dx <= r2) {
                img.at(y, x, 0) = color.r;
                img.at(y, x, 1) = color.g;
                img.at(y, x, 2) = color.b;
            }
        }
    }
}

void draw_rect(Image& img, int y0, int x0, int h, int w, const Color& color) {
    const int y1 = std::min(img.height, y0 + h);
    const int x1 = std::min(img.width, x0 + w);
    for (int y = std::max(0, y0); y < y1; ++y) {
        for (int x = std::max(0, x0); x < x1; ++x) {
            img.at(y, x, 0) = color.r;
            img.at(y, x, 1) = color.g;
            img.at(y, x, 2) = color.b;
        }
    }
}

// One 3x3 box-blur pass with edge clamping; softens shape boundaries.
Image box_blur(const Image& img) {
    Image out(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < Image::kChannels; ++c) {
                double acc = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = std::clamp(y + dy, 0, img.height - 1);
                        const int xx = std::clamp(x + dx, 0, img.width - 1);
                        acc += img.at(yy, xx, c);
                    }
                }
                out.at(y, x, c) = acc / 9.0;
            }
        }
    }
    return out;
}

}  // namespace

Image synthetic_image(int resolution, Rng& rng) {
    if (resolution < 4) {
        throw ValidationError("synthetic images need resolution >= 4");
    }
    Image img(resolution, resolution);
    fill_gradient(img, random_color(rng), random_color(rng), rng.uniform(0.0, 6.283185307));

    const int shapes = rng.uniform_int(4, 9);
    for (int s = 0; s < shapes; ++s) {
        const Color color = random_color(rng);
        if (rng.uniform() < 0.5) {
            const double radius = rng.uniform(0.06, 0.28) * resolution;
            draw_circle(img, rng.uniform(0.0, resolution - 1.0),
                        rng.uniform(0.0, resolution - 1.0), radius, color);
        } else {
            const int h = rng.uniform_int(resolution / 8, resolution / 2);
            const int w = rng.uniform_int(resolution / 8, resolution / 2);
            draw_rect(img, rng.uniform_int(0, resolution - 2), rng.uniform_int(0, resolution - 2),
                      h, w, color);
        }
    }
    return box_blur(img);
}

std::vector<Image> synthetic_dataset(int count, int resolution, Rng& rng) {
    std::vector<Image> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        out.push_back(synthetic_image(resolution, rng));
    }
    return out;
}

}  // namespace lrbench
