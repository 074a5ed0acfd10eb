#include "lrbench/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lrbench/errors.hpp"

namespace lrbench {

namespace {

constexpr double kA = -0.5;  // Keys kernel parameter

int clamp_index(int i, int size) {
    return i < 0 ? 0 : (i >= size ? size - 1 : i);
}

double clamp01(double v) {
    return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

struct Taps {
    int first = 0;                // first source index (unclamped)
    std::vector<double> weights;  // normalized when antialiased
};

// One output coordinate's contributing source taps. Half-pixel-centered
// mapping: src = (dst + 0.5) * scale - 0.5.
Taps make_taps(int dst, double scale, bool antialias) {
    const double center = (static_cast<double>(dst) + 0.5) * scale - 0.5;
    Taps taps;
    if (antialias && scale > 1.0) {
        // Widen the kernel by the scale factor and renormalize.
        const double support = 2.0 * scale;
        taps.first = static_cast<int>(std::ceil(center - support));
        const int last = static_cast<int>(std::floor(center + support));
        double sum = 0.0;
        taps.weights.resize(static_cast<std::size_t>(last - taps.first + 1));
        for (int i = taps.first; i <= last; ++i) {
            const double w = keys_kernel((center - static_cast<double>(i)) / scale);
            taps.weights[static_cast<std::size_t>(i - taps.first)] = w;
            sum += w;
        }
        for (auto& w : taps.weights) {
            w /= sum;
        }
    } else {
        const int base = static_cast<int>(std::floor(center));
        const double t = center - static_cast<double>(base);
        const auto w = keys_weights(t);
        taps.first = base - 1;
        taps.weights.assign(w.begin(), w.end());
    }
    return taps;
}

// Separable resize along one axis. `horizontal` resizes width, else height.
Image resize_axis(const Image& img, int out_size, bool horizontal, bool antialias) {
    const int in_size = horizontal ? img.width : img.height;
    const int other = horizontal ? img.height : img.width;
    const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);

    std::vector<Taps> taps(static_cast<std::size_t>(out_size));
    for (int o = 0; o < out_size; ++o) {
        taps[static_cast<std::size_t>(o)] = make_taps(o, scale, antialias);
    }

    Image out = horizontal ? Image(img.height, out_size) : Image(out_size, img.width);
    for (int j = 0; j < other; ++j) {
        for (int o = 0; o < out_size; ++o) {
            const Taps& t = taps[static_cast<std::size_t>(o)];
            double acc[Image::kChannels] = {0.0, 0.0, 0.0};
            for (std::size_t k = 0; k < t.weights.size(); ++k) {
                const int src = clamp_index(t.first + static_cast<int>(k), in_size);
                const double w = t.weights[k];
                for (int c = 0; c < Image::kChannels; ++c) {
                    acc[c] += w * (horizontal ? img.at(j, src, c) : img.at(src, j, c));
                }
            }
            for (int c = 0; c < Image::kChannels; ++c) {
                if (horizontal) {
                    out.at(j, o, c) = acc[c];
                } else {
                    out.at(o, j, c) = acc[c];
                }
            }
        }
    }
    return out;
}

}  // namespace

void PreprocessSpec::validate() const {
    if (low_res < 1 || model_res < 1) {
        throw ValidationError("preprocess resolutions must be >= 1");
    }
    for (const double s : normalize_std) {
        if (!(s > 0.0)) {
            throw ValidationError("normalize_std components must be strictly positive");
        }
    }
}

double keys_kernel(double x) {
    x = std::abs(x);
    if (x < 1.0) {
        return ((kA + 2.0) * x - (kA + 3.0)) * x * x + 1.0;
    }
    if (x < 2.0) {
        return (((x - 5.0) * x + 8.0) * x - 4.0) * kA;
    }
    return 0.0;
}

std::array<double, 4> keys_weights(double t) {
    return {keys_kernel(1.0 + t), keys_kernel(t), keys_kernel(1.0 - t), keys_kernel(2.0 - t)};
}

Image bicubic_resize(const Image& img, int out_h, int out_w, bool antialias) {
    if (out_h < 1 || out_w < 1) {
        throw ValidationError("resize target must be >= 1 in both dimensions");
    }
    if (img.height <= 0 || img.width <= 0) {
        throw ValidationError("cannot resize an empty image");
    }
    const Image tmp = resize_axis(img, out_w, /*horizontal=*/true, antialias);
    Image out = resize_axis(tmp, out_h, /*horizontal=*/false, antialias);
    // Cubic overshoot would otherwise leave [0, 1]; clamp once per resize.
    for (double& p : out.pixels) {
        p = clamp01(p);
    }
    return out;
}

Image center_crop(const Image& img, int out_h, int out_w) {
    if (out_h > img.height || out_w > img.width) {
        throw ValidationError("center_crop target exceeds the image size");
    }
    const int y0 = (img.height - out_h) / 2;
    const int x0 = (img.width - out_w) / 2;
    Image out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            for (int c = 0; c < Image::kChannels; ++c) {
                out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
            }
        }
    }
    return out;
}

Image normalize(const Image& img, const std::array<double, 3>& mean,
                const std::array<double, 3>& std) {
    Image out = img;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < Image::kChannels; ++c) {
                out.at(y, x, c) = (img.at(y, x, c) - mean[c]) / std[c];
            }
        }
    }
    return out;
}

Image degrade_pipeline(const Image& img, const PreprocessSpec& spec) {
    spec.validate();
    Image low = bicubic_resize(img, spec.low_res, spec.low_res, spec.antialias);
    Image back = bicubic_resize(low, spec.model_res, spec.model_res, spec.antialias);
    Image cropped = center_crop(back, spec.model_res, spec.model_res);
    return normalize(cropped, spec.normalize_mean, spec.normalize_std);
}

}  // namespace lrbench
