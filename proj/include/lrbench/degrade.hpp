#pragma once

// Low-resolution simulation. Downsample to n x n with separable cubic
// convolution (Keys kernel, a = -0.5, half-pixel-centered coordinates,
// edge-clamped taps), resize back up to the model resolution, center crop,
// then per-channel normalization. Output of every resample is clamped to
// [0, 1]; cubic overshoot would otherwise escape the range.

#include <array>

#include "lrbench/image.hpp"

namespace lrbench {

struct PreprocessSpec {
    int low_res = 16;
    int model_res = 224;
    std::array<double, 3> normalize_mean{0.0, 0.0, 0.0};
    std::array<double, 3> normalize_std{1.0, 1.0, 1.0};
    bool antialias = false;  // box-filtered kernel widening on downsample

    void validate() const;
};

// Keys cubic kernel, a = -0.5.
double keys_kernel(double x);

// Tap weights for source offsets {-1, 0, +1, +2} around the integer base,
// for fractional phase t in [0, 1). Phase 0.5 gives
// [-0.0625, 0.5625, 0.5625, -0.0625].
std::array<double, 4> keys_weights(double t);

Image bicubic_resize(const Image& img, int out_h, int out_w, bool antialias = false);

Image center_crop(const Image& img, int out_h, int out_w);

// (x - mean) / std per channel. The result is tensor-ready and may leave [0, 1].
Image normalize(const Image& img, const std::array<double, 3>& mean,
                const std::array<double, 3>& std);

// resize to n x n -> resize to model_res -> center crop -> normalize.
Image degrade_pipeline(const Image& img, const PreprocessSpec& spec);

}  // namespace lrbench
